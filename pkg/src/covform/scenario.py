"""Scenario files: one JSON document describing team, graph, formation, solver, sim.

Schema (all sections optional except team and formation):

    {
      "team": {"count": 5, "tag_offsets": [[0.17,-0.17],[-0.17,0.17]],
               "camera_radius": 0.5}
            or {"robots": [{"id":1, "tag_offsets": [...], "camera_radius": 0.5}, ...]},
      "graph": {"full": true, "sigma": 0.1, "masks": [[1,2]]}
            or {"edges": [[1,3],...], "sigma": 0.1},
      "formation": {"directions": [[1,0],...], "lambda": 0.25,
                    "exempt_slots": [1,7], "activation_radius": 0.9,
                    "collision_radius": 0.5,
                    "weights": {"adj":1,"overlap":1,"est":1,"col":1}},
      "optimizer": {"alpha":1e-3, "beta":0.9, "tol":1e-4, "max_iters":50000,
                    "fd_step":1e-6, "restarts":8, "init_box":3.0},
      "sim": {"area":[10,24], "landmarks":[[5,12],[2,20]], "dt_truth":0.01,
              "range_rate":110, "gps_rate":50, "gps_sigma":0.1,
              "range_sigma":0.1, "vel_noise":[0.01,0.1], ...,
              "gains":{"waypoint":0.8,"formation":1.2,"heading":2.0,"speed_cap":1.0}},
      "gps_robots": [1, 2]
    }

Direction vectors are normalized on load. Named presets (sim5, bridge7,
exp3plus2) can be used anywhere a config path is accepted.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from covform.covsim.config import ControlGains, SimConfig
from covform.optimizer import OptimizerConfig
from covform.team import (
    CostWeights,
    FormationSpec,
    RangeGraph,
    RobotSpec,
    TeamConfig,
    default_full_graph,
    mask_edges,
)


class ScenarioError(ValueError):
    """Config validation problem; the message carries the offending field path."""


@dataclass
class Scenario:
    team: TeamConfig
    graph: RangeGraph
    formation: FormationSpec
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    gps_robots: tuple[int, ...] = ()
    name: str = "scenario"


def _expect(cond: bool, path: str, msg: str) -> None:
    if not cond:
        raise ScenarioError(f"{path}: {msg}")


def _build_team(cfg: dict) -> TeamConfig:
    if "robots" in cfg:
        robots = []
        for i, r in enumerate(cfg["robots"]):
            path = f"team.robots[{i}]"
            _expect("id" in r, path, "missing id")
            offsets = tuple(tuple(map(float, o)) for o in r.get("tag_offsets",
                            ((0.17, -0.17), (-0.17, 0.17))))
            try:
                robots.append(RobotSpec(int(r["id"]), offsets,
                                        float(r.get("camera_radius", 0.5))))
            except ValueError as e:
                raise ScenarioError(f"{path}: {e}") from None
        try:
            return TeamConfig(tuple(robots))
        except ValueError as e:
            raise ScenarioError(f"team.robots: {e}") from None
    _expect("count" in cfg, "team", "needs either 'count' or 'robots'")
    count = int(cfg["count"])
    _expect(count >= 2, "team.count", f"need at least 2 robots, got {count}")
    offsets = tuple(tuple(map(float, o)) for o in cfg.get("tag_offsets",
                    ((0.17, -0.17), (-0.17, 0.17))))
    return TeamConfig.uniform(count, offsets, float(cfg.get("camera_radius", 0.5)))


def _build_graph(cfg: dict, team: TeamConfig) -> RangeGraph:
    sigma = float(cfg.get("sigma", 0.1))
    _expect(sigma > 0, "graph.sigma", f"must be > 0, got {sigma}")
    if cfg.get("edges") is not None:
        try:
            graph = RangeGraph.from_pairs([tuple(map(int, e)) for e in cfg["edges"]], sigma)
        except ValueError as e:
            raise ScenarioError(f"graph.edges: {e}") from None
    else:
        graph = default_full_graph(team, sigma)
    for k, pair in enumerate(cfg.get("masks", ())):
        a, b = (int(v) for v in pair)
        _expect(1 <= a <= team.n_robots and 1 <= b <= team.n_robots,
                f"graph.masks[{k}]", f"unknown robot pair ({a}, {b})")
        graph = mask_edges(graph, (a, b), team)
    return graph


def _build_formation(cfg: dict, team: TeamConfig) -> FormationSpec:
    _expect("directions" in cfg, "formation", "missing directions")
    raw = cfg["directions"]
    _expect(len(raw) == team.n_robots - 1, "formation.directions",
            f"expected {team.n_robots - 1} vectors for {team.n_robots} robots, got {len(raw)}")
    dirs = []
    for k, d in enumerate(raw):
        x, y = float(d[0]), float(d[1])
        norm = math.hypot(x, y)
        _expect(norm > 0, f"formation.directions[{k}]", "zero vector")
        dirs.append((x / norm, y / norm))
    exempt = frozenset(int(s) for s in cfg.get("exempt_slots", ()))
    for s in sorted(exempt):
        _expect(1 <= s <= team.n_robots, "formation.exempt_slots",
                f"slot {s} outside 1..{team.n_robots}")
    w = cfg.get("weights", {})
    try:
        return FormationSpec(
            directions=tuple(dirs),
            overlap_fraction=float(cfg.get("lambda", 0.25)),
            overlap_exempt_slots=exempt,
            activation_radius=float(cfg.get("activation_radius", 0.9)),
            collision_radius=float(cfg.get("collision_radius", 0.5)),
            weights=CostWeights(adj=float(w.get("adj", 1.0)),
                                overlap=float(w.get("overlap", 1.0)),
                                est=float(w.get("est", 1.0)),
                                col=float(w.get("col", 1.0))),
        )
    except ValueError as e:
        raise ScenarioError(f"formation: {e}") from None


def _build_optimizer(cfg: dict) -> OptimizerConfig:
    known = {f.name for f in fields(OptimizerConfig)}
    unknown = set(cfg) - known
    _expect(not unknown, "optimizer", f"unknown fields {sorted(unknown)}")
    ints = {"max_iters", "restarts"}
    kw = {k: (int(v) if k in ints else float(v)) for k, v in cfg.items()}
    try:
        return OptimizerConfig(**kw)
    except ValueError as e:
        raise ScenarioError(f"optimizer: {e}") from None


def _build_sim(cfg: dict) -> SimConfig:
    kw: dict[str, Any] = {}
    if "area" in cfg:
        kw["area"] = tuple(float(v) for v in cfg["area"])
    if "landmarks" in cfg:
        kw["landmark_positions"] = tuple(tuple(float(v) for v in p) for p in cfg["landmarks"])
    if "vel_noise" in cfg:
        om, v = cfg["vel_noise"]
        kw["vel_noise_omega"] = float(om)
        kw["vel_noise_v"] = float(v)
    if "gains" in cfg:
        g = cfg["gains"]
        kw["gains"] = ControlGains(
            waypoint=float(g.get("waypoint", 0.8)),
            formation=float(g.get("formation", 1.2)),
            heading=float(g.get("heading", 2.0)),
            speed_cap=float(g.get("speed_cap", 1.0)))
    passthrough = ("dt_truth", "range_rate", "gps_rate", "gps_sigma", "range_sigma",
                   "landmark_detection_radius", "waypoint_tolerance", "formation_gate",
                   "seed", "max_sim_time", "noise_scale", "init_pos_sigma",
                   "init_att_sigma", "divergence_threshold")
    for key in passthrough:
        if key in cfg:
            kw[key] = type(getattr(SimConfig, key))(cfg[key])
    known = set(passthrough) | {"area", "landmarks", "vel_noise", "gains"}
    unknown = set(cfg) - known
    _expect(not unknown, "sim", f"unknown fields {sorted(unknown)}")
    try:
        return SimConfig(**kw)
    except ValueError as e:
        raise ScenarioError(f"sim: {e}") from None


def build_scenario(doc: dict, name: str = "scenario") -> Scenario:
    """Validate one parsed config document; raises ScenarioError with a field path."""
    _expect(isinstance(doc, dict), "", "config root must be an object")
    _expect("team" in doc, "team", "missing section")
    _expect("formation" in doc, "formation", "missing section")
    team = _build_team(doc["team"])
    graph = _build_graph(doc.get("graph", {}), team)
    formation = _build_formation(doc["formation"], team)
    optimizer = _build_optimizer(doc.get("optimizer", {}))
    sim = _build_sim(doc.get("sim", {}))
    gps = tuple(int(v) for v in doc.get("gps_robots", ()))
    for g in gps:
        _expect(1 <= g <= team.n_robots, "gps_robots", f"unknown robot {g}")
    return Scenario(team=team, graph=graph, formation=formation,
                    optimizer=optimizer, sim=sim, gps_robots=gps, name=name)


PRESETS: dict[str, dict] = {
    # five-robot coverage study: line formation, 10 x 24 m sweep
    "sim5": {
        "team": {"count": 5, "camera_radius": 0.5},
        "graph": {"full": True, "sigma": 0.1},
        "formation": {"directions": [[1, 0]] * 4, "lambda": 0.25},
        "sim": {"area": [10, 24]},
    },
    # seven-robot bridge inspection: five camera robots in a near line,
    # two GPS-carrying robots angled off the ends, which neither range
    # against each other nor count toward camera overlap
    "bridge7": {
        "team": {"count": 7, "camera_radius": 0.5},
        "graph": {"full": True, "sigma": 0.1, "masks": [[1, 2]]},
        "formation": {
            "directions": [[1, 1]] + [[1, 0]] * 4 + [[1, -1]],
            "lambda": 0.25,
            "exempt_slots": [1, 7],
        },
        "gps_robots": [1, 2],
    },
    # lab-scale geometry: 4 x 6 m room, 0.7 m cameras, slower sensor rates
    "exp3plus2": {
        "team": {"count": 5, "camera_radius": 0.7},
        "graph": {"full": True, "sigma": 0.1},
        "formation": {"directions": [[1, 0]] * 4, "lambda": 0.25},
        "sim": {
            "area": [4, 6],
            "dt_truth": 0.1,
            "range_rate": 80,
            "gps_rate": 30,
            "landmarks": [[0.2, 3.0], [3.8, 5.0]],
            "max_sim_time": 300,
        },
    },
}


def load_scenario(source: str | Path) -> Scenario:
    """Load a scenario from a preset name or a JSON file path."""
    key = str(source)
    if key in PRESETS:
        return build_scenario(PRESETS[key], name=key)
    path = Path(source)
    if not path.exists():
        raise ScenarioError(
            f"config: no file {path} and no preset named {key!r} "
            f"(presets: {', '.join(sorted(PRESETS))})")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ScenarioError(f"config: {path} is not valid JSON ({e})") from None
    return build_scenario(doc, name=path.stem)
