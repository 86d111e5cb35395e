"""Batch command-line front end.

Subcommands:
    optimize     find a formation by minimizing adj, opt or cov
    heatmap      CSV cost grid swept over one robot's position
    simulate     one coverage trial for a formation file
    montecarlo   seeded trials for several formations + comparison table
    bridge-demo  the seven-robot bridge preset end to end

Every command is deterministic given (--config, --seed). Results are JSON
(formation, metrics) or CSV (grids, trajectories); exit codes: 0 ok,
1 config error, 2 non-convergence or incomplete coverage.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from covform import costs
from covform.assignment import sort_robot_ids
from covform.covsim import (
    aggregate,
    dump_trajectory_csv,
    reduction_table,
    run_coverage_sim,
    trial_seeds,
)
from covform.optimizer import OptimizationTrace, minimize, random_formation
from covform.scenario import Scenario, ScenarioError, load_scenario
from covform.se2 import FormationState
from covform.team import SortedIds

OK, CONFIG_ERROR, NOT_CONVERGED = 0, 1, 2


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def formation_to_doc(x: FormationState, sorted_ids: SortedIds) -> dict:
    return {
        "poses": [{"C": [[x.C[i, 0, 0], x.C[i, 0, 1]], [x.C[i, 1, 0], x.C[i, 1, 1]]],
                   "r": [x.r[i, 0], x.r[i, 1]]}
                  for i in range(x.C.shape[0])],
        "sorted_ids": {"order": list(sorted_ids.order),
                       "radii": list(sorted_ids.sorted_radii)},
    }


def formation_from_doc(doc: dict) -> tuple[FormationState, SortedIds]:
    poses = doc["poses"]
    C = np.array([p["C"] for p in poses], dtype=np.float64)
    r = np.array([p["r"] for p in poses], dtype=np.float64)
    s = doc["sorted_ids"]
    return (FormationState(C, r),
            SortedIds(tuple(int(v) for v in s["order"]),
                      tuple(float(v) for v in s["radii"])))


def load_formation_file(path: str | Path) -> tuple[FormationState, SortedIds, dict]:
    doc = json.loads(Path(path).read_text())
    x, s = formation_from_doc(doc["formation"])
    return x, s, doc


def optimize_formation(scenario: Scenario, kind: str, seed: int) -> tuple[OptimizationTrace, SortedIds]:
    """Multistart optimization; robot ids are sorted per restart from its
    own random start (travel distance is defined by where robots begin)."""
    cfg = scenario.optimizer
    dirs = np.asarray(scenario.formation.directions)
    best: OptimizationTrace | None = None
    best_sorted: SortedIds | None = None
    for child in np.random.SeedSequence(seed).spawn(cfg.restarts):
        x0 = random_formation(scenario.team.n_robots, np.random.default_rng(child), cfg)
        sorted_ids = sort_robot_ids(x0, scenario.team, dirs)
        cost = costs.cost_function(kind, scenario.team, scenario.graph,
                                   scenario.formation, sorted_ids)
        trace = minimize(cost, x0, cfg)
        if best is None or trace.final_cost < best.final_cost:
            best, best_sorted = trace, sorted_ids
    assert best is not None and best_sorted is not None
    return best, best_sorted


def cmd_optimize(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.config)
    trace, sorted_ids = optimize_formation(scenario, args.cost, args.seed)
    x = trace.final_state
    breakdown = costs.j_cov(x, scenario.team, scenario.graph,
                            scenario.formation, sorted_ids)
    out = Path(args.out) / f"formation_{args.cost}.json"
    _write_json(out, {
        "cost_kind": args.cost,
        "seed": args.seed,
        "scenario": scenario.name,
        "formation": formation_to_doc(x, sorted_ids),
        "cost": {"adj": breakdown.adj, "overlap": breakdown.overlap,
                 "est": breakdown.est, "col": breakdown.col,
                 "objective": trace.final_cost},
        "trace": {"converged": trace.converged, "iterations": trace.n_iters,
                  "final_step_norm": trace.iterates[-1][2] if trace.iterates else 0.0,
                  "message": trace.message},
        "gps_robots": list(scenario.gps_robots),
    })
    print(f"wrote {out} (converged={trace.converged}, cost={trace.final_cost:.6g})")
    return OK if trace.converged else NOT_CONVERGED


def cmd_heatmap(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.config)
    x, sorted_ids, _ = load_formation_file(args.formation)
    robot = args.robot if args.robot is not None else scenario.team.n_robots
    if not 2 <= robot <= scenario.team.n_robots:
        raise ScenarioError(f"heatmap robot must be 2..{scenario.team.n_robots}, got {robot}")
    if args.grid:
        try:
            x0, x1, y0, y1, nx, ny = (float(v) for v in args.grid.split(","))
            nx, ny = int(nx), int(ny)
        except ValueError:
            raise ScenarioError("grid must be 'xmin,xmax,ymin,ymax,nx,ny'") from None
    else:
        pos = x.positions()
        margin = 2.0
        x0, x1 = pos[:, 0].min() - margin, pos[:, 0].max() + margin
        y0, y1 = pos[:, 1].min() - margin, pos[:, 1].max() + margin
        nx = ny = args.resolution
    if nx < 2 or ny < 2:
        raise ScenarioError("grid resolution must be at least 2 in each axis")

    cost = costs.cost_function(args.cost, scenario.team, scenario.graph,
                               scenario.formation, sorted_ids)
    i = robot - 2
    out = Path(args.out) / f"heatmap_{args.cost}_r{robot}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        fh.write("x,y,cost\n")
        for gy in np.linspace(y0, y1, ny):
            for gx in np.linspace(x0, x1, nx):
                r = x.r.copy()
                r[i] = (gx, gy)
                try:
                    value = cost(FormationState(x.C.copy(), r))
                except ValueError:
                    value = costs.SATURATION  # grid point on degenerate geometry
                fh.write(f"{gx:.17g},{gy:.17g},{value:.17g}\n")
    print(f"wrote {out}")
    return OK


def _one_trial(payload):
    team, graph, x, config = payload
    return run_coverage_sim(team, graph, x, config)


def cmd_simulate(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.config)
    x, _, _ = load_formation_file(args.formation)
    config = replace(scenario.sim, seed=args.seed)
    artifacts = run_coverage_sim(scenario.team, scenario.graph, x, config,
                                 keep_artifacts=True)
    metrics = artifacts.metrics
    outdir = Path(args.out)
    _write_json(outdir / "simulate_metrics.json",
                metrics.as_record(Path(args.formation).stem))
    if args.dump_trajectories:
        dump_trajectory_csv(outdir / "trajectory.csv", artifacts)
        print(f"wrote {outdir / 'trajectory.csv'}")
    print(f"wrote {outdir / 'simulate_metrics.json'} "
          f"(completed={metrics.completed}, coverage_time={metrics.coverage_time:.2f})")
    return OK if metrics.completed else NOT_CONVERGED


def cmd_montecarlo(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.config)
    formations: dict[str, FormationState] = {}
    for path in args.formations:
        p = Path(path)
        if not p.exists():
            raise ScenarioError(f"formations: no such file {p}")
        x, _, doc = load_formation_file(p)
        formations[doc.get("cost_kind", p.stem)] = x

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    aggregates: dict[str, dict] = {}
    for name, x in formations.items():
        seeds = trial_seeds(args.seed, args.trials)
        payloads = [(scenario.team, scenario.graph, x, replace(scenario.sim, seed=s))
                    for s in seeds]
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                results = list(pool.map(_one_trial, payloads))
        else:
            results = [_one_trial(p) for p in payloads]
        with open(outdir / f"trials_{name}.jsonl", "w") as fh:
            for r in results:
                fh.write(json.dumps(r.as_record(name), sort_keys=True) + "\n")
        aggregates[name] = aggregate(results)

    baseline = "adj" if "adj" in aggregates else next(iter(aggregates))
    summary = {
        "seed": args.seed,
        "trials": args.trials,
        "aggregates": aggregates,
        "reduction_vs_" + baseline: reduction_table(aggregates, baseline),
    }
    _write_json(outdir / "montecarlo_summary.json", summary)
    print(f"wrote {outdir / 'montecarlo_summary.json'}")
    return OK


def cmd_bridge_demo(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.config)
    if scenario.team.n_robots != 7:
        raise ScenarioError(f"bridge demo needs the 7-robot preset, got N={scenario.team.n_robots}")
    args.cost = "cov"
    return cmd_optimize(args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="covform",
                                     description="formation design and coverage evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True,
                       help="scenario JSON path or preset name (sim5, bridge7, exp3plus2)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("optimize", help="minimize a formation cost")
    common(p)
    p.add_argument("--cost", choices=("adj", "opt", "cov"), default="cov")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("heatmap", help="cost grid over one robot's position")
    common(p)
    p.add_argument("--cost", choices=("adj", "opt", "cov"), default="cov")
    p.add_argument("--formation", required=True, help="formation JSON to scan around")
    p.add_argument("--robot", type=int, default=None, help="robot id to sweep (default: last)")
    p.add_argument("--grid", default=None, help="xmin,xmax,ymin,ymax,nx,ny")
    p.add_argument("--resolution", type=int, default=60, help="points per axis when --grid omitted")
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("simulate", help="one coverage trial for a formation")
    common(p)
    p.add_argument("--formation", required=True)
    p.add_argument("--dump-trajectories", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("montecarlo", help="seeded trials over formations")
    common(p)
    p.add_argument("--formations", nargs="+", required=True)
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("bridge-demo", help="optimize the bridge-inspection preset")
    common(p)
    p.set_defaults(func=cmd_bridge_demo)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as e:
        print(f"config error: {e}", file=sys.stderr)
        return CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
