import json

import numpy as np
import pytest

from covform.cli import (
    OK,
    formation_from_doc,
    formation_to_doc,
    load_formation_file,
    main,
)
from covform.scenario import ScenarioError, build_scenario, load_scenario
from covform.se2 import FormationState, Pose2
from covform.team import SortedIds


def minimal_doc(n=3):
    return {
        "team": {"count": n, "camera_radius": 0.5},
        "formation": {"directions": [[1, 0]] * (n - 1)},
    }


class TestScenarioValidation:
    def test_minimal_document(self):
        s = build_scenario(minimal_doc())
        assert s.team.n_robots == 3
        assert s.graph.n_edges == 12
        assert len(s.formation.directions) == 2

    def test_direction_count_mismatch_names_field(self):
        doc = minimal_doc()
        doc["formation"]["directions"] = [[1, 0]]
        with pytest.raises(ScenarioError, match="formation.directions"):
            build_scenario(doc)

    def test_directions_normalized(self):
        doc = minimal_doc()
        doc["formation"]["directions"] = [[2, 0], [1, 1]]
        s = build_scenario(doc)
        np.testing.assert_allclose(s.formation.direction(1), [1, 0])
        np.testing.assert_allclose(s.formation.direction(2), np.array([1, 1]) / np.sqrt(2))

    def test_bad_exempt_slot(self):
        doc = minimal_doc()
        doc["formation"]["exempt_slots"] = [9]
        with pytest.raises(ScenarioError, match="exempt_slots"):
            build_scenario(doc)

    def test_bad_mask_pair(self):
        doc = minimal_doc()
        doc["graph"] = {"masks": [[1, 9]]}
        with pytest.raises(ScenarioError, match=r"graph.masks\[0\]"):
            build_scenario(doc)

    def test_unknown_sim_field(self):
        doc = minimal_doc()
        doc["sim"] = {"bogus_rate": 1.0}
        with pytest.raises(ScenarioError, match="sim.*bogus_rate"):
            build_scenario(doc)

    def test_unknown_gps_robot(self):
        doc = minimal_doc()
        doc["gps_robots"] = [5]
        with pytest.raises(ScenarioError, match="gps_robots"):
            build_scenario(doc)

    def test_presets_load(self):
        for name, n in (("sim5", 5), ("bridge7", 7), ("exp3plus2", 5)):
            s = load_scenario(name)
            assert s.team.n_robots == n

    def test_bridge_preset_masks_gps_pair(self):
        s = load_scenario("bridge7")
        assert s.graph.n_edges == 80  # full graph 84 minus the 4 masked edges
        assert s.formation.overlap_exempt_slots == frozenset({1, 7})
        assert s.gps_robots == (1, 2)

    def test_missing_file_mentions_presets(self):
        with pytest.raises(ScenarioError, match="preset"):
            load_scenario("/nonexistent/path.json")

    def test_file_roundtrip(self, tmp_path):
        p = tmp_path / "scen.json"
        p.write_text(json.dumps(minimal_doc()))
        s = load_scenario(p)
        assert s.team.n_robots == 3
        assert s.name == "scen"


class TestFormationFiles:
    def test_doc_roundtrip_is_bit_identical(self):
        rng = np.random.default_rng(0)
        poses = [Pose2.from_angle(rng.uniform(-np.pi, np.pi), rng.uniform(-3, 3, 2))
                 for _ in range(4)]
        x = FormationState.from_poses(poses)
        s = SortedIds((1, 3, 2, 4, 5), (0.5,) * 5)
        doc = json.loads(json.dumps(formation_to_doc(x, s)))
        x2, s2 = formation_from_doc(doc)
        np.testing.assert_array_equal(x.C, x2.C)
        np.testing.assert_array_equal(x.r, x2.r)
        assert s == s2


def fast_scenario(tmp_path, n=3, restarts=1, max_iters=4000):
    doc = minimal_doc(n)
    doc["optimizer"] = {"restarts": restarts, "max_iters": max_iters}
    doc["sim"] = {
        "area": [6, 8],
        "landmarks": [[3.0, 4.0], [1.0, 6.0]],
        "max_sim_time": 200,
    }
    p = tmp_path / "scenario.json"
    p.write_text(json.dumps(doc))
    return p


class TestCli:
    def test_optimize_writes_parseable_formation(self, tmp_path):
        cfg = fast_scenario(tmp_path)
        rc = main(["optimize", "--config", str(cfg), "--cost", "adj",
                   "--seed", "3", "--out", str(tmp_path)])
        assert rc == OK
        x, s, doc = load_formation_file(tmp_path / "formation_adj.json")
        assert doc["trace"]["converged"]
        assert doc["cost"]["adj"] < 1e-3
        assert s.order[0] == 1

    def test_optimize_roundtrip_bit_identical(self, tmp_path):
        cfg = fast_scenario(tmp_path)
        main(["optimize", "--config", str(cfg), "--cost", "adj",
              "--seed", "3", "--out", str(tmp_path)])
        path = tmp_path / "formation_adj.json"
        x1, _, _ = load_formation_file(path)
        rewritten = tmp_path / "rewrite.json"
        doc = json.loads(path.read_text())
        rewritten.write_text(json.dumps(doc))
        x2, _, _ = load_formation_file(rewritten)
        np.testing.assert_array_equal(x1.C, x2.C)
        np.testing.assert_array_equal(x1.r, x2.r)

    def test_config_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        doc = minimal_doc()
        doc["formation"]["directions"] = [[1, 0]]  # wrong count
        bad.write_text(json.dumps(doc))
        rc = main(["optimize", "--config", str(bad), "--out", str(tmp_path)])
        assert rc == 1
        assert "formation.directions" in capsys.readouterr().err

    def test_heatmap_grid_shape_and_collision_support(self, tmp_path):
        cfg = fast_scenario(tmp_path)
        main(["optimize", "--config", str(cfg), "--cost", "adj",
              "--seed", "3", "--out", str(tmp_path)])
        rc = main(["heatmap", "--config", str(cfg), "--cost", "adj",
                   "--formation", str(tmp_path / "formation_adj.json"),
                   "--robot", "3", "--grid=-1,3,-1,1,9,7",
                   "--out", str(tmp_path)])
        assert rc == OK
        rows = (tmp_path / "heatmap_adj_r3.csv").read_text().strip().splitlines()
        assert rows[0] == "x,y,cost"
        assert len(rows) == 1 + 9 * 7
        grid = np.loadtxt(rows[1:], delimiter=",")
        assert np.all(np.isfinite(grid))

    def test_heatmap_constant_cost_gives_constant_grid(self, tmp_path):
        # all-zero weights zero out the cov objective everywhere
        doc = minimal_doc()
        doc["formation"]["weights"] = {"adj": 0, "overlap": 0, "est": 0, "col": 0}
        doc["optimizer"] = {"restarts": 1, "max_iters": 50}
        cfg = tmp_path / "zero.json"
        cfg.write_text(json.dumps(doc))
        main(["optimize", "--config", cfg.as_posix(), "--cost", "adj",
              "--seed", "3", "--out", str(tmp_path)])
        rc = main(["heatmap", "--config", cfg.as_posix(), "--cost", "cov",
                   "--formation", str(tmp_path / "formation_adj.json"),
                   "--grid=0,2,0,2,5,5", "--out", str(tmp_path)])
        assert rc == OK
        rows = (tmp_path / "heatmap_cov_r3.csv").read_text().strip().splitlines()
        vals = np.loadtxt(rows[1:], delimiter=",")[:, 2]
        assert np.all(vals == 0.0)

    def test_simulate_and_trajectory_dump(self, tmp_path):
        cfg = fast_scenario(tmp_path)
        main(["optimize", "--config", str(cfg), "--cost", "adj",
              "--seed", "3", "--out", str(tmp_path)])
        rc = main(["simulate", "--config", str(cfg),
                   "--formation", str(tmp_path / "formation_adj.json"),
                   "--seed", "5", "--out", str(tmp_path), "--dump-trajectories"])
        assert rc == OK
        metrics = json.loads((tmp_path / "simulate_metrics.json").read_text())
        assert metrics["completed"]
        header = (tmp_path / "trajectory.csv").read_text().splitlines()[0]
        assert "true_x1" in header and "lm1_3sig_x" in header

    def test_montecarlo_deterministic_bytes(self, tmp_path):
        cfg = fast_scenario(tmp_path)
        main(["optimize", "--config", str(cfg), "--cost", "adj",
              "--seed", "3", "--out", str(tmp_path)])
        form = str(tmp_path / "formation_adj.json")
        outs = []
        for sub in ("mc1", "mc2"):
            rc = main(["montecarlo", "--config", str(cfg), "--formations", form,
                       "--trials", "2", "--seed", "11", "--out", str(tmp_path / sub)])
            assert rc == OK
            outs.append((
                (tmp_path / sub / "trials_adj.jsonl").read_bytes(),
                (tmp_path / sub / "montecarlo_summary.json").read_bytes(),
            ))
        assert outs[0] == outs[1]


    def test_montecarlo_parallel_jobs_match_serial(self, tmp_path):
        cfg = fast_scenario(tmp_path)
        main(["optimize", "--config", str(cfg), "--cost", "adj",
              "--seed", "3", "--out", str(tmp_path)])
        form = str(tmp_path / "formation_adj.json")
        blobs = []
        for sub, jobs in (("serial", "1"), ("parallel", "2")):
            rc = main(["montecarlo", "--config", str(cfg), "--formations", form,
                       "--trials", "2", "--seed", "11", "--jobs", jobs,
                       "--out", str(tmp_path / sub)])
            assert rc == OK
            blobs.append((tmp_path / sub / "trials_adj.jsonl").read_bytes())
        assert blobs[0] == blobs[1]

    def test_montecarlo_missing_formation_file(self, tmp_path, capsys):
        cfg = fast_scenario(tmp_path)
        rc = main(["montecarlo", "--config", str(cfg),
                   "--formations", str(tmp_path / "nope.json"),
                   "--trials", "1", "--out", str(tmp_path)])
        assert rc == 1


class TestBridgeDemo:
    def bridge_config(self, tmp_path):
        doc = {
            "team": {"count": 7, "camera_radius": 0.5},
            "graph": {"full": True, "sigma": 0.1, "masks": [[1, 2]]},
            "formation": {
                "directions": [[1, 1]] + [[1, 0]] * 4 + [[1, -1]],
                "lambda": 0.25,
                "exempt_slots": [1, 7],
            },
            "gps_robots": [1, 2],
            "optimizer": {"restarts": 1, "max_iters": 8000},
        }
        p = tmp_path / "bridge.json"
        p.write_text(json.dumps(doc))
        return p

    def test_bridge_demo_end_to_end(self, tmp_path):
        import covform.ranging as ranging

        cfg = self.bridge_config(tmp_path)
        rc = main(["bridge-demo", "--config", str(cfg), "--seed", "1",
                   "--out", str(tmp_path)])
        assert rc == OK
        x, s, doc = load_formation_file(tmp_path / "formation_cov.json")
        assert doc["gps_robots"] == [1, 2]
        assert s.order[0] == 1

        # the five inspection slots (2..6) sit on a near-straight line
        pos = x.positions()[np.array(s.order) - 1]
        inner = pos[1:6]
        centered = inner - inner.mean(axis=0)
        resid = np.abs(centered @ np.linalg.svd(centered, full_matrices=False)[2][-1])
        assert resid.max() < 0.2

        # the masked GPS pair contributes no measurement rows
        scenario = __import__("covform.scenario", fromlist=["load_scenario"]).load_scenario(str(cfg))
        H = ranging.jacobian(x, scenario.team, scenario.graph)
        assert H.shape == (80, 18)

    def test_bridge_demo_requires_seven_robots(self, tmp_path, capsys):
        doc = {"team": {"count": 5},
               "formation": {"directions": [[1, 0]] * 4}}
        p = tmp_path / "five.json"
        p.write_text(json.dumps(doc))
        rc = main(["bridge-demo", "--config", str(p), "--out", str(tmp_path)])
        assert rc == 1
        assert "7-robot" in capsys.readouterr().err
