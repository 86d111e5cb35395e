"""Seeded Monte Carlo trials and their aggregation."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from covform.covsim.config import SimConfig, SimMetrics
from covform.covsim.sim import run_coverage_sim
from covform.se2 import FormationState
from covform.team import RangeGraph, TeamConfig


def trial_seeds(master_seed: int, trials: int) -> list[int]:
    """Independent per-trial seeds derived from one master seed."""
    return [int(s) for s in np.random.SeedSequence(master_seed).generate_state(trials)]


def monte_carlo(team: TeamConfig, graph: RangeGraph, x_des: FormationState,
                config: SimConfig, trials: int) -> tuple[list[SimMetrics], dict]:
    """Run independent trials; aggregate medians and quartiles.

    Incomplete trials are excluded and counted. Diverged trials are
    excluded from the filtered statistics but kept in the raw ones, and
    both are reported since the choice moves the medians for poorly
    observable formations.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    results = [run_coverage_sim(team, graph, x_des, replace(config, seed=s))
               for s in trial_seeds(config.seed, trials)]
    return results, aggregate(results)


def _stats(values: list[float]) -> dict:
    if not values:
        return {"median": None, "p25": None, "p75": None}
    v = np.asarray(values, dtype=np.float64)
    return {"median": float(np.median(v)),
            "p25": float(np.percentile(v, 25)),
            "p75": float(np.percentile(v, 75))}


def aggregate(results: list[SimMetrics]) -> dict:
    """Median/quartile summary over trials, raw and divergence-filtered."""
    completed = [r for r in results if r.completed]
    valid = [r for r in completed if not r.diverged]
    n_landmarks = len(results[0].landmark_errors) if results else 0

    def table(rows: list[SimMetrics]) -> dict:
        out = {
            "coverage_time": _stats([r.coverage_time for r in rows]),
            "interrobot_att_rmse": _stats([r.interrobot_att_rmse for r in rows]),
            "interrobot_pos_rmse": _stats([r.interrobot_pos_rmse for r in rows]),
            "nees_containment": _stats([r.nees_containment for r in rows]),
        }
        for l in range(n_landmarks):
            vals = [r.landmark_errors[l] for r in rows if np.isfinite(r.landmark_errors[l])]
            out[f"landmark{l + 1}_error"] = _stats(vals)
        return out

    return {
        "trials": len(results),
        "excluded_incomplete": len(results) - len(completed),
        "excluded_diverged": len(completed) - len(valid),
        "filtered": table(valid),
        "raw": table(completed),
    }


METRIC_KEYS = ("landmark1_error", "landmark2_error",
               "interrobot_att_rmse", "interrobot_pos_rmse")


def reduction_table(aggregates: dict[str, dict], baseline: str,
                    which: str = "filtered") -> dict[str, dict[str, float | None]]:
    """Percentage reduction in median metrics relative to a baseline formation."""
    if baseline not in aggregates:
        raise ValueError(f"baseline {baseline!r} missing from aggregates")
    base = aggregates[baseline][which]
    out: dict[str, dict[str, float | None]] = {}
    for name, agg in aggregates.items():
        row: dict[str, float | None] = {}
        for key in METRIC_KEYS:
            b = base.get(key, {}).get("median")
            m = agg[which].get(key, {}).get("median")
            row[key] = None if (b in (None, 0.0) or m is None) else 100.0 * (1.0 - m / b)
        out[name] = row
    return out
