"""Sort robot ids into formation slots by travel distance.

Robots start anywhere; the target formation defines one slot per robot.
Assigning robots to slots so the fleet travels the least total (squared)
distance is a linear assignment problem, solved with the Hungarian
algorithm (shortest augmenting path with potentials, O(n^3)) instead of
brute force. Robot 1 is the reference and always keeps slot 1.
"""

from __future__ import annotations

import numpy as np

from covform.se2 import FormationState
from covform.team import SortedIds, TeamConfig

_TIE_TOL = 1e-9


def _lsap(cost: np.ndarray) -> tuple[float, np.ndarray]:
    """Minimum-cost square assignment; returns (value, col_of_row)."""
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    row_of_col = np.zeros(n + 1, dtype=int)  # 0 means unassigned
    way = np.zeros(n + 1, dtype=int)
    for i in range(1, n + 1):
        row_of_col[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = row_of_col[j0]
            delta = np.inf
            j1 = 0
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[row_of_col[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if row_of_col[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            row_of_col[j0] = row_of_col[j1]
            j0 = j1
    col_of_row = np.empty(n, dtype=int)
    for j in range(1, n + 1):
        col_of_row[row_of_col[j] - 1] = j - 1
    value = float(cost[np.arange(n), col_of_row].sum())
    return value, col_of_row


def hungarian(cost: np.ndarray) -> np.ndarray:
    """Optimal assignment for a square cost matrix.

    Returns col_of_row: row i is assigned column col_of_row[i]. Among
    optimal assignments, the lexicographically smallest one is returned,
    which makes downstream id sorting deterministic across platforms.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix must be finite")
    n = cost.shape[0]
    if n == 1:
        return np.zeros(1, dtype=int)

    best, col_of_row = _lsap(cost)
    tol = _TIE_TOL * max(1.0, abs(best))

    # lexicographic refinement: fix rows in order to the smallest column
    # that still admits an optimal completion
    chosen = np.empty(n, dtype=int)
    free_cols = list(range(n))
    prefix = 0.0
    for i in range(n):
        rest_rows = np.arange(i + 1, n)
        for j in free_cols:
            others = [c for c in free_cols if c != j]
            tail = _lsap(cost[np.ix_(rest_rows, others)])[0] if len(others) else 0.0
            if prefix + cost[i, j] + tail <= best + tol:
                chosen[i] = j
                prefix += cost[i, j]
                free_cols.remove(j)
                break
        else:  # numerically impossible, guard anyway
            raise RuntimeError("no optimal completion found during tie-breaking")
    return chosen


def travel_cost_matrix(x: FormationState, team: TeamConfig,
                       directions: np.ndarray) -> np.ndarray:
    """(N-1)x(N-1) matrix of squared distances from robots to slot targets.

    Slot targets are the cumulative sums of d_avg * direction_k with
    d_avg = (2/N) * sum of camera radii, i.e. an average-diameter mockup
    of the goal formation used only to decide the ordering.
    """
    n = team.n_robots
    directions = np.asarray(directions, dtype=np.float64)
    if directions.shape != (n - 1, 2):
        raise ValueError(f"need {n - 1} direction vectors, got shape {directions.shape}")
    d_avg = 2.0 / n * float(team.camera_radii().sum())
    targets = np.cumsum(d_avg * directions, axis=0)   # slot i+2 target
    diff = targets[:, None, :] - x.r[None, :, :]      # robots 2..N positions
    return np.einsum("ijk,ijk->ij", diff, diff)


def sort_robot_ids(x: FormationState, team: TeamConfig, directions) -> SortedIds:
    """Assign robots 2..N to formation slots minimizing total travel.

    Slot 1 is pinned to robot 1. Returns the slot order and the camera
    radii re-indexed to it.
    """
    cost = travel_cost_matrix(x, team, np.asarray(directions, dtype=np.float64))
    col_of_slot = hungarian(cost)
    order = (1,) + tuple(int(j) + 2 for j in col_of_slot)
    radii = tuple(team.robots[r - 1].camera_radius for r in order)
    return SortedIds(order, radii)
