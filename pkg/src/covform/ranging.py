"""Range measurement model, its Jacobian under the right-perturbation, and the FIM.

The Jacobian is derived in closed form here rather than transcribed. For a
tag at body-frame offset a on robot p (pose T with rotation C), its world
position under a right perturbation xi = [phi, rho] is

    pos(xi) = C (R(phi) a + V(phi) rho) + r,

so at xi = 0

    d pos / d phi = C S a,      d pos / d rho = C,

with S the 90-degree generator. A range row for edge (i, j) is then
(rho_ij / |rho_ij|)^T times the position Jacobians, positive for the
endpoint on robot p and negative for the one on robot q. Robot 1 is not a
state and contributes no columns. Everything is validated against central
finite differences in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from covform.se2 import FormationState
from covform.team import RangeGraph, TeamConfig

# Range rows are undefined below this separation (norm gradient blows up).
DEGENERATE_RANGE = 1e-9


@dataclass(frozen=True, eq=False)
class _EdgeIndex:
    """Precomputed tag/edge arrays; built once per (team, graph) pair."""

    tag_robot: np.ndarray   # (T,) 0-based robot index per global tag
    tag_offset: np.ndarray  # (T,2) body-frame offsets
    tag_perp: np.ndarray    # (T,2) S @ offset, the rotation derivative lever
    edge_i: np.ndarray      # (E,) flat tag index of first endpoint
    edge_j: np.ndarray
    robot_i: np.ndarray     # (E,) 0-based robot of first endpoint
    robot_j: np.ndarray
    state_i: np.ndarray     # (E,) bool, endpoint lives on a state robot (not robot 1)
    state_j: np.ndarray
    col_i: np.ndarray       # (E,) first column of the robot's 3-wide block
    col_j: np.ndarray
    sigma: np.ndarray       # (E,)
    n_cols: int


@lru_cache(maxsize=64)
def _edge_index(team: TeamConfig, graph: RangeGraph) -> _EdgeIndex:
    t = team.n_tags
    tag_robot = np.empty(t, dtype=np.intp)
    tag_offset = np.empty((t, 2))
    for tag in range(1, t + 1):
        robot, local = team.tag_owner(tag)
        tag_robot[tag - 1] = robot - 1
        tag_offset[tag - 1] = team.robots[robot - 1].tag_offsets[local]
    tag_perp = np.stack([-tag_offset[:, 1], tag_offset[:, 0]], axis=1)

    e = graph.n_edges
    edge_i = np.empty(e, dtype=np.intp)
    edge_j = np.empty(e, dtype=np.intp)
    for k, (i, j) in enumerate(graph.edges):
        edge_i[k], edge_j[k] = i - 1, j - 1
    robot_i = tag_robot[edge_i]
    robot_j = tag_robot[edge_j]
    if np.any(robot_i == robot_j):
        k = int(np.argmax(robot_i == robot_j))
        raise ValueError(f"edge {graph.edges[k]} connects two tags on robot {robot_i[k] + 1}")
    return _EdgeIndex(
        tag_robot=tag_robot, tag_offset=tag_offset, tag_perp=tag_perp,
        edge_i=edge_i, edge_j=edge_j, robot_i=robot_i, robot_j=robot_j,
        state_i=robot_i >= 1, state_j=robot_j >= 1,
        col_i=3 * (robot_i - 1), col_j=3 * (robot_j - 1),
        sigma=np.asarray(graph.sigmas, dtype=np.float64),
        n_cols=3 * (team.n_robots - 1),
    )


def _stacked_frames(x: FormationState) -> tuple[np.ndarray, np.ndarray]:
    n = x.C.shape[0] + 1
    C = np.empty((n, 2, 2))
    C[0] = np.eye(2)
    C[1:] = x.C
    return C, x.positions()


def _tag_world(x: FormationState, idx: _EdgeIndex) -> tuple[np.ndarray, np.ndarray]:
    """World tag positions (T,2) and the stacked rotations (N,2,2)."""
    C, r = _stacked_frames(x)
    Ct = C[idx.tag_robot]
    pos = np.einsum("tij,tj->ti", Ct, idx.tag_offset) + r[idx.tag_robot]
    return pos, C


def tag_position(x: FormationState, team: TeamConfig, tag_id: int) -> np.ndarray:
    """World position of one tag, resolved in robot 1's frame."""
    robot, local = team.tag_owner(tag_id)
    offset = np.asarray(team.robots[robot - 1].tag_offsets[local], dtype=np.float64)
    if robot == 1:
        return offset
    i = robot - 2
    return x.C[i] @ offset + x.r[i]


def predict_range(x: FormationState, team: TeamConfig, edge: tuple[int, int]) -> float:
    """Noiseless range between two tags on distinct robots."""
    i, j = edge
    pi, _ = team.tag_owner(i)
    pj, _ = team.tag_owner(j)
    if pi == pj:
        raise ValueError(f"edge {edge} connects two tags on robot {pi}")
    return float(np.linalg.norm(tag_position(x, team, i) - tag_position(x, team, j)))


def predict_all(x: FormationState, team: TeamConfig, graph: RangeGraph) -> np.ndarray:
    """Stacked ranges over the graph's (sorted) edge order."""
    if graph.n_edges == 0:
        return np.zeros(0)
    idx = _edge_index(team, graph)
    pos, _ = _tag_world(x, idx)
    diff = pos[idx.edge_i] - pos[idx.edge_j]
    return np.sqrt(np.einsum("ei,ei->e", diff, diff))


def jacobian(x: FormationState, team: TeamConfig, graph: RangeGraph) -> np.ndarray:
    """(E, 3(N-1)) Jacobian of predict_all wrt the oplus perturbation at zero."""
    idx = _edge_index(team, graph)
    e = graph.n_edges
    H = np.zeros((e, idx.n_cols))
    if e == 0:
        return H
    pos, C = _tag_world(x, idx)
    # rotation derivative of every tag position: C_p (S a), (T,2)
    lever = np.einsum("tij,tj->ti", C[idx.tag_robot], idx.tag_perp)

    diff = pos[idx.edge_i] - pos[idx.edge_j]
    rng = np.sqrt(np.einsum("ei,ei->e", diff, diff))
    bad = rng < DEGENERATE_RANGE
    if np.any(bad):
        k = int(np.argmax(bad))
        raise ValueError(
            f"singular geometry: edge {graph.edges[k]} has near-zero range {rng[k]:.3g}")
    unit = diff / rng[:, None]

    rows = np.arange(e)
    for endpoint, sign in ((0, 1.0), (1, -1.0)):
        mask = idx.state_i if endpoint == 0 else idx.state_j
        tags = (idx.edge_i if endpoint == 0 else idx.edge_j)[mask]
        robots = (idx.robot_i if endpoint == 0 else idx.robot_j)[mask]
        cols = (idx.col_i if endpoint == 0 else idx.col_j)[mask]
        u = unit[mask]
        # phi column: unit . (C S a); rho columns: unit^T C
        H[rows[mask], cols] += sign * np.einsum("ei,ei->e", u, lever[tags])
        rho_cols = sign * np.einsum("ei,eij->ej", u, C[robots])
        H[rows[mask], cols + 1] += rho_cols[:, 0]
        H[rows[mask], cols + 2] += rho_cols[:, 1]
    return H


def fisher(x: FormationState, team: TeamConfig, graph: RangeGraph) -> np.ndarray:
    """Fisher information H^T R^{-1} H with R = diag(sigma_ij^2)."""
    if graph.n_edges == 0:
        return np.zeros((x.dim, x.dim))
    idx = _edge_index(team, graph)
    H = jacobian(x, team, graph)
    Hw = H / idx.sigma[:, None]
    F = Hw.T @ Hw
    return 0.5 * (F + F.T)
