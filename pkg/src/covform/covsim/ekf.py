"""Error-state EKF-SLAM over global robot poses and static landmarks.

State: N robot poses (heading + position, right-perturbation error states
ordered [phi, x, y] per robot) followed by L landmark positions. The
measurement rows reuse the closed-form range Jacobian of the planning
modules, lifted to the global frame where robot 1 is a state like any
other; GPS anchors robot 1.

Landmarks enter by delayed initialization: ranges buffer until a
trilateration over sufficiently spread tag positions is well conditioned,
then the solution and its (inflated) normal-equation covariance are
inserted into the state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from covform.se2 import _V, rot2
from covform.team import RangeGraph, TeamConfig

RANGE_GATE_1DOF = 13.8   # chi-square, 99.98%
GPS_GATE_2DOF = 18.4
MIN_BASELINE = 0.5       # m of tag spread before trilateration is attempted
MIN_PLANAR_SPREAD = 0.08  # m of spread off the principal line (tag offsets suffice)
MIRROR_COST_RATIO = 0.8  # accept only if the fit clearly beats its mirror image
MAX_TRILAT_COND = 1e6
INIT_COV_INFLATION = 10.0
_BUFFER_CAP = 80
_BUFFER_NOVELTY = 0.05   # m; points closer than this to a buffered one are skipped
_UNINIT_PRIOR = 1e6


def _rot_many(ang: np.ndarray) -> np.ndarray:
    c, s = np.cos(ang), np.sin(ang)
    out = np.empty((ang.shape[0], 2, 2))
    out[:, 0, 0] = c
    out[:, 0, 1] = -s
    out[:, 1, 0] = s
    out[:, 1, 1] = c
    return out


@dataclass
class EkfModel:
    """Precomputed index arrays for one (team, graph, landmark count) setup."""

    n_robots: int
    n_landmarks: int
    tag_robot: np.ndarray    # (T,) 0-based owner per tag
    tag_offset: np.ndarray   # (T,2)
    tag_perp: np.ndarray     # (T,2) S @ offset
    edge_i: np.ndarray       # (E,) flat tag indices of the robot-robot graph
    edge_j: np.ndarray
    robot_i: np.ndarray
    robot_j: np.ndarray
    sigma: np.ndarray        # (E,)

    @property
    def dim(self) -> int:
        return 3 * self.n_robots + 2 * self.n_landmarks

    def lm_col(self, lm: int) -> int:
        return 3 * self.n_robots + 2 * lm

    @classmethod
    def build(cls, team: TeamConfig, graph: RangeGraph, n_landmarks: int) -> "EkfModel":
        t = team.n_tags
        tag_robot = np.empty(t, dtype=np.intp)
        tag_offset = np.empty((t, 2))
        for tag in range(1, t + 1):
            robot, local = team.tag_owner(tag)
            tag_robot[tag - 1] = robot - 1
            tag_offset[tag - 1] = team.robots[robot - 1].tag_offsets[local]
        tag_perp = np.stack([-tag_offset[:, 1], tag_offset[:, 0]], axis=1)
        e = graph.n_edges
        edge_i = np.array([i - 1 for i, _ in graph.edges], dtype=np.intp)
        edge_j = np.array([j - 1 for _, j in graph.edges], dtype=np.intp)
        return cls(
            n_robots=team.n_robots, n_landmarks=n_landmarks,
            tag_robot=tag_robot, tag_offset=tag_offset, tag_perp=tag_perp,
            edge_i=edge_i, edge_j=edge_j,
            robot_i=tag_robot[edge_i], robot_j=tag_robot[edge_j],
            sigma=np.asarray(graph.sigmas, dtype=np.float64),
        )


@dataclass
class EkfState:
    """Filter mean and covariance; copied on every predict/update."""

    ang: np.ndarray          # (N,)
    pos: np.ndarray          # (N,2)
    landmarks: np.ndarray    # (L,2), meaningless until initialized
    initialized: np.ndarray  # (L,) bool
    P: np.ndarray

    def copy(self) -> "EkfState":
        return EkfState(self.ang.copy(), self.pos.copy(), self.landmarks.copy(),
                        self.initialized.copy(), self.P.copy())

    @classmethod
    def create(cls, model: EkfModel, ang: np.ndarray, pos: np.ndarray,
               att_sigma: float, pos_sigma: float) -> "EkfState":
        n, L = model.n_robots, model.n_landmarks
        P = np.zeros((model.dim, model.dim))
        block = np.diag([att_sigma ** 2, pos_sigma ** 2, pos_sigma ** 2])
        for p in range(n):
            P[3 * p:3 * p + 3, 3 * p:3 * p + 3] = block
        for l in range(L):
            c = model.lm_col(l)
            P[c:c + 2, c:c + 2] = np.eye(2) * _UNINIT_PRIOR
        return cls(np.asarray(ang, dtype=np.float64).copy(),
                   np.asarray(pos, dtype=np.float64).copy(),
                   np.zeros((L, 2)), np.zeros(L, dtype=bool), P)

    def tag_positions(self, model: EkfModel) -> np.ndarray:
        C = _rot_many(self.ang)
        return (np.einsum("tij,tj->ti", C[model.tag_robot], model.tag_offset)
                + self.pos[model.tag_robot])


def ekf_predict(state: EkfState, model: EkfModel, u: np.ndarray,
                vel_cov: np.ndarray, dt: float) -> EkfState:
    """Propagate every robot by T <- T exp(dt u); landmarks are static.

    The error-state transition per robot is Ad(exp(-dt u)); process noise
    enters as dt^2 * vel_cov on the robot's own block.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    out = state.copy()
    P = out.P
    for p in range(model.n_robots):
        phi = dt * u[p, 0]
        t = _V(phi) @ (dt * u[p, 1:])
        Cp = rot2(out.ang[p])
        out.ang[p] += phi
        out.pos[p] += Cp @ t
        # F = Ad(exp(-dt u)) under the [phi, rho] ordering
        Cinv = rot2(-phi)
        rinv = -(Cinv @ t)
        F = np.eye(3)
        F[1, 0] = rinv[1]
        F[2, 0] = -rinv[0]
        F[1:, 1:] = Cinv
        b = slice(3 * p, 3 * p + 3)
        P[b, :] = F @ P[b, :]
        P[:, b] = P[:, b] @ F.T
        P[b, b] += (dt * dt) * vel_cov
    return out


def _retract(state: EkfState, model: EkfModel, delta: np.ndarray) -> None:
    """Apply an error-state correction: poses by right exp, landmarks additively."""
    n = model.n_robots
    for p in range(n):
        d = delta[3 * p:3 * p + 3]
        Cp = rot2(state.ang[p])
        state.ang[p] += d[0]
        state.pos[p] += Cp @ (_V(d[0]) @ d[1:])
    for l in range(model.n_landmarks):
        c = model.lm_col(l)
        state.landmarks[l] += delta[c:c + 2]


def _joseph_update(state: EkfState, model: EkfModel, H: np.ndarray,
                   nu: np.ndarray, sigmas: np.ndarray) -> EkfState:
    out = state.copy()
    P = out.P
    R = np.diag(sigmas ** 2)
    PHt = P @ H.T
    S = H @ PHt + R
    K = np.linalg.solve(S.T, PHt.T).T
    A = np.eye(model.dim) - K @ H
    out.P = A @ P @ A.T + K @ R @ K.T
    out.P = 0.5 * (out.P + out.P.T)
    _retract(out, model, K @ nu)
    return out


def _range_row(state: EkfState, model: EkfModel, tagpos: np.ndarray, lever: np.ndarray,
               C: np.ndarray, tag: int, lm: int | None, other_tag: int | None) -> tuple[np.ndarray, float] | None:
    """One measurement row: tag-to-tag (other_tag) or tag-to-landmark (lm)."""
    pi = tagpos[tag]
    pj = state.landmarks[lm] if lm is not None else tagpos[other_tag]
    diff = pi - pj
    rng = float(np.hypot(diff[0], diff[1]))
    if rng < 1e-9:
        return None
    unit = diff / rng
    h = np.zeros(model.dim)
    ri = model.tag_robot[tag]
    h[3 * ri] = unit @ lever[tag]
    h[3 * ri + 1:3 * ri + 3] = unit @ C[ri]
    if lm is not None:
        c = model.lm_col(lm)
        h[c:c + 2] = -unit
    else:
        rj = model.tag_robot[other_tag]
        h[3 * rj] -= unit @ lever[other_tag]
        h[3 * rj + 1:3 * rj + 3] -= unit @ C[rj]
    return h, rng


def _measurement_rows(state: EkfState, model: EkfModel, rr_idx: np.ndarray,
                      lm_edges: list[tuple[int, int]]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack the selected robot-robot rows plus the given (tag, landmark) rows.

    Returns (H, predicted ranges, validity mask); rows with a degenerate
    predicted range are flagged invalid instead of raising.
    """
    C = _rot_many(state.ang)
    tagpos = state.tag_positions(model)
    lever = np.einsum("tij,tj->ti", C[model.tag_robot], model.tag_perp)

    e = rr_idx.shape[0]
    ti, tj = model.edge_i[rr_idx], model.edge_j[rr_idx]
    diff = tagpos[ti] - tagpos[tj]
    rng = np.sqrt(np.einsum("ei,ei->e", diff, diff))
    ok = rng > 1e-9
    unit = np.where(ok[:, None], diff / np.where(ok, rng, 1.0)[:, None], 0.0)

    n_lm = len(lm_edges)
    H = np.zeros((e + n_lm, model.dim))
    zhat = np.zeros(e + n_lm)
    valid = np.ones(e + n_lm, dtype=bool)
    zhat[:e] = rng
    valid[:e] = ok
    rows = np.arange(e)
    for robots, tags, sign in ((model.robot_i[rr_idx], ti, 1.0),
                               (model.robot_j[rr_idx], tj, -1.0)):
        H[rows, 3 * robots] += sign * np.einsum("ei,ei->e", unit, lever[tags])
        rho = sign * np.einsum("ei,eij->ej", unit, C[robots])
        H[rows, 3 * robots + 1] += rho[:, 0]
        H[rows, 3 * robots + 2] += rho[:, 1]

    for k, (tag, lm) in enumerate(lm_edges):
        row = _range_row(state, model, tagpos, lever, C, tag, lm, None)
        if row is None:
            valid[e + k] = False
            continue
        H[e + k] = row[0]
        zhat[e + k] = row[1]
    return H, zhat, valid


def ekf_update_ranges(state: EkfState, model: EkfModel, rr_idx: np.ndarray,
                      z_rr: np.ndarray, lm_edges: list[tuple[int, int]], z_lm: np.ndarray,
                      lm_sigma: float, gate: float = RANGE_GATE_1DOF) -> tuple[EkfState, int]:
    """Joint update over selected robot-robot edges plus landmark rows.

    rr_idx indexes into the model's edge arrays. Rows whose normalized
    innovation squared exceeds the gate are dropped and counted. Returns
    (new state, number rejected).
    """
    rr_idx = np.asarray(rr_idx, dtype=np.intp)
    H, zhat, valid = _measurement_rows(state, model, rr_idx, lm_edges)
    z = np.concatenate([z_rr, z_lm])
    sigmas = np.concatenate([model.sigma[rr_idx], np.full(len(lm_edges), lm_sigma)])
    nu = z - zhat

    # per-row gate on the marginal innovation variance
    Pd = state.P
    S_diag = np.einsum("ij,jk,ik->i", H, Pd, H) + sigmas ** 2
    nis = nu * nu / S_diag
    keep = valid & (nis <= gate)
    n_rejected = int(np.sum(valid & ~keep))
    if not np.any(keep):
        return state.copy(), n_rejected
    new = _joseph_update(state, model, H[keep], nu[keep], sigmas[keep])
    return new, n_rejected


def ekf_update_range(state: EkfState, model: EkfModel, edge: tuple[int, int],
                     measured: float, sigma: float,
                     gate: float = RANGE_GATE_1DOF) -> tuple[EkfState, bool]:
    """Single tag-to-tag range update (tags are 1-based global ids)."""
    C = _rot_many(state.ang)
    tagpos = state.tag_positions(model)
    lever = np.einsum("tij,tj->ti", C[model.tag_robot], model.tag_perp)
    row = _range_row(state, model, tagpos, lever, C, edge[0] - 1, None, edge[1] - 1)
    if row is None:
        raise ValueError(f"edge {edge} has degenerate predicted range")
    h, zhat = row
    nu = measured - zhat
    S = float(h @ state.P @ h) + sigma ** 2
    if nu * nu / S > gate:
        return state.copy(), False
    new = _joseph_update(state, model, h[None, :], np.array([nu]), np.array([sigma]))
    return new, True


def ekf_update_gps(state: EkfState, model: EkfModel, measured: np.ndarray,
                   sigma: float, gate: float = GPS_GATE_2DOF) -> tuple[EkfState, bool]:
    """Position fix on robot 1; gated on the joint 2-dof innovation."""
    H = np.zeros((2, model.dim))
    H[:, 1:3] = rot2(state.ang[0])
    nu = np.asarray(measured, dtype=np.float64) - state.pos[0]
    S = H @ state.P @ H.T + np.eye(2) * sigma ** 2
    if float(nu @ np.linalg.solve(S, nu)) > gate:
        return state.copy(), False
    new = _joseph_update(state, model, H, nu, np.array([sigma, sigma]))
    return new, True


def _gauss_newton(points: np.ndarray, ranges: np.ndarray, start: np.ndarray,
                  iters: int = 15) -> tuple[np.ndarray, float]:
    """Refine a trilateration guess; returns (solution, sum squared residual)."""
    sol = start.copy()
    for _ in range(iters):
        diff = sol - points
        dists = np.maximum(np.linalg.norm(diff, axis=1), 1e-12)
        resid = dists - ranges
        J = diff / dists[:, None]
        try:
            step = np.linalg.solve(J.T @ J, J.T @ resid)
        except np.linalg.LinAlgError:
            break
        sol = sol - step
        if np.linalg.norm(step) < 1e-12:
            break
    dists = np.maximum(np.linalg.norm(sol - points, axis=1), 1e-12)
    return sol, float(np.sum((dists - ranges) ** 2))


def trilaterate(points: np.ndarray, ranges: np.ndarray,
                iters: int = 15) -> tuple[np.ndarray, np.ndarray, float]:
    """Nonlinear least-squares point from ranges to known positions.

    Linear closed-form start, Gauss-Newton refinement. Returns (solution,
    normal-matrix inverse, condition number of the normal matrix).
    """
    points = np.asarray(points, dtype=np.float64)
    ranges = np.asarray(ranges, dtype=np.float64)
    p0, d0 = points[0], ranges[0]
    A = 2.0 * (points[1:] - p0)
    b = (np.einsum("ij,ij->i", points[1:], points[1:]) - p0 @ p0
         - ranges[1:] ** 2 + d0 ** 2)
    start, *_ = np.linalg.lstsq(A, b, rcond=None)
    sol, _ = _gauss_newton(points, ranges, start, iters)
    diff = sol - points
    dists = np.maximum(np.linalg.norm(diff, axis=1), 1e-12)
    J = diff / dists[:, None]
    JtJ = J.T @ J
    cond = float(np.linalg.cond(JtJ))
    cov = np.linalg.pinv(JtJ)
    return sol, cov, cond


@dataclass
class LandmarkBuffer:
    """Ranges collected for one landmark before it can be trilaterated.

    Points closer than the novelty spacing to an existing entry are
    dropped so the buffer spans the whole fly-by instead of its first
    fraction of a second.
    """

    points: list[np.ndarray] = field(default_factory=list)
    ranges: list[float] = field(default_factory=list)

    def add(self, tag_pos_estimate: np.ndarray, rng: float) -> None:
        if len(self.points) >= _BUFFER_CAP:
            return
        p = np.asarray(tag_pos_estimate, dtype=np.float64)
        for q in self.points:
            if np.hypot(p[0] - q[0], p[1] - q[1]) < _BUFFER_NOVELTY:
                return
        self.points.append(p.copy())
        self.ranges.append(float(rng))

    def spread(self) -> float:
        """Largest pairwise distance among buffered points."""
        if len(self.points) < 2:
            return 0.0
        pts = np.asarray(self.points)
        d = np.linalg.norm(pts[:, None] - pts[None, :], axis=-1)
        return float(d.max())

    def planar_spread(self) -> float:
        """Point spread off the principal line (smallest principal std)."""
        if len(self.points) < 3:
            return 0.0
        pts = np.asarray(self.points)
        centered = pts - pts.mean(axis=0)
        sv = np.linalg.svd(centered, compute_uv=False)
        return float(sv[-1] / np.sqrt(len(self.points)))

    def principal_reflection(self, sol: np.ndarray) -> np.ndarray:
        """Mirror a point across the best-fit line through the buffer."""
        pts = np.asarray(self.points)
        c = pts.mean(axis=0)
        _, _, vt = np.linalg.svd(pts - c, full_matrices=False)
        v = vt[0]
        R = 2.0 * np.outer(v, v) - np.eye(2)
        return c + R @ (sol - c)


def landmark_init(state: EkfState, model: EkfModel, lm: int,
                  buffer: LandmarkBuffer, sigma: float) -> tuple[EkfState, bool]:
    """Try delayed initialization from buffered (tag position, range) pairs.

    Requires at least 3 entries spanning a baseline over MIN_BASELINE with
    genuine 2D spread, a well-conditioned trilateration, and a clear win
    over the mirror-image solution (ranges from near-collinear points
    admit a reflected fit); otherwise the buffer keeps growing.
    """
    if state.initialized[lm]:
        raise ValueError(f"landmark {lm} already initialized")
    if (len(buffer.points) < 3 or buffer.spread() <= MIN_BASELINE
            or buffer.planar_spread() < MIN_PLANAR_SPREAD):
        return state, False
    points = np.asarray(buffer.points)
    ranges = np.asarray(buffer.ranges)
    sol, cov, cond = trilaterate(points, ranges)
    if cond > MAX_TRILAT_COND or not np.all(np.isfinite(sol)):
        return state, False
    _, cost = _gauss_newton(points, ranges, sol)
    mirror, mirror_cost = _gauss_newton(points, ranges, buffer.principal_reflection(sol))
    if np.linalg.norm(mirror - sol) > 0.05 and cost > MIRROR_COST_RATIO * mirror_cost:
        return state, False  # ambiguous: the reflected fit is competitive
    out = state.copy()
    out.landmarks[lm] = sol
    out.initialized[lm] = True
    c = model.lm_col(lm)
    out.P[c:c + 2, :] = 0.0
    out.P[:, c:c + 2] = 0.0
    out.P[c:c + 2, c:c + 2] = INIT_COV_INFLATION * sigma ** 2 * cov
    return out, True
