"""SE(2) arithmetic and the product-manifold perturbation used everywhere else.

Conventions, fixed once and used consistently by the measurement Jacobians,
the optimizer, and the EKF error states:

* a twist is a plain ndarray ``[phi, rho_x, rho_y]`` (rotation first),
* perturbations act on the right: ``T <- T @ exp(xi)``,
* 2-vectors are plain float64 ndarrays of shape (2,).

Robot 1 is the reference robot; a ``FormationState`` stores the poses of
robots 2..N relative to robot 1 and never stores robot 1's (identity) pose.
"""

from __future__ import annotations

import numpy as np

# Below this rotation angle exp/log switch to their 2nd-order series.
SMALL_ANGLE = 1e-7

# Rotation matrices are re-projected onto SO(2) after this many composes.
RENORMALIZE_EVERY = 100

_S = np.array([[0.0, -1.0], [1.0, 0.0]])  # 90 deg rotation generator


def rot2(phi: float) -> np.ndarray:
    """2x2 rotation matrix for angle phi."""
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, -s], [s, c]])


def wrap_angle(phi: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = np.arctan2(np.sin(phi), np.cos(phi))
    return np.pi if w == -np.pi else float(w)


class Pose2:
    """An SE(2) element: 2x2 rotation matrix ``C`` plus translation ``r``.

    Instances are immutable. ``ops`` counts how many composes produced this
    value; once it passes RENORMALIZE_EVERY the rotation is projected back
    onto SO(2) so determinant drift stays bounded in long simulations.
    """

    __slots__ = ("C", "r", "_ops")

    def __init__(self, C: np.ndarray, r: np.ndarray, ops: int = 0):
        C = np.asarray(C, dtype=np.float64)
        r = np.asarray(r, dtype=np.float64)
        if C.shape != (2, 2) or r.shape != (2,):
            raise ValueError(f"Pose2 needs C (2,2) and r (2,), got {C.shape} and {r.shape}")
        if ops > RENORMALIZE_EVERY:
            C = rot2(np.arctan2(C[1, 0], C[0, 0]))
            ops = 0
        C.flags.writeable = False
        r.flags.writeable = False
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "_ops", ops)

    def __setattr__(self, name, value):
        raise AttributeError("Pose2 is immutable")

    def __reduce__(self):
        return (Pose2, (np.asarray(self.C), np.asarray(self.r), self._ops))

    @classmethod
    def identity(cls) -> "Pose2":
        return cls(np.eye(2), np.zeros(2))

    @classmethod
    def from_angle(cls, phi: float, r=(0.0, 0.0)) -> "Pose2":
        return cls(rot2(phi), np.asarray(r, dtype=np.float64))

    @property
    def angle(self) -> float:
        return float(np.arctan2(self.C[1, 0], self.C[0, 0]))

    def matrix(self) -> np.ndarray:
        """3x3 homogeneous form."""
        T = np.eye(3)
        T[:2, :2] = self.C
        T[:2, 2] = self.r
        return T

    def __repr__(self) -> str:
        return f"Pose2(angle={self.angle:.6g}, r=({self.r[0]:.6g}, {self.r[1]:.6g}))"


def _V(phi: float) -> np.ndarray:
    # V(phi) = (1/phi) [[sin, -(1-cos)], [1-cos, sin]], -> I as phi -> 0.
    # 1-cos is written as 2 sin^2(phi/2) to dodge cancellation at small phi.
    if abs(phi) < SMALL_ANGLE:
        a = 1.0 - phi * phi / 6.0
        b = phi / 2.0
    else:
        a = np.sin(phi) / phi
        h = np.sin(phi / 2.0)
        b = 2.0 * h * h / phi
    return np.array([[a, -b], [b, a]])


def _V_inv(phi: float) -> np.ndarray:
    # phi sin / (2 - 2 cos) reduces to (phi/2) cot(phi/2), stable away from 0
    if abs(phi) < SMALL_ANGLE:
        a = 1.0 - phi * phi / 12.0
        b = phi / 2.0
    else:
        half = phi / 2.0
        a = half * np.cos(half) / np.sin(half)
        b = half
    return np.array([[a, b], [-b, a]])


def exp(xi: np.ndarray) -> Pose2:
    """Closed-form SE(2) exponential of a twist [phi, rho_x, rho_y]."""
    xi = np.asarray(xi, dtype=np.float64)
    if xi.shape != (3,):
        raise ValueError(f"twist must have shape (3,), got {xi.shape}")
    phi = float(xi[0])
    return Pose2(rot2(phi), _V(phi) @ xi[1:])


def log(T: Pose2) -> np.ndarray:
    """Inverse of :func:`exp`; the returned angle lies in (-pi, pi]."""
    phi = T.angle
    rho = _V_inv(phi) @ T.r
    return np.array([phi, rho[0], rho[1]])


def compose(A: Pose2, B: Pose2) -> Pose2:
    """Group product A*B."""
    return Pose2(A.C @ B.C, A.C @ B.r + A.r, ops=A._ops + B._ops + 1)


def inverse(A: Pose2) -> Pose2:
    """Group inverse, compose(A, inverse(A)) = identity."""
    Ct = A.C.T
    return Pose2(Ct.copy(), -(Ct @ A.r), ops=A._ops + 1)


def adjoint(T: Pose2) -> np.ndarray:
    """3x3 adjoint of T under the [phi, rho] twist ordering.

    Satisfies T * exp(xi) = exp(Ad_T xi) * T.
    """
    A = np.eye(3)
    A[1:, 0] = -(_S @ T.r)
    A[1:, 1:] = T.C
    return A


class FormationState:
    """Ordered poses of robots 2..N relative to robot 1.

    Internally stacked as arrays ``C`` (M,2,2) and ``r`` (M,2) with
    M = N-1, which keeps cost evaluations and the finite-difference
    optimizer loop vectorized.
    """

    __slots__ = ("C", "r", "_ops", "_pos")

    def __init__(self, C: np.ndarray, r: np.ndarray, ops: int = 0):
        C = np.asarray(C, dtype=np.float64)
        r = np.asarray(r, dtype=np.float64)
        if C.ndim != 3 or C.shape[1:] != (2, 2) or r.shape != (C.shape[0], 2):
            raise ValueError(f"need C (M,2,2) and r (M,2), got {C.shape} and {r.shape}")
        if ops > RENORMALIZE_EVERY:
            ang = np.arctan2(C[:, 1, 0], C[:, 0, 0])
            C = _rot_many(ang)
            ops = 0
        C.flags.writeable = False
        r.flags.writeable = False
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "_ops", ops)
        object.__setattr__(self, "_pos", None)

    def __setattr__(self, name, value):
        raise AttributeError("FormationState is immutable")

    def __reduce__(self):
        return (FormationState, (np.asarray(self.C), np.asarray(self.r), self._ops))

    @classmethod
    def from_poses(cls, poses: list[Pose2]) -> "FormationState":
        if not poses:
            raise ValueError("a formation needs at least one non-reference robot")
        return cls(np.stack([p.C for p in poses]), np.stack([p.r for p in poses]))

    @classmethod
    def identity(cls, n_robots: int) -> "FormationState":
        m = n_robots - 1
        if m < 1:
            raise ValueError("need at least 2 robots")
        return cls(np.broadcast_to(np.eye(2), (m, 2, 2)).copy(), np.zeros((m, 2)))

    @property
    def n_robots(self) -> int:
        return self.C.shape[0] + 1

    @property
    def dim(self) -> int:
        """Dimension of the flat perturbation vector, 3(N-1)."""
        return 3 * self.C.shape[0]

    def pose(self, robot_id: int) -> Pose2:
        """Pose of a robot relative to robot 1 (robot 1 -> identity)."""
        self._check_id(robot_id)
        if robot_id == 1:
            return Pose2.identity()
        i = robot_id - 2
        return Pose2(self.C[i].copy(), self.r[i].copy())

    def poses(self) -> list[Pose2]:
        return [Pose2(self.C[i].copy(), self.r[i].copy()) for i in range(self.C.shape[0])]

    def positions(self) -> np.ndarray:
        """(N,2) robot origins in robot 1's frame; row 0 is robot 1."""
        if self._pos is None:
            out = np.zeros((self.C.shape[0] + 1, 2))
            out[1:] = self.r
            out.flags.writeable = False
            object.__setattr__(self, "_pos", out)
        return self._pos

    def headings(self) -> np.ndarray:
        """(N,) heading angles; entry 0 is robot 1's zero."""
        return np.concatenate([[0.0], np.arctan2(self.C[:, 1, 0], self.C[:, 0, 0])])

    def _check_id(self, robot_id: int) -> None:
        if not 1 <= robot_id <= self.n_robots:
            raise ValueError(f"unknown robot id {robot_id} (team has {self.n_robots})")

    def __repr__(self) -> str:
        return f"FormationState(n_robots={self.n_robots})"


def _rot_many(phi: np.ndarray) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    out = np.empty((phi.shape[0], 2, 2))
    out[:, 0, 0] = c
    out[:, 0, 1] = -s
    out[:, 1, 0] = s
    out[:, 1, 1] = c
    return out


def _V_many(phi: np.ndarray) -> np.ndarray:
    small = np.abs(phi) < SMALL_ANGLE
    safe = np.where(small, 1.0, phi)
    h = np.sin(safe / 2.0)
    a = np.where(small, 1.0 - phi * phi / 6.0, np.sin(safe) / safe)
    b = np.where(small, phi / 2.0, 2.0 * h * h / safe)
    out = np.empty((phi.shape[0], 2, 2))
    out[:, 0, 0] = a
    out[:, 0, 1] = -b
    out[:, 1, 0] = b
    out[:, 1, 1] = a
    return out


def oplus(x: FormationState, dx: np.ndarray) -> FormationState:
    """Right-perturb every pose: pose_p <- pose_p * exp(dxi_p).

    ``dx`` is flat with length 3(N-1), blocks ordered [phi, rho_x, rho_y]
    per robot, robots in state order.
    """
    dx = np.asarray(dx, dtype=np.float64)
    if dx.shape != (x.dim,):
        raise ValueError(f"perturbation must have shape ({x.dim},), got {dx.shape}")
    d = dx.reshape(-1, 3)
    phi = d[:, 0]
    R = _rot_many(phi)
    t = np.einsum("nij,nj->ni", _V_many(phi), d[:, 1:])
    C_new = np.einsum("nij,njk->nik", x.C, R)
    r_new = x.r + np.einsum("nij,nj->ni", x.C, t)
    return FormationState(C_new, r_new, ops=x._ops + 1)


def relative_position(x: FormationState, p: int, q: int) -> np.ndarray:
    """Position of robot p relative to robot q, resolved in robot 1's frame."""
    x._check_id(p)
    x._check_id(q)
    rp = np.zeros(2) if p == 1 else x.r[p - 2]
    rq = np.zeros(2) if q == 1 else x.r[q - 2]
    return rp - rq
