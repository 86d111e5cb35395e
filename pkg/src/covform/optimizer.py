"""Momentum gradient descent over the pose manifold with finite-difference gradients.

The update is the classical heavy-ball recursion

    step_t = beta * step_{t-1} - alpha * grad J(x_t),
    x_{t+1} = x_t (+) step_t,

applied through the right-perturbation retraction, terminating once
|step_t| drops below the tolerance. Gradients are central differences
along the 3(N-1) perturbation axes; the objective only needs to be
evaluable, not differentiable in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from covform.costs import SATURATION
from covform.se2 import FormationState, oplus


@dataclass(frozen=True)
class OptimizerConfig:
    alpha: float = 0.001      # learning rate
    beta: float = 0.9         # momentum
    tol: float = 1e-4         # stop when |step| < tol
    max_iters: int = 50_000
    fd_step: float = 1e-6
    restarts: int = 8         # multistart count
    init_box: float = 3.0     # random translations drawn from [-box, box]^2
    min_init_separation: float = 0.5

    def __post_init__(self):
        if self.alpha <= 0 or not 0 <= self.beta < 1 or self.tol <= 0 or self.fd_step <= 0:
            raise ValueError("need alpha > 0, 0 <= beta < 1, tol > 0, fd_step > 0")


@dataclass
class OptimizationTrace:
    """Iteration history plus the final state."""

    iterates: list[tuple[int, float, float]] = field(default_factory=list)  # (iter, cost, |step|)
    final_state: FormationState | None = None
    final_cost: float = np.inf
    converged: bool = False
    message: str = ""

    @property
    def n_iters(self) -> int:
        return len(self.iterates)


def gradient_fd(cost: Callable[[FormationState], float], x: FormationState,
                step: float) -> np.ndarray:
    """Central-difference gradient along each perturbation axis."""
    g = np.empty(x.dim)
    e = np.zeros(x.dim)
    for k in range(x.dim):
        e[k] = step
        hi = cost(oplus(x, e))
        e[k] = -step
        lo = cost(oplus(x, e))
        e[k] = 0.0
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise ValueError(f"cost is not finite at finite-difference probe, coordinate {k}")
        g[k] = (hi - lo) / (2.0 * step)
    return g


def minimize(cost: Callable[[FormationState], float], x0: FormationState,
             cfg: OptimizerConfig = OptimizerConfig()) -> OptimizationTrace:
    """Run momentum descent from one start; returns the trace."""
    trace = OptimizationTrace()
    x = x0
    c = cost(x)
    if not np.isfinite(c):
        raise ValueError("cost is not finite at the initial state")
    step = np.zeros(x.dim)
    for it in range(cfg.max_iters):
        g = gradient_fd(cost, x, cfg.fd_step)
        if it == 0 and c >= SATURATION and np.all(g == 0.0):
            trace.final_state, trace.final_cost = x, c
            trace.message = "started on a saturated cost plateau with zero gradient"
            return trace
        step = cfg.beta * step - cfg.alpha * g
        x = oplus(x, step)
        c = cost(x)
        norm = float(np.linalg.norm(step))
        trace.iterates.append((it, c, norm))
        if norm < cfg.tol:
            trace.converged = True
            break
    trace.final_state = x
    trace.final_cost = c
    if not trace.converged:
        trace.message = f"step norm still {trace.iterates[-1][2]:.3g} after {cfg.max_iters} iters"
    return trace


def random_formation(n_robots: int, rng: np.random.Generator,
                     cfg: OptimizerConfig = OptimizerConfig()) -> FormationState:
    """Random start: uniform headings, translations in the init box.

    States with any pair closer than min_init_separation are resampled so
    no start sits inside the collision barrier.
    """
    m = n_robots - 1
    for _ in range(1000):
        ang = rng.uniform(-np.pi, np.pi, m)
        pos = rng.uniform(-cfg.init_box, cfg.init_box, (m, 2))
        all_pos = np.vstack([np.zeros((1, 2)), pos])
        d = np.linalg.norm(all_pos[:, None] - all_pos[None, :], axis=-1)
        if np.all(d[np.triu_indices(n_robots, 1)] > cfg.min_init_separation):
            C = np.stack([[[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]] for a in ang])
            return FormationState(np.asarray(C), pos)
    raise RuntimeError("could not sample a collision-free start; shrink the team or grow the box")


def minimize_multistart(cost: Callable[[FormationState], float], n_robots: int,
                        cfg: OptimizerConfig = OptimizerConfig(),
                        seed: int = 0) -> OptimizationTrace:
    """Best of cfg.restarts independent seeded runs (by final cost)."""
    best: OptimizationTrace | None = None
    seeds = np.random.SeedSequence(seed).spawn(cfg.restarts)
    for s in seeds:
        x0 = random_formation(n_robots, np.random.default_rng(s), cfg)
        tr = minimize(cost, x0, cfg)
        if best is None or tr.final_cost < best.final_cost:
            best = tr
    assert best is not None
    return best
