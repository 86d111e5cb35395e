"""Coverage-run simulation: ground truth, measurement replay, metrics.

Two phases per trial. The truth phase integrates the fleet at 100 Hz
under the leader-follower controller, injecting velocity noise, and logs
poses plus the clean commands. The filter phase replays the log: predicts
on the clean commands, samples range/GPS measurements from the true
geometry at their own rates, and feeds the EKF. Metrics compare relative
poses and landmark estimates against the logged truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from covform.covsim.config import SimConfig, SimMetrics
from covform.covsim.control import control_step
from covform.covsim.ekf import (
    EkfModel,
    EkfState,
    LandmarkBuffer,
    _retract,
    ekf_predict,
    ekf_update_gps,
    ekf_update_ranges,
    landmark_init,
)
from covform.covsim.waypoints import footprint_center, formation_sweep_width, generate_waypoints
from covform.se2 import FormationState, _V, rot2, wrap_angle
from covform.team import RangeGraph, TeamConfig


@dataclass
class TruthLog:
    """Ground-truth trajectory and the commands that produced it."""

    t: np.ndarray        # (K+1,)
    ang: np.ndarray      # (K+1, N)
    pos: np.ndarray      # (K+1, N, 2)
    u_cmd: np.ndarray    # (K, N, 3) clean commanded twists
    coverage_time: float
    completed: bool
    waypoints: np.ndarray

    @property
    def n_steps(self) -> int:
        return self.u_cmd.shape[0]


def _integrate(ang: np.ndarray, pos: np.ndarray, u: np.ndarray, dt: float) -> None:
    """In-place pose integration T <- T exp(dt u) for every robot."""
    for p in range(ang.shape[0]):
        phi = dt * u[p, 0]
        t = _V(phi) @ (dt * u[p, 1:])
        pos[p] += rot2(ang[p]) @ t
        ang[p] += phi


def simulate_truth(team: TeamConfig, x_des: FormationState, waypoints: np.ndarray,
                   config: SimConfig, rng: np.random.Generator) -> TruthLog:
    """Fly the formation through the waypoint list with noisy kinematics.

    The leader advances to the next corner only when it is inside the
    waypoint tolerance and the fleet is in formation. Returns the log,
    flagged incomplete if max_sim_time runs out first.
    """
    n = team.n_robots
    dt = config.dt_truth
    max_steps = int(np.ceil(config.max_sim_time / dt))
    noise_std = config.noise_scale * np.array(
        [config.vel_noise_omega, config.vel_noise_v, config.vel_noise_v])

    ang = np.zeros(n)
    pos = np.vstack([np.zeros((1, 2)), x_des.r.copy()])  # start in formation at origin

    angs = [ang.copy()]
    poss = [pos.copy()]
    cmds = []
    wp_idx = 0
    coverage_time = np.nan
    completed = False

    for k in range(max_steps):
        u, ferr = control_step(waypoints[wp_idx], ang, pos, x_des, config.gains)
        if (np.linalg.norm(pos[0] - waypoints[wp_idx]) < config.waypoint_tolerance
                and ferr < config.formation_gate):
            wp_idx += 1
            if wp_idx == len(waypoints):
                coverage_time = k * dt
                completed = True
                break
            u, ferr = control_step(waypoints[wp_idx], ang, pos, x_des, config.gains)
        noisy = u + noise_std * rng.standard_normal(u.shape)
        _integrate(ang, pos, noisy, dt)
        cmds.append(u)
        angs.append(ang.copy())
        poss.append(pos.copy())

    K = len(cmds)
    return TruthLog(
        t=np.arange(K + 1) * dt,
        ang=np.asarray(angs), pos=np.asarray(poss),
        u_cmd=np.asarray(cmds).reshape(K, n, 3),
        coverage_time=coverage_time, completed=completed,
        waypoints=waypoints,
    )


def _event_counts(n_steps: int, dt: float, rate: float) -> np.ndarray:
    """How many rate-clock events land on each truth step (quantized)."""
    counts = np.zeros(n_steps + 1, dtype=int)
    total = int(np.floor(n_steps * dt * rate))
    steps = np.clip(np.rint(np.arange(1, total + 1) / rate / dt).astype(int), 1, n_steps)
    np.add.at(counts, steps, 1)
    return counts


def leader_waypoints(x_des: FormationState, team: TeamConfig,
                     config: SimConfig) -> np.ndarray:
    """Corner list for the leader: sweep corners shifted so the camera
    footprint (not the leader) rides the sweep lines."""
    width = config.area[0]
    sweep = min(formation_sweep_width(x_des, team), width)
    corners = generate_waypoints(config.area, sweep)
    return corners - footprint_center(x_des, team)


@dataclass
class TrialArtifacts:
    """Everything run_coverage_sim measured, for dumps and debugging."""

    metrics: SimMetrics
    truth: TruthLog
    est_ang: np.ndarray        # (K+1, N)
    est_pos: np.ndarray        # (K+1, N, 2)
    lm_est: np.ndarray         # (K+1, L, 2)
    lm_sigma: np.ndarray       # (K+1, L, 2) marginal std devs
    lm_initialized: np.ndarray  # (K+1, L) bool


def run_coverage_sim(team: TeamConfig, graph: RangeGraph, x_des: FormationState,
                     config: SimConfig, keep_artifacts: bool = False) -> SimMetrics | TrialArtifacts:
    """One full trial: truth, EKF replay, metrics.

    Deterministic in config.seed; truth noise, measurement noise and the
    initial estimate perturbation use independent child streams.
    """
    ss = np.random.SeedSequence(config.seed)
    truth_rng, meas_rng, init_rng = (np.random.default_rng(s) for s in ss.spawn(3))

    waypoints = leader_waypoints(x_des, team, config)
    truth = simulate_truth(team, x_des, waypoints, config, truth_rng)
    n, L = team.n_robots, len(config.landmark_positions)
    lm_true = np.asarray(config.landmark_positions, dtype=np.float64)
    K = truth.n_steps
    dt = config.dt_truth

    model = EkfModel.build(team, graph, L)
    state = EkfState.create(model, truth.ang[0], truth.pos[0],
                            att_sigma=config.init_att_sigma * config.noise_scale,
                            pos_sigma=config.init_pos_sigma * config.noise_scale)
    if config.noise_scale > 0:
        delta = np.zeros(model.dim)
        for p in range(n):
            delta[3 * p] = config.init_att_sigma * config.noise_scale * init_rng.standard_normal()
            delta[3 * p + 1:3 * p + 3] = (config.init_pos_sigma * config.noise_scale
                                          * init_rng.standard_normal(2))
        _retract(state, model, delta)

    vel_cov = np.diag([config.vel_noise_omega ** 2,
                       config.vel_noise_v ** 2, config.vel_noise_v ** 2])
    range_events = _event_counts(K, dt, config.range_rate)
    gps_events = _event_counts(K, dt, config.gps_rate)
    buffers = [LandmarkBuffer() for _ in range(L)]
    robot_tags = [team.tags_of(p) for p in range(1, n + 1)]

    # UWB ranging is time-division multiplexed: each range event measures
    # one pair, cycling over the inter-robot graph and whatever landmark
    # pairs are currently inside the detection radius.
    slots: list[tuple] = [("rr", e) for e in range(graph.n_edges)]
    for l in range(L):
        for p in range(n):
            for tag in robot_tags[p]:
                slots.append(("lm", tag - 1, l, p))
    cursor = 0

    att_err = np.zeros((K + 1, n - 1))
    pos_err = np.zeros((K + 1, n - 1))
    lm_err = np.full((K + 1, L), np.nan)
    lm_contained = np.zeros((K + 1, L), dtype=bool)
    n_rejected = 0

    est_ang = np.zeros((K + 1, n))
    est_pos = np.zeros((K + 1, n, 2))
    lm_est = np.full((K + 1, L, 2), np.nan)
    lm_sig = np.full((K + 1, L, 2), np.nan)
    lm_init_log = np.zeros((K + 1, L), dtype=bool)

    def true_tag_positions(k: int) -> np.ndarray:
        C = np.empty((n, 2, 2))
        for p in range(n):
            C[p] = rot2(truth.ang[k, p])
        return (np.einsum("tij,tj->ti", C[model.tag_robot], model.tag_offset)
                + truth.pos[k][model.tag_robot])

    def record(k: int) -> None:
        d_ang_est = state.ang[1:] - state.ang[0]
        d_ang_true = truth.ang[k, 1:] - truth.ang[k, 0]
        att_err[k] = np.abs([wrap_angle(a) for a in (d_ang_est - d_ang_true)])
        C1e = rot2(state.ang[0])
        C1t = rot2(truth.ang[k, 0])
        rel_est = (state.pos[1:] - state.pos[0]) @ C1e
        rel_true = (truth.pos[k, 1:] - truth.pos[k, 0]) @ C1t
        pos_err[k] = np.linalg.norm(rel_est - rel_true, axis=1)
        for l in range(L):
            if state.initialized[l]:
                e = state.landmarks[l] - lm_true[l]
                lm_err[k, l] = np.linalg.norm(e)
                c = model.lm_col(l)
                sig = np.sqrt(np.maximum(np.diag(state.P[c:c + 2, c:c + 2]), 0.0))
                lm_contained[k, l] = bool(np.all(np.abs(e) <= 3.0 * sig))
                lm_est[k, l] = state.landmarks[l]
                lm_sig[k, l] = sig
        lm_init_log[k] = state.initialized
        est_ang[k] = state.ang
        est_pos[k] = state.pos

    record(0)
    for k in range(1, K + 1):
        state = ekf_predict(state, model, truth.u_cmd[k - 1], vel_cov, dt)

        for _ in range(range_events[k]):
            slot = None
            for _probe in range(len(slots)):
                cand = slots[cursor]
                cursor = (cursor + 1) % len(slots)
                if cand[0] == "rr":
                    slot = cand
                    break
                _, _, l, p = cand
                if (np.linalg.norm(truth.pos[k, p] - lm_true[l])
                        <= config.landmark_detection_radius):
                    slot = cand
                    break
            if slot is None:
                continue  # nothing in range this tick
            tag_true = true_tag_positions(k)
            if slot[0] == "rr":
                e = slot[1]
                z = float(np.linalg.norm(tag_true[model.edge_i[e]] - tag_true[model.edge_j[e]]))
                z += config.noise_scale * float(meas_rng.standard_normal()) * float(model.sigma[e])
                state, rej = ekf_update_ranges(state, model, np.array([e]), np.array([z]),
                                               [], np.zeros(0), config.range_sigma)
                n_rejected += rej
            else:
                _, tag0, l, p = slot
                z = float(np.linalg.norm(tag_true[tag0] - lm_true[l]))
                z += config.noise_scale * float(meas_rng.standard_normal()) * config.range_sigma
                if state.initialized[l]:
                    state, rej = ekf_update_ranges(state, model, np.zeros(0, dtype=np.intp),
                                                   np.zeros(0), [(tag0, l)], np.array([z]),
                                                   config.range_sigma)
                    n_rejected += rej
                else:
                    buffers[l].add(state.tag_positions(model)[tag0], z)
                    state, _ = landmark_init(state, model, l, buffers[l], config.range_sigma)

        for _ in range(gps_events[k]):
            z = truth.pos[k, 0] + config.noise_scale * meas_rng.standard_normal(2) * config.gps_sigma
            state, ok = ekf_update_gps(state, model, z, config.gps_sigma)
            if not ok:
                n_rejected += 1

        record(k)

    att_rmse = float(np.sqrt(np.mean(att_err ** 2)))
    prmse = float(np.sqrt(np.mean(pos_err ** 2)))
    final_lm = [float(lm_err[K, l]) if state.initialized[l] else float("inf")
                for l in range(L)]
    post_init = ~np.isnan(lm_err)
    contained_frac = (float(np.sum(lm_contained[post_init]) / np.sum(post_init))
                      if np.any(post_init) else 0.0)
    bad = (not np.isfinite(att_rmse) or not np.isfinite(prmse)
           or prmse > config.divergence_threshold
           or any(e > config.divergence_threshold for e in final_lm))
    metrics = SimMetrics(
        coverage_time=float(truth.coverage_time),
        interrobot_att_rmse=att_rmse,
        interrobot_pos_rmse=prmse,
        landmark_errors=final_lm,
        nees_containment=contained_frac,
        completed=truth.completed,
        diverged=bool(bad),
        n_rejected_ranges=n_rejected,
        seed=config.seed,
    )
    if keep_artifacts:
        return TrialArtifacts(metrics, truth, est_ang, est_pos, lm_est, lm_sig, lm_init_log)
    return metrics


def dump_trajectory_csv(path, artifacts: TrialArtifacts, every: int = 5) -> None:
    """Plot-ready CSV: truth and estimated poses plus landmark 3-sigma bands."""
    truth = artifacts.truth
    n = truth.ang.shape[1]
    L = artifacts.lm_est.shape[1]
    cols = ["t"]
    for p in range(1, n + 1):
        cols += [f"true_x{p}", f"true_y{p}", f"true_ang{p}",
                 f"est_x{p}", f"est_y{p}", f"est_ang{p}"]
    for l in range(1, L + 1):
        cols += [f"lm{l}_est_x", f"lm{l}_est_y", f"lm{l}_3sig_x", f"lm{l}_3sig_y"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for k in range(0, truth.ang.shape[0], every):
            row = [truth.t[k]]
            for p in range(n):
                row += [truth.pos[k, p, 0], truth.pos[k, p, 1], truth.ang[k, p],
                        artifacts.est_pos[k, p, 0], artifacts.est_pos[k, p, 1],
                        artifacts.est_ang[k, p]]
            for l in range(L):
                row += [artifacts.lm_est[k, l, 0], artifacts.lm_est[k, l, 1],
                        3.0 * artifacts.lm_sigma[k, l, 0], 3.0 * artifacts.lm_sigma[k, l, 1]]
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")
