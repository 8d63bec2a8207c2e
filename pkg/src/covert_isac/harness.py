"""Frame-level simulation: sensing-then-transmit protocol, schemes, sweeps.

Each slot runs predict -> construct predicted warden channels and error
bounds -> optimize (per scheme) -> record metrics against the true channels
-> synthesize the radar measurement and update the EKF -> move the warden.
The optimizer only ever sees the prediction-side context; ground truth enters
through measurement synthesis and metric evaluation.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass

import numpy as np

from .beamforming import SensingLmiData
from .channels import (
    ChannelSet,
    geometry_to_angles,
    los_channel,
    los_mimo_channel,
    sample_rayleigh_channel,
)
from .covertness import (
    detector_error_probabilities,
    kl_divergence,
    lambda_pair,
    worst_case_kl,
)
from .driver import (
    RIS_MODE_FIXED,
    RIS_MODE_SDR,
    RIS_MODE_SROCR,
    AlgorithmConfig,
    SlotProblem,
    covert_sum_rate,
    initialize_solution,
    run_algorithm1,
)
from .results import SlotRecord
from .scenario import ScenarioConfig
from .tracking import (
    EkfBelief,
    WardenState,
    ZeroIlluminationError,
    calibrate_error_bounds,
    ekf_predict,
    ekf_update,
    measurement_function,
    measurement_jacobian,
    measurement_noise_cov,
    posterior_mse,
    synthesize_measurement,
)

SCHEMES = (
    "proposed",
    "baseline1",
    "baseline2",
    "baseline3",
    "baseline4",
    "perfect_csi",
)


@dataclass
class TrialDraw:
    """Per-trial randomness: user placement and small-scale fading."""

    bob_positions: np.ndarray  # (K, 3)
    h_d: np.ndarray  # (K, N_A)
    h_r: np.ndarray  # (K, N_R)


def sample_trial(cfg: ScenarioConfig, rng: np.random.Generator) -> TrialDraw:
    """Users area-uniform in the disc; Rayleigh fading fixed for the frame."""
    center = np.asarray(cfg.bob_center)
    radii = cfg.bob_radius * np.sqrt(rng.uniform(0.0, 1.0, cfg.n_users))
    angles = rng.uniform(0.0, 2.0 * np.pi, cfg.n_users)
    positions = np.stack(
        [
            center[0] + radii * np.cos(angles),
            center[1] + radii * np.sin(angles),
            np.full(cfg.n_users, center[2]),
        ],
        axis=1,
    )
    h_d = np.zeros((cfg.n_users, cfg.n_tx), dtype=complex)
    h_r = np.zeros((cfg.n_users, cfg.n_ris), dtype=complex)
    for k in range(cfg.n_users):
        d_ab = float(np.linalg.norm(positions[k] - np.asarray(cfg.alice_pos)))
        d_rb = float(np.linalg.norm(positions[k] - np.asarray(cfg.ris_pos)))
        gain_d = cfg.rho0_lin * d_ab ** (-cfg.alpha_alice_bob)
        gain_r = cfg.rho0_lin * d_rb ** (-cfg.alpha_ris_bob)
        h_d[k] = sample_rayleigh_channel(rng, gain_d, cfg.n_tx)
        h_r[k] = sample_rayleigh_channel(rng, gain_r, cfg.n_ris)
    return TrialDraw(bob_positions=positions, h_d=h_d, h_r=h_r)


def build_g_matrix(cfg: ScenarioConfig) -> np.ndarray:
    """Deterministic LoS Alice-RIS channel for the fixed geometry."""
    return los_mimo_channel(
        np.asarray(cfg.alice_pos),
        np.asarray(cfg.ris_pos),
        (cfg.n_h, cfg.n_v),
        cfg.ris_shape,
        cfg.rho0_db,
        cfg.alpha_alice_ris,
    )


def warden_channels(
    cfg: ScenarioConfig, position: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """(h_aw, h_rw) LoS channels toward the given warden position."""
    h_aw = los_channel(
        np.asarray(cfg.alice_pos), position, cfg.n_h, cfg.n_v, cfg.rho0_db
    )
    h_rw = los_channel(
        np.asarray(cfg.ris_pos), position, *cfg.ris_shape, cfg.rho0_db
    )
    return h_aw, h_rw


def advance_warden(
    cfg: ScenarioConfig, state: WardenState, rng: np.random.Generator
) -> WardenState:
    """Constant-velocity step, then a random horizontal heading change."""
    new_pos = state.position + cfg.slot_duration_s * state.velocity
    u = rng.uniform(cfg.heading_change_min, cfg.heading_change_max)
    c, s = np.cos(u), np.sin(u)
    vx, vy, vz = state.velocity
    new_vel = np.array([c * vx - s * vy, s * vx + c * vy, vz])
    return WardenState(position=new_pos, velocity=new_vel)


def sensing_noise_scale(cfg: ScenarioConfig, angles) -> np.ndarray:
    """z with Q_Z = diag(z) / (a^H R_s a): illumination-independent part."""
    noise = measurement_noise_cov(
        np.eye(cfg.n_tx, dtype=complex), angles, cfg.radar_params()
    )
    return noise.variances * cfg.n_tx


def algorithm_config(cfg: ScenarioConfig, ris_mode: str) -> AlgorithmConfig:
    return AlgorithmConfig(
        eps_out=cfg.eps_out,
        max_outer=cfg.max_outer,
        eps_in1=cfg.eps_in1,
        eps_in2=cfg.eps_in2,
        max_inner=cfg.max_inner,
        srocr_step0=cfg.srocr_step0,
        rank_tol=cfg.rank_tol,
        feas_tol=cfg.feas_tol,
        rel_gap=cfg.rel_gap,
        solver_max_iter=cfg.solver_max_iter,
        ris_mode=ris_mode,
    )


_RIS_MODES = {
    "proposed": RIS_MODE_SROCR,
    "baseline1": RIS_MODE_FIXED,
    "baseline2": RIS_MODE_SDR,
    "baseline3": RIS_MODE_SROCR,
    "baseline4": RIS_MODE_SROCR,
    "perfect_csi": RIS_MODE_SROCR,
}


@dataclass
class SlotContext:
    """Optimizer-visible inputs of one slot (no ground truth)."""

    problem: SlotProblem
    theta_override: np.ndarray | None
    delta_aw: float
    delta_rw: float
    trace_c_prior: float


def build_slot_context(
    cfg: ScenarioConfig,
    scheme: str,
    trial: TrialDraw,
    g_mat: np.ndarray,
    belief_pred: EkfBelief,
    frozen: tuple[np.ndarray, np.ndarray, float, float] | None,
    true_state: WardenState | None = None,
) -> SlotContext:
    """Assemble the per-slot optimization problem for one scheme.

    Ground truth is consumed ONLY by perfect_csi (the genie bound); all other
    schemes work from the EKF prediction.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    pred_state = WardenState.from_vector(belief_pred.mean)
    h_aw_hat, h_rw_hat = warden_channels(cfg, pred_state.position)
    delta_aw, delta_rw = calibrate_error_bounds(
        belief_pred.covariance, cfg.error_bound_params()
    )

    if scheme == "perfect_csi":
        if true_state is None:
            raise ValueError("perfect_csi requires the true state")
        h_aw_opt, h_rw_opt = warden_channels(cfg, true_state.position)
        d_aw_opt = d_rw_opt = 0.0
    elif scheme == "baseline3":
        h_aw_opt, h_rw_opt = h_aw_hat, h_rw_hat
        d_aw_opt = d_rw_opt = 0.0
    elif scheme == "baseline4" and frozen is not None:
        h_aw_opt, h_rw_opt, d_aw_opt, d_rw_opt = frozen
    else:
        h_aw_opt, h_rw_opt = h_aw_hat, h_rw_hat
        d_aw_opt, d_rw_opt = delta_aw, delta_rw

    channels = ChannelSet(
        h_d=trial.h_d,
        h_r=trial.h_r,
        g_mat=g_mat,
        h_aw_hat=h_aw_opt,
        h_rw_hat=h_rw_opt,
        delta_aw=d_aw_opt,
        delta_rw=d_rw_opt,
    )
    pred_angles = geometry_to_angles(np.asarray(cfg.alice_pos), pred_state.position)
    from .channels import steering_vector

    sensing = SensingLmiData(
        c_pred_inv=np.linalg.inv(belief_pred.covariance),
        jacobian=measurement_jacobian(
            pred_state, np.asarray(cfg.alice_pos), cfg.f_c_hz
        ),
        z_tilde=sensing_noise_scale(cfg, pred_angles),
        steering=steering_vector(
            pred_angles.azimuth, pred_angles.elevation, cfg.n_h, cfg.n_v
        ),
        mse_max=cfg.mse_max,
    )
    problem = SlotProblem(
        channels=channels,
        budget=cfg.covert_budget(),
        sensing=sensing,
        p_max=cfg.p_tx_w,
        sigma_b2=cfg.sigma_b2_w,
        sigma_w2=cfg.sigma_w2_w,
        config=algorithm_config(cfg, _RIS_MODES[scheme]),
    )
    theta_override = np.ones(cfg.n_ris, dtype=complex) if scheme == "baseline1" else None
    return SlotContext(
        problem=problem,
        theta_override=theta_override,
        delta_aw=delta_aw,
        delta_rw=delta_rw,
        trace_c_prior=posterior_mse(belief_pred),
    )


def run_frame(
    cfg: ScenarioConfig, scheme: str, trial_seed: int
) -> list[SlotRecord]:
    """Simulate one frame of the transmission protocol under one scheme."""
    ss = np.random.SeedSequence(entropy=trial_seed)
    (
        rng_channel,
        rng_belief,
        rng_heading,
        rng_meas,
        rng_opt,
        rng_oracle,
    ) = [np.random.default_rng(c) for c in ss.spawn(6)]

    trial = sample_trial(cfg, rng_channel)
    g_mat = build_g_matrix(cfg)
    q_a = np.asarray(cfg.alice_pos)
    radar = cfg.radar_params()
    budget = cfg.covert_budget()
    q_chi = cfg.process_noise()

    true_state = WardenState(
        position=np.asarray(cfg.warden_init_pos, dtype=float),
        velocity=cfg.warden_init_velocity(),
    )
    init_cov = cfg.init_cov()
    init_mean = true_state.as_vector() + np.linalg.cholesky(
        init_cov
    ) @ rng_belief.standard_normal(6)
    belief = EkfBelief(mean=init_mean, covariance=init_cov)

    frozen: tuple | None = None
    records: list[SlotRecord] = []
    for slot in range(1, cfg.n_slots + 1):
        t0 = time.perf_counter()
        belief_pred = ekf_predict(belief, cfg.slot_duration_s, q_chi)
        context = build_slot_context(
            cfg, scheme, trial, g_mat, belief_pred, frozen,
            true_state=true_state if scheme == "perfect_csi" else None,
        )
        if scheme == "baseline4" and frozen is None:
            cs = context.problem.channels
            frozen = (cs.h_aw_hat, cs.h_rw_hat, cs.delta_aw, cs.delta_rw)

        initial = initialize_solution(
            context.problem, rng_opt, theta_override=context.theta_override
        )
        solution = run_algorithm1(context.problem, rng_opt, initial=initial)

        # ---- metrics against ground truth ----
        h_aw_true, h_rw_true = warden_channels(cfg, true_state.position)
        true_channels = dataclasses.replace(
            context.problem.channels, h_aw_hat=h_aw_true, h_rw_hat=h_rw_true
        )
        h_w_true = true_channels.effective_warden_channel(solution.theta)
        pair = lambda_pair(
            h_w_true, solution.w_vecs.T, solution.r_s, cfg.sigma_w2_w
        )
        kl_nom = kl_divergence(pair, cfg.symbols_per_slot)
        p_fa, p_md = detector_error_probabilities(pair, cfg.symbols_per_slot)
        pred_state = WardenState.from_vector(belief_pred.mean)
        h_aw_hat, h_rw_hat = warden_channels(cfg, pred_state.position)
        kl_worst = worst_case_kl(
            h_aw_hat,
            h_rw_hat,
            context.delta_aw,
            context.delta_rw,
            solution.theta,
            g_mat,
            solution.w_vecs.T,
            solution.r_s,
            cfg.sigma_w2_w,
            cfg.symbols_per_slot,
            seed=int(rng_oracle.integers(0, 2**63)),
            n_starts=16,
            n_steps=80,
            n_boundary=2000,
        )

        # ---- sense with the transmitted covariance, update the EKF ----
        pred_angles = geometry_to_angles(q_a, pred_state.position)
        try:
            z = synthesize_measurement(
                true_state, solution.r_s, radar, q_a, cfg.f_c_hz, rng_meas
            )
            noise = measurement_noise_cov(solution.r_s, pred_angles, radar)
            jac = measurement_jacobian(pred_state, q_a, cfg.f_c_hz)
            z_pred = measurement_function(pred_state, q_a, cfg.f_c_hz)
            belief = ekf_update(belief_pred, z, jac, noise, z_pred)
        except ZeroIlluminationError:
            belief = belief_pred

        records.append(
            SlotRecord(
                slot=slot,
                scheme=scheme,
                sum_rate_bps_hz=solution.sum_rate,
                kl_worst=kl_worst,
                kl_nominal=kl_nom,
                trace_c_prior=context.trace_c_prior,
                trace_c_post=posterior_mse(belief),
                delta_aw=context.delta_aw,
                delta_rw=context.delta_rw,
                p_comm_w=solution.comm_power,
                p_sense_w=solution.sense_power,
                p_fa=p_fa,
                p_md=p_md,
                status=solution.status,
                outer_iters=solution.outer_iterations,
                wall_ms=1e3 * (time.perf_counter() - t0),
                solution=solution,
                channels=true_channels,
                h_aw_true=h_aw_true,
                h_rw_true=h_rw_true,
            )
        )
        true_state = advance_warden(cfg, true_state, rng_heading)
    return records


def apply_scheme(
    scheme: str,
    context: SlotContext,
    rng: np.random.Generator,
):
    """Optimize one already-built slot context under the named scheme."""
    initial = initialize_solution(
        context.problem, rng, theta_override=context.theta_override
    )
    return run_algorithm1(context.problem, rng, initial=initial)


def trial_seed_for(master_seed: int, axis_index: int, trial: int) -> int:
    """Deterministic per-trial seed independent of execution partitioning."""
    ss = np.random.SeedSequence(
        entropy=master_seed, spawn_key=(axis_index, trial)
    )
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _frame_summary(args: tuple) -> dict:
    cfg, scheme, seed, threshold = args
    recs = run_frame(cfg, scheme, seed)
    return {
        "rate": float(np.mean([r.sum_rate_bps_hz for r in recs])),
        "violation": float(np.mean([r.kl_worst > threshold for r in recs])),
        "p_comm": float(np.mean([r.p_comm_w for r in recs])),
        "p_sense": float(np.mean([r.p_sense_w for r in recs])),
    }


def run_trial_batch(tasks: list[tuple], workers: int = 1) -> list[dict]:
    """Run (cfg, scheme, seed, threshold) frame tasks, optionally in parallel.

    Results are returned in task order, so aggregation is independent of the
    partitioning.
    """
    if workers <= 1 or len(tasks) <= 1:
        return [_frame_summary(t) for t in tasks]
    import concurrent.futures as cf

    with cf.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_frame_summary, tasks, chunksize=1))


def monte_carlo_sweep(
    cfg_template: ScenarioConfig,
    axis: str,
    values: list,
    trials: int,
    master_seed: int,
    schemes: tuple[str, ...] = ("proposed",),
    workers: int = 1,
) -> list[dict]:
    """Frame-averaged metrics over a parameter sweep.

    axis is one of p_tx_dbm | n_ris | epsilon | mse_max.  Rows hold the
    per-(value, scheme) mean and standard error of the frame-averaged rate,
    the covert-violation fraction, and the mean power split.  Trials use
    deterministically derived seeds, so the aggregates do not depend on the
    worker partitioning.
    """
    field_map = {
        "p_tx_dbm": "p_tx_dbm",
        "n_ris": "n_ris",
        "epsilon": "epsilon",
        "mse_max": "mse_max",
    }
    if axis not in field_map:
        raise ValueError(f"unknown sweep axis {axis!r}")
    if trials < 1:
        raise ValueError("trials must be >= 1")

    # resolve calibration once so worker processes reuse identical vectors
    gamma_aw, gamma_rw = cfg_template.resolve_gammas()
    cfg_template = dataclasses.replace(
        cfg_template, gamma_aw=tuple(gamma_aw), gamma_rw=tuple(gamma_rw)
    )

    tasks, keys = [], []
    for vi, value in enumerate(values):
        overrides = {field_map[axis]: value}
        if axis == "n_ris":
            overrides["ris_shape"] = None
            overrides["gamma_aw"] = None  # RIS-side calibration changes shape
            overrides["gamma_rw"] = None
        cfg = dataclasses.replace(cfg_template, **overrides)
        if axis == "n_ris":
            g_aw, g_rw = cfg.resolve_gammas()
            cfg = dataclasses.replace(
                cfg, gamma_aw=tuple(g_aw), gamma_rw=tuple(g_rw)
            )
        threshold = 2.0 * cfg.epsilon**2 * (1.0 + 1e-3)
        for scheme in schemes:
            for t in range(trials):
                seed = trial_seed_for(master_seed, vi, t)
                tasks.append((cfg, scheme, seed, threshold))
                keys.append((vi, value, scheme))

    summaries = run_trial_batch(tasks, workers=workers)

    rows: list[dict] = []
    for vi, value in enumerate(values):
        for scheme in schemes:
            batch = [
                s
                for k, s in zip(keys, summaries)
                if k[0] == vi and k[2] == scheme
            ]
            rates = [b["rate"] for b in batch]
            rows.append(
                {
                    "axis": axis,
                    "value": value,
                    "scheme": scheme,
                    "trials": trials,
                    "mean_rate": float(np.mean(rates)),
                    "stderr_rate": float(
                        np.std(rates, ddof=1) / np.sqrt(len(rates))
                    )
                    if len(rates) > 1
                    else 0.0,
                    "violation_fraction": float(
                        np.mean([b["violation"] for b in batch])
                    ),
                    "mean_p_comm_w": float(np.mean([b["p_comm"] for b in batch])),
                    "mean_p_sense_w": float(np.mean([b["p_sense"] for b in batch])),
                }
            )
    return rows
