"""Alternating optimization driver for one transmission slot.

Alternates the beamformer/sensing-covariance solve and the RIS phase step
until the lifted sum rate stalls.  Every accepted iterate is feasible for the
robust covertness constraint, so the reported trace is non-decreasing and the
final solution carries its feasibility certificates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beamforming import (
    BeamformingIterate,
    CovertLmiData,
    SensingLmiData,
    covert_lmi_feasible,
    extract_rank_one,
    solve_beamforming_subproblem,
)
from .channels import ChannelSet
from .covertness import CovertBudget
from .ris import (
    LiftedPhase,
    PhaseCovertData,
    PhaseExtractionError,
    build_phi_psi,
    extract_theta,
    gaussian_randomization_candidates,
    lift_theta,
    solve_phase_subproblem,
    srocr_solve,
    trace_form_objective,
)

RIS_MODE_SROCR = "srocr"
RIS_MODE_SDR = "sdr"
RIS_MODE_FIXED = "fixed"


@dataclass
class AlgorithmConfig:
    """Convergence thresholds and solver knobs of the AO loop."""

    eps_out: float = 1e-4
    max_outer: int = 30
    eps_in1: float = 1e-4
    eps_in2: float = 0.999
    max_inner: int = 50
    srocr_step0: float = 0.1
    rank_tol: float = 0.999
    feas_tol: float = 1e-7
    rel_gap: float = 1e-6
    solver_max_iter: int = 200
    ris_mode: str = RIS_MODE_SROCR
    sdr_candidates: int = 100
    rounding_samples: int = 50


@dataclass
class SlotProblem:
    """Everything the optimizer may see for one slot (no ground truth)."""

    channels: ChannelSet
    budget: CovertBudget
    sensing: SensingLmiData | None
    p_max: float
    sigma_b2: float
    sigma_w2: float
    config: AlgorithmConfig = field(default_factory=AlgorithmConfig)

    def covert_data(self, theta: np.ndarray) -> CovertLmiData:
        cs = self.channels
        return CovertLmiData.build(
            theta,
            cs.g_mat,
            cs.h_aw_hat,
            cs.h_rw_hat,
            cs.delta_aw,
            cs.delta_rw,
            self.budget.eta2,
            self.sigma_w2,
        )

    def phase_covert_data(self) -> PhaseCovertData:
        cs = self.channels
        return PhaseCovertData(
            g_mat=cs.g_mat,
            h_aw_hat=cs.h_aw_hat,
            h_rw_hat=cs.h_rw_hat,
            delta_aw=cs.delta_aw,
            delta_rw=cs.delta_rw,
            eta2=self.budget.eta2,
            sigma_w2=self.sigma_w2,
        )


@dataclass
class BeamformingSolution:
    """Final decision variables and diagnostics for one slot."""

    w_vecs: np.ndarray  # (K, N_A) extracted beamformers
    w_mats: list[np.ndarray]
    r_s: np.ndarray
    theta: np.ndarray
    sum_rate: float
    trace: list[float]
    status: str
    outer_iterations: int
    rank_ratios: list[float]

    @property
    def comm_power(self) -> float:
        return float(np.sum(np.abs(self.w_vecs) ** 2))

    @property
    def sense_power(self) -> float:
        return float(np.real(np.trace(self.r_s)))


def covert_sum_rate(
    beams,
    r_s: np.ndarray,
    theta: np.ndarray,
    channels: ChannelSet,
    sigma_b2: float,
) -> float:
    """Sum rate over users, log2(1 + SINR_k) with the effective channels.

    `beams` is either a (K, N_A) array / list of beamforming vectors or a
    list of lifted K x (N_A x N_A) matrices.
    """
    h_eff = channels.effective_user_channels(theta)
    k_users = h_eff.shape[0]
    beams = list(beams)
    lifted = beams[0].ndim == 2
    total = 0.0
    for k in range(k_users):
        h = h_eff[k]
        if lifted:
            powers = [float(np.real(h.conj() @ w @ h)) for w in beams]
        else:
            powers = [float(np.abs(h.conj() @ w) ** 2) for w in beams]
        sense = float(np.real(h.conj() @ r_s @ h))
        interference = sum(powers) - powers[k] + sense + sigma_b2
        total += np.log2(1.0 + powers[k] / interference)
    return float(total)


def _lifted_rate(problem: SlotProblem, iterate: BeamformingIterate,
                 theta: np.ndarray) -> float:
    return covert_sum_rate(
        iterate.w_mats, iterate.r_s, theta, problem.channels, problem.sigma_b2
    )


def initialize_solution(
    problem: SlotProblem,
    rng: np.random.Generator,
    theta_override: np.ndarray | None = None,
) -> tuple[BeamformingIterate, np.ndarray, str]:
    """Feasible starting point: random phases, half-power isotropic sensing,
    MRT beams backed off geometrically until the covertness LMI holds.

    Returns (iterate, theta, status); status "covert_infeasible" or
    "sensing_infeasible" signals the sensing-only fallback.  Schemes with a
    fixed reflection pattern pass theta_override.
    """
    cs = problem.channels
    n_a, n_r = cs.n_tx, cs.n_ris
    k_users = cs.n_users
    if theta_override is not None:
        theta = np.asarray(theta_override, dtype=complex)
    else:
        theta = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, n_r))

    if problem.budget.eta2 <= 1.0:
        # zero covertness budget forces silence; sense at full power
        r_s = problem.p_max / n_a * np.eye(n_a, dtype=complex)
        zero = [np.zeros((n_a, n_a), dtype=complex) for _ in range(k_users)]
        return BeamformingIterate(w_mats=zero, r_s=r_s), theta, "covert_silent"

    r_s = 0.5 * problem.p_max / n_a * np.eye(n_a, dtype=complex)
    if problem.sensing is not None:
        mse = float(np.trace(problem.sensing.posterior_cov(r_s)))
        if mse > problem.sensing.mse_max + 1e-9:
            return (
                BeamformingIterate(
                    w_mats=[np.zeros((n_a, n_a), dtype=complex)] * k_users,
                    r_s=r_s,
                ),
                theta,
                "sensing_infeasible",
            )

    h_eff = cs.effective_user_channels(theta)
    w_mats = []
    for k in range(k_users):
        h = h_eff[k]
        norm = np.linalg.norm(h)
        if norm == 0:
            w_mats.append(np.zeros((n_a, n_a), dtype=complex))
            continue
        w = np.sqrt(0.5 * problem.p_max / k_users) * h / norm
        w_mats.append(np.outer(w, w.conj()))

    covert = problem.covert_data(theta)
    scale = 1.0
    for _ in range(31):
        r_mat = scale * sum(w_mats) - (problem.budget.eta2 - 1.0) * r_s
        if covert_lmi_feasible(covert, r_mat, problem.config.feas_tol):
            scaled = [scale * w for w in w_mats]
            return BeamformingIterate(w_mats=scaled, r_s=r_s), theta, "ok"
        scale *= 0.5
    return (
        BeamformingIterate(
            w_mats=[np.zeros((n_a, n_a), dtype=complex)] * k_users, r_s=r_s
        ),
        theta,
        "covert_infeasible",
    )


def _ris_step(
    problem: SlotProblem,
    iterate: BeamformingIterate,
    theta: np.ndarray,
    rng: np.random.Generator,
) -> tuple[np.ndarray, bool]:
    """One RIS update; returns (theta, srocr_converged_flag)."""
    cfg = problem.config
    cs = problem.channels
    data = build_phi_psi(cs.h_d, cs.h_r, cs.g_mat, iterate.w_mats, iterate.r_s)
    r_mat = sum(iterate.w_mats) - (problem.budget.eta2 - 1.0) * iterate.r_s
    pdata = problem.phase_covert_data()
    current_rate = _lifted_rate(problem, iterate, theta)

    candidates: list[np.ndarray] = []
    converged = True
    if cfg.ris_mode == RIS_MODE_SROCR:
        result = srocr_solve(
            lift_theta(theta), data, pdata, r_mat, problem.sigma_b2,
            step0=cfg.srocr_step0, eps_in1=cfg.eps_in1, eps_in2=cfg.eps_in2,
            max_inner=cfg.max_inner, feas_tol=cfg.feas_tol, rel_gap=cfg.rel_gap,
        )
        converged = result.converged
        try:
            candidates.append(extract_theta(result.lifted))
        except PhaseExtractionError:
            pass
    elif cfg.ris_mode == RIS_MODE_SDR:
        report = solve_phase_subproblem(
            lift_theta(theta), data, pdata, r_mat, problem.sigma_b2,
            srocr_level=None, feas_tol=cfg.feas_tol, rel_gap=cfg.rel_gap,
        )
        if report.status == "optimal":
            v_sdr = np.asarray(report.blocks["v"])
            candidates = gaussian_randomization_candidates(
                v_sdr, cfg.sdr_candidates, rng
            )
            try:
                candidates.append(extract_theta(LiftedPhase(v_sdr)))
            except PhaseExtractionError:
                pass
    else:
        return theta, True

    # rank best-first; accept the first candidate that improves the lifted
    # rate and passes the exact robust-feasibility check
    scored = sorted(
        (
            (trace_form_objective(data, lift_theta(c), problem.sigma_b2), c)
            for c in candidates
        ),
        key=lambda t: -t[0],
    )
    for rate, cand in scored:
        if rate < current_rate - 1e-12:
            break
        if covert_lmi_feasible(
            problem.covert_data(cand), r_mat, problem.config.feas_tol
        ):
            return cand, converged
    return theta, converged


def _extract_beams(
    problem: SlotProblem,
    iterate: BeamformingIterate,
    theta: np.ndarray,
    rng: np.random.Generator,
) -> tuple[np.ndarray, list[float]]:
    """Rank-one beamformers from the lifted solution.

    The principal component w w^H <= W always inherits the covertness and
    power certificates; Gaussian rounding candidates (rescaled to the full
    block power) are kept only when they improve the rate AND pass the exact
    robust feasibility check.
    """
    cfg = problem.config
    cs = problem.channels
    k_users = cs.n_users
    principal = []
    ratios = []
    for w in iterate.w_mats:
        vec, ratio = extract_rank_one(w)
        principal.append(vec)
        ratios.append(ratio)
    best = np.stack(principal)
    best_rate = covert_sum_rate(best, iterate.r_s, theta, cs, problem.sigma_b2)

    if min(ratios) < cfg.rank_tol and cfg.rounding_samples > 0:
        covert = problem.covert_data(theta)
        roots = []
        for w in iterate.w_mats:
            evals, evecs = np.linalg.eigh(0.5 * (w + w.conj().T))
            roots.append(evecs @ np.diag(np.sqrt(np.maximum(evals, 0.0))))
        traces = [float(np.real(np.trace(w))) for w in iterate.w_mats]
        n_a = cs.n_tx
        for _ in range(cfg.rounding_samples):
            cand = np.zeros((k_users, n_a), dtype=complex)
            for k in range(k_users):
                g = (rng.standard_normal(n_a) + 1j * rng.standard_normal(n_a))
                vec = roots[k] @ (g / np.sqrt(2.0))
                norm = np.linalg.norm(vec)
                if norm > 0 and traces[k] > 0:
                    vec *= np.sqrt(traces[k]) / norm
                cand[k] = vec
            rate = covert_sum_rate(cand, iterate.r_s, theta, cs, problem.sigma_b2)
            if rate <= best_rate:
                continue
            r_mat = sum(np.outer(c, c.conj()) for c in cand) - (
                problem.budget.eta2 - 1.0
            ) * iterate.r_s
            if covert_lmi_feasible(covert, r_mat, cfg.feas_tol):
                best, best_rate = cand, rate
    return best, ratios


def run_algorithm1(
    problem: SlotProblem,
    rng: np.random.Generator,
    initial: tuple[BeamformingIterate, np.ndarray, str] | None = None,
) -> BeamformingSolution:
    """Full AO loop for one slot; never raises on solver trouble.

    Returns a sensing-only solution when initialization cannot reach
    feasibility (status explains why).
    """
    cfg = problem.config
    cs = problem.channels
    if initial is None:
        initial = initialize_solution(problem, rng)
    iterate, theta, init_status = initial
    if init_status != "ok":
        rate = covert_sum_rate(
            [np.zeros(cs.n_tx, dtype=complex)] * cs.n_users,
            iterate.r_s, theta, cs, problem.sigma_b2,
        )
        return BeamformingSolution(
            w_vecs=np.zeros((cs.n_users, cs.n_tx), dtype=complex),
            w_mats=iterate.w_mats,
            r_s=iterate.r_s,
            theta=theta,
            sum_rate=0.0 if rate < 1e-12 else rate,
            trace=[0.0],
            status=init_status,
            outer_iterations=0,
            rank_ratios=[1.0] * cs.n_users,
        )

    status = "ok"
    trace = [_lifted_rate(problem, iterate, theta)]
    outer = 0
    for outer in range(1, cfg.max_outer + 1):
        h_eff = cs.effective_user_channels(theta)
        new_iterate, report, _ = solve_beamforming_subproblem(
            iterate, h_eff, problem.covert_data(theta), problem.sensing,
            problem.p_max, problem.sigma_b2,
            feas_tol=cfg.feas_tol, rel_gap=cfg.rel_gap,
            max_iter=cfg.solver_max_iter,
        )
        if new_iterate is iterate:  # rejected: no certified improvement
            status = f"warn_beamforming_{report.status}"
            break
        # monotone guard: accept only non-decreasing lifted rates
        if _lifted_rate(problem, new_iterate, theta) >= trace[-1] - 1e-9 * (
            1.0 + abs(trace[-1])
        ):
            iterate = new_iterate

        if cfg.ris_mode != RIS_MODE_FIXED:
            theta, _ = _ris_step(problem, iterate, theta, rng)

        rate = _lifted_rate(problem, iterate, theta)
        trace.append(rate)
        if rate - trace[-2] <= cfg.eps_out * max(abs(trace[-2]), 1e-12):
            break

    w_vecs, ratios = _extract_beams(problem, iterate, theta, rng)
    sum_rate = covert_sum_rate(w_vecs, iterate.r_s, theta, cs, problem.sigma_b2)
    return BeamformingSolution(
        w_vecs=w_vecs,
        w_mats=iterate.w_mats,
        r_s=iterate.r_s,
        theta=theta,
        sum_rate=sum_rate,
        trace=trace,
        status=status,
        outer_iterations=outer,
        rank_ratios=ratios,
    )
