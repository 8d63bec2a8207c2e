"""RIS phase-shift subproblem: lifted SDP with sequential rank-one tightening.

The unit-modulus phase vector is lifted to V = v v^H with v = [conj(theta); 1],
turning received powers into traces against constant matrices.  The covertness
constraint becomes an LMI through the eigen-decomposition of the fixed
transmit matrix R (each eigen-term is a congruence of conj(V)); the rank-one
constraint is restored by the SROCR inner loop, which raises a lower bound on
the dominant-eigenvalue share until the lifted matrix is numerically rank one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beamforming import CovertLmiData
from .conic import (
    ConicProgram,
    CongruenceTerm,
    ExprMatrixTerm,
    LinExpr,
    Lmi,
)

LN2 = float(np.log(2.0))


class PhaseExtractionError(RuntimeError):
    """Raised when the lifted matrix has no usable homogenization entry."""


@dataclass
class LiftedPhase:
    """Lifted RIS variable V, (N_R+1) x (N_R+1) Hermitian PSD, diag ~= 1."""

    v_mat: np.ndarray

    @property
    def rank_one_ratio(self) -> float:
        trace = float(np.real(np.trace(self.v_mat)))
        if trace <= 0:
            return 1.0
        return float(np.linalg.eigvalsh(self.v_mat)[-1] / trace)


@dataclass
class TraceFormData:
    """Received-power traces: tr(phi[k,i] V) = |h_k^H w_i|^2, tr(psi[k] V) = h_k^H R_s h_k."""

    phi: np.ndarray  # (K, K, N_R+1, N_R+1)
    psi: np.ndarray  # (K, N_R+1, N_R+1)

    @property
    def n_users(self) -> int:
        return self.phi.shape[0]

    @property
    def dim(self) -> int:
        return self.phi.shape[-1]


def lift_theta(theta: np.ndarray) -> np.ndarray:
    """V = v v^H with v = [conj(theta); 1]."""
    v = np.concatenate([np.conj(theta), [1.0]])
    return np.outer(v, v.conj())


def build_phi_psi(
    h_d: np.ndarray,
    h_r: np.ndarray,
    g_mat: np.ndarray,
    w_mats: list[np.ndarray],
    r_s: np.ndarray,
) -> TraceFormData:
    """Trace-form matrices for the lifted rate expressions."""
    k_users = h_d.shape[0]
    n_r = g_mat.shape[0]
    t_mats = []
    for k in range(k_users):
        g_k = np.conj(h_r[k])[:, None] * g_mat  # diag(h_r^H) G
        t_mats.append(np.hstack([g_k.conj().T, h_d[k][:, None]]))  # (N_A, N_R+1)
    phi = np.zeros((k_users, k_users, n_r + 1, n_r + 1), dtype=complex)
    psi = np.zeros((k_users, n_r + 1, n_r + 1), dtype=complex)
    for k, t_k in enumerate(t_mats):
        for i, w in enumerate(w_mats):
            phi[k, i] = t_k.conj().T @ w @ t_k
        psi[k] = t_k.conj().T @ r_s @ t_k
    return TraceFormData(phi=phi, psi=psi)


def trace_rate_terms(
    data: TraceFormData, v_mat: np.ndarray, sigma_b2: float
) -> tuple[np.ndarray, np.ndarray]:
    """(f_k, d_k) log arguments of the lifted rate in SINR-normalized units."""
    k_users = data.n_users
    quads = np.real(np.einsum("kiab,ba->ki", data.phi, v_mat)) / sigma_b2
    sense = np.real(np.einsum("kab,ba->k", data.psi, v_mat)) / sigma_b2
    totals = quads.sum(axis=1) + sense + 1.0
    own = quads[np.arange(k_users), np.arange(k_users)]
    return totals, totals - own


def trace_form_objective(
    data: TraceFormData, v_mat: np.ndarray, sigma_b2: float
) -> float:
    """Exact lifted sum rate Q1 - P1 at V (bits/s/Hz)."""
    f, d = trace_rate_terms(data, v_mat, sigma_b2)
    return float(np.sum(np.log2(f) - np.log2(d)))


def sca_gradient_v(
    v_prev: np.ndarray, data: TraceFormData, sigma_b2: float
) -> np.ndarray:
    """Gradient of the interference term P1 with respect to V at v_prev."""
    k_users = data.n_users
    _, d_prev = trace_rate_terms(data, v_prev, sigma_b2)
    if np.any(d_prev <= 0):
        raise ValueError("expansion point has nonpositive interference terms")
    grad = np.zeros((data.dim, data.dim), dtype=complex)
    for k in range(k_users):
        inter = (
            sum(data.phi[k, j] for j in range(k_users) if j != k) + data.psi[k]
        ) / sigma_b2
        grad += inter / (LN2 * d_prev[k])
    return 0.5 * (grad + grad.conj().T)


@dataclass
class PhaseCovertData:
    """Covertness data for the RIS subproblem: raw channels, phases variable."""

    g_mat: np.ndarray  # (N_R, N_A) raw Alice-RIS channel
    h_aw_hat: np.ndarray  # (N_A,)
    h_rw_hat: np.ndarray  # (N_R,)
    delta_aw: float
    delta_rw: float
    eta2: float
    sigma_w2: float

    @property
    def n_ris(self) -> int:
        return self.g_mat.shape[0]

    @property
    def n_tx(self) -> int:
        return self.g_mat.shape[1]

    def fixed_theta_data(self, theta: np.ndarray) -> CovertLmiData:
        return CovertLmiData.build(
            theta,
            self.g_mat,
            self.h_aw_hat,
            self.h_rw_hat,
            self.delta_aw,
            self.delta_rw,
            self.eta2,
            self.sigma_w2,
        )


def _covert_v_factors(
    covert: PhaseCovertData, r_mat: np.ndarray, term_cutoff: float
) -> tuple[list[tuple[float, np.ndarray]], list[tuple[int, float, int]], int]:
    """Eigen-term factors U_i of the lifted covertness map.

    U_i stacks the RIS-ball rows (diag(G u_i) in general; a single scalar row
    when G is rank one, in which case the ball reduces exactly to the scalar
    xi with |xi| <= delta_rw ||g_ris|| uniformly in theta), the Alice-ball
    rows u_i, and the effective-channel corner row, all against the lifted
    coordinates [theta; 1]; the theta dependence lives entirely in conj(V).

    Returns (factors, mu_specs, m) with mu_specs = (ball index, radius, rows).
    """
    from .beamforming import rank_one_factors

    n_r, n_a = covert.n_ris, covert.n_tx
    sigma_w = np.sqrt(covert.sigma_w2)
    h_rw = covert.h_rw_hat / sigma_w
    h_aw = covert.h_aw_hat / sigma_w
    d_rw = covert.delta_rw / sigma_w
    d_aw = covert.delta_aw / sigma_w
    g_ris, g_alice = rank_one_factors(covert.g_mat)
    reduced = g_ris is not None

    mu_specs: list[tuple[int, float, int]] = []
    if d_rw > 0.0:
        if reduced:
            rho = d_rw * float(np.linalg.norm(g_ris))
            if rho > 0.0:
                mu_specs.append((0, rho, 1))
        else:
            mu_specs.append((0, d_rw, n_r))
    if d_aw > 0.0:
        mu_specs.append((1, d_aw, n_a))
    m = sum(rows for _, _, rows in mu_specs)

    r_herm = 0.5 * (r_mat + r_mat.conj().T)
    evals, evecs = np.linalg.eigh(r_herm)
    lam_max = float(np.abs(evals).max()) if evals.size else 0.0
    keep = np.abs(evals) > term_cutoff * max(lam_max, 1e-300)

    rw_active = any(ball == 0 for ball, _, _ in mu_specs)
    aw_active = any(ball == 1 for ball, _, _ in mu_specs)
    factors: list[tuple[float, np.ndarray]] = []
    for lam, u in zip(evals[keep], evecs[:, keep].T):
        blocks = []
        if rw_active:
            if reduced:
                row = np.zeros((1, n_r + 1), dtype=complex)
                row[0, n_r] = np.conj(g_alice) @ u
                blocks.append(row)
            else:
                gu = covert.g_mat @ u
                blocks.append(
                    np.hstack([np.diag(gu), np.zeros((n_r, 1), dtype=complex)])
                )
        if aw_active:
            blocks.append(
                np.hstack([np.zeros((n_a, n_r), dtype=complex), u[:, None]])
            )
        if reduced:
            scalar = np.conj(g_alice) @ u
            corner = np.concatenate(
                [scalar * g_ris * np.conj(h_rw), [np.conj(h_aw) @ u]]
            )
        else:
            corner = np.concatenate(
                [np.conj(h_rw) * (covert.g_mat @ u), [np.conj(h_aw) @ u]]
            )
        blocks.append(corner[None, :])
        factors.append((float(lam), np.vstack(blocks)))
    return factors, mu_specs, m


def assemble_covert_matrix_v(
    covert: PhaseCovertData,
    r_mat: np.ndarray,
    v_mat: np.ndarray,
    mu1: float = 0.0,
    mu2: float = 0.0,
    term_cutoff: float = 1e-10,
) -> np.ndarray:
    """Numeric unbalanced covertness LMI value at a given lifted matrix."""
    factors, mu_specs, m = _covert_v_factors(covert, r_mat, term_cutoff)
    out = np.zeros((m + 1, m + 1), dtype=complex)
    for lam, u_mat in factors:
        out -= lam * (u_mat @ np.conj(v_mat) @ u_mat.conj().T)
    mu_vals = (mu1, mu2)
    offset = 0
    for ball, radius, rows in mu_specs:
        idx = offset + np.arange(rows)
        out[idx, idx] += mu_vals[ball]
        out[m, m] -= mu_vals[ball] * radius**2
        offset += rows
    out[m, m] += covert.eta2 - 1.0
    return out


def build_covert_lmi_v(
    covert: PhaseCovertData,
    r_mat: np.ndarray,
    v_block: str,
    mu1_block: str,
    mu2_block: str,
    term_cutoff: float = 1e-10,
    balance: bool = True,
) -> Lmi:
    """Covertness LMI with the RIS lift as the variable.

    R is eigen-decomposed, R = sum_i lambda_i u_i u_i^H (terms below
    term_cutoff * |lambda|_max dropped); each eigen-term enters as the
    congruence lambda_i * U_i conj(V) U_i^H, which is affine in V.  Channel
    units are normalized by sigma_w; an exact diagonal congruence balances
    the cone when balance=True.
    """
    factors, mu_specs, m = _covert_v_factors(covert, r_mat, term_cutoff)
    mu_names = (mu1_block, mu2_block)

    if balance:
        diag_est = np.zeros(m + 1)
        for lam, u_mat in factors:
            diag_est += abs(lam) * np.linalg.norm(u_mat, axis=1) ** 2
        diag_est[m] = max(diag_est[m], covert.eta2 - 1.0, 1e-12)
        scale = 1.0 / np.sqrt(
            np.maximum(diag_est, 1e-12 * max(diag_est.max(), 1e-300))
        )
    else:
        scale = np.ones(m + 1)
    d_out = scale[:, None] * scale[None, :]

    terms: list = [
        CongruenceTerm(v_block, scale[:, None] * u_mat, coeff=-lam, conjugate=True)
        for lam, u_mat in factors
    ]
    offset = 0
    for ball, radius, rows in mu_specs:
        mu_mat = np.zeros((m + 1, m + 1))
        mu_mat[offset + np.arange(rows), offset + np.arange(rows)] = 1.0
        mu_mat[m, m] = -radius**2
        mu_mat *= d_out
        mu_mat /= max(np.abs(mu_mat).max(), 1e-300)
        terms.append(
            ExprMatrixTerm(LinExpr().add_scalar(mu_names[ball], 1.0), mu_mat)
        )
        offset += rows
    const = np.zeros((m + 1, m + 1))
    const[m, m] = covert.eta2 - 1.0
    return Lmi(dim=m + 1, terms=terms, const=const * d_out)


def solve_phase_subproblem(
    v_prev: np.ndarray,
    data: TraceFormData,
    covert: PhaseCovertData,
    r_mat: np.ndarray,
    sigma_b2: float,
    srocr_level: float | None,
    feas_tol: float = 1e-7,
    rel_gap: float = 1e-6,
    max_iter: int = 200,
):
    """One convex solve of the lifted phase problem.

    srocr_level None drops the rank control entirely (plain SDR); otherwise
    the dominant-share constraint u^H V u >= level * tr(v_prev) is added with
    u the principal eigenvector of v_prev.
    """
    dim = data.dim
    f_prev, d_prev = trace_rate_terms(data, v_prev, sigma_b2)
    grad = sca_gradient_v(v_prev, data, sigma_b2)

    prog = ConicProgram("phase_subproblem")
    prog.add_hermitian_block("v", dim)
    prog.add_nonneg_scalar("mu1")
    prog.add_nonneg_scalar("mu2")
    s_names = [prog.add_free_scalar(f"s{k}") for k in range(data.n_users)]

    for i in range(dim):
        sel = np.zeros((dim, dim))
        sel[i, i] = 1.0
        prog.add_eq(LinExpr(const=-1.0).add_matrix("v", sel))

    prog.add_lmi(build_covert_lmi_v(covert, r_mat, "v", "mu1", "mu2"))

    if srocr_level is not None and srocr_level > 0.0:
        u = np.linalg.eigh(0.5 * (v_prev + v_prev.conj().T))[1][:, -1]
        rhs = float(srocr_level * np.real(np.trace(v_prev)))
        prog.add_ineq(
            LinExpr(const=rhs).add_matrix("v", -np.outer(u, u.conj()))
        )

    # exact hypograph of each concave log term of Q1
    for k, s_name in enumerate(s_names):
        weight = (
            sum(data.phi[k, i] for i in range(data.n_users)) + data.psi[k]
        ) / sigma_b2
        f_expr = LinExpr(const=1.0).add_matrix("v", weight)
        prog.add_log_hypograph(s_name, f_expr)

    objective = LinExpr()
    for s_name in s_names:
        objective.add_scalar(s_name, 1.0 / LN2)
    objective.add_matrix("v", -grad)
    prog.set_objective("maximize", objective)
    return prog.solve(feas_tol=feas_tol, rel_gap=rel_gap, max_iter=max_iter)


@dataclass
class SrocrResult:
    lifted: LiftedPhase
    trace: list[dict] = field(default_factory=list)  # per-iteration diagnostics
    converged: bool = True


def srocr_solve(
    v_init: np.ndarray,
    data: TraceFormData,
    covert: PhaseCovertData,
    r_mat: np.ndarray,
    sigma_b2: float,
    step0: float = 0.1,
    eps_in1: float = 1e-4,
    eps_in2: float = 0.999,
    max_inner: int = 50,
    feas_tol: float = 1e-7,
    rel_gap: float = 1e-6,
) -> SrocrResult:
    """Inner loop tightening the rank-one share of the lifted phase matrix.

    Each pass re-linearizes the rate surrogate at the current V and solves the
    convex subproblem with the dominant-share constraint at level mu3;
    infeasible solves halve the step and keep the previous V.  The level stays
    at zero while the SCA value is still improving (the update rule is vacuous
    anyway while the relaxed iterates are far from rank one, and keeping it
    inactive avoids pinning the phase direction when a relaxed solve happens
    to land rank one early); once the value stalls, mu3 ramps as
    min(1, share + step).  Terminates when the relative objective change is
    below eps_in1 AND the eigenvalue share reaches eps_in2, or after max_inner
    total passes (best iterate returned with converged=False).
    """
    v_cur = v_init.copy()
    step = step0
    mu3 = 0.0
    exploring = True
    prev_obj = trace_form_objective(data, v_cur, sigma_b2)
    explore_cap = max(5, max_inner // 3)
    trace: list[dict] = []
    converged = False
    for it in range(max_inner):
        report = solve_phase_subproblem(
            v_cur, data, covert, r_mat, sigma_b2,
            srocr_level=mu3 if not exploring else 0.0,
            feas_tol=feas_tol, rel_gap=rel_gap,
        )
        feasible = report.status == "optimal"
        if feasible:
            v_cur = np.asarray(report.blocks["v"])
        elif not exploring:
            step *= 0.5
        ratio = LiftedPhase(v_cur).rank_one_ratio
        obj = trace_form_objective(data, v_cur, sigma_b2)
        trace.append(
            {
                "mu3": mu3 if not exploring else 0.0,
                "objective": obj,
                "ratio": ratio,
                "feasible": feasible,
                "step": step,
                "exploring": exploring,
            }
        )
        stalled = abs(obj - prev_obj) <= eps_in1 * max(abs(prev_obj), 1e-12)
        if exploring:
            if (feasible and stalled) or it + 1 >= explore_cap:
                exploring = False
        elif feasible and stalled and ratio >= eps_in2:
            converged = True
            break
        mu3 = min(1.0, ratio + step)
        if feasible:
            prev_obj = obj
    return SrocrResult(lifted=LiftedPhase(v_cur), trace=trace, converged=converged)


def extract_theta(lifted: LiftedPhase) -> np.ndarray:
    """Unit-modulus phases from a (near) rank-one lifted matrix.

    The principal eigenvector is normalized by its homogenization entry,
    conjugated back per the lift convention, and projected entrywise to the
    unit circle.
    """
    v_mat = 0.5 * (lifted.v_mat + lifted.v_mat.conj().T)
    _, vecs = np.linalg.eigh(v_mat)
    u = vecs[:, -1]
    if abs(u[-1]) < 1e-6:
        raise PhaseExtractionError("homogenization entry vanishes")
    scaled = u / u[-1]
    theta = np.conj(scaled[:-1])
    return theta / np.abs(theta)


def gaussian_randomization_candidates(
    v_mat: np.ndarray, n_candidates: int, rng: np.random.Generator
) -> list[np.ndarray]:
    """Unit-modulus phase candidates sampled from the SDR solution.

    Draws xi ~ CN(0, V) and projects each homogenized draw to the circle.
    """
    dim = v_mat.shape[0]
    sym = 0.5 * (v_mat + v_mat.conj().T)
    evals, evecs = np.linalg.eigh(sym)
    root = evecs @ np.diag(np.sqrt(np.maximum(evals, 0.0)))
    out = []
    for _ in range(n_candidates):
        xi = root @ (
            (rng.standard_normal(dim) + 1j * rng.standard_normal(dim))
            / np.sqrt(2.0)
        )
        if abs(xi[-1]) < 1e-12:
            continue
        scaled = xi / xi[-1]
        theta = np.conj(scaled[:-1])
        mags = np.abs(theta)
        if np.any(mags < 1e-12):
            continue
        out.append(theta / mags)
    return out
