"""Beamformer/sensing-covariance subproblem: SDR with SCA rate surrogate.

One solve updates the lifted beamformers W_k and the sensing covariance R_s
with the RIS phases held fixed.  The non-concave part of the sum rate is
linearized at the previous iterate while the concave log terms stay exact
(exponential-cone hypographs); the covertness constraint over both
channel-error balls enters as a single S-procedure LMI; the tracking-MSE
constraint enters as six Schur-complement LMIs; the rank-one constraint is
dropped (it re-emerges at optimality and is certified by extract_rank_one).

All LMIs are assembled in sigma_w-normalized channel units and block-balanced
by an exact diagonal congruence, which leaves the feasible set untouched but
keeps the interior-point backend well conditioned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conic import (
    ConicProgram,
    CongruenceTerm,
    ExprMatrixTerm,
    LinExpr,
    Lmi,
    SolveReport,
)

LN2 = float(np.log(2.0))


class CovertSilenceError(RuntimeError):
    """eta2 == 1 forces zero communication power; there is nothing to solve."""


@dataclass
class BeamformingIterate:
    """Feasible point of the beamforming subproblem."""

    w_mats: list[np.ndarray]  # K lifted beamformers, Hermitian PSD
    r_s: np.ndarray  # sensing covariance, Hermitian PSD
    mu1: float = 0.0
    mu2: float = 0.0
    sensing_slacks: np.ndarray | None = None

    @property
    def total_power(self) -> float:
        return float(
            np.real(sum(np.trace(w) for w in self.w_mats) + np.trace(self.r_s))
        )


@dataclass
class CovertLmiData:
    """Stacked data of the covertness LMI.

    g_bar = [diag(theta) G; I] maps the transmit side to the stacked
    (RIS-warden, Alice-warden) observation; h_bar stacks the predicted
    channels in the same order.  When the Alice-RIS channel is rank one
    (G = g_ris g_alice^H, the LoS geometry), the RIS error ball acts on the
    quadratic only through the scalar xi = Delta_rw^H (theta o g_ris) with
    |xi| <= delta_rw * ||g_ris|| for every unit-modulus theta, so the LMI can
    be built over [Delta_aw; xi] instead of the full stack; the factors for
    that exact reduction are kept alongside.
    """

    g_bar: np.ndarray  # (N_R + N_A, N_A)
    h_bar: np.ndarray  # (N_R + N_A,)
    n_ris: int
    delta_rw: float
    delta_aw: float
    eta2: float
    sigma_w2: float
    g_ris: np.ndarray | None = None  # (N_R,) rank-one left factor, or None
    g_alice: np.ndarray | None = None  # (N_A,) rank-one right factor

    @staticmethod
    def build(
        theta: np.ndarray,
        g_mat: np.ndarray,
        h_aw_hat: np.ndarray,
        h_rw_hat: np.ndarray,
        delta_aw: float,
        delta_rw: float,
        eta2: float,
        sigma_w2: float,
    ) -> "CovertLmiData":
        n_r, n_a = g_mat.shape
        g_bar = np.vstack([theta[:, None] * g_mat, np.eye(n_a)])
        h_bar = np.concatenate([h_rw_hat, h_aw_hat])
        g_ris, g_alice = rank_one_factors(g_mat)
        if g_ris is not None:
            g_ris = theta * g_ris  # fold the fixed phases into the factor
        return CovertLmiData(
            g_bar=g_bar,
            h_bar=h_bar,
            n_ris=n_r,
            delta_rw=delta_rw,
            delta_aw=delta_aw,
            eta2=eta2,
            sigma_w2=sigma_w2,
            g_ris=g_ris,
            g_alice=g_alice,
        )

    @property
    def n_tx(self) -> int:
        return self.g_bar.shape[1]

    @property
    def reducible(self) -> bool:
        return self.g_ris is not None


def rank_one_factors(
    g_mat: np.ndarray, tol: float = 1e-10
) -> tuple[np.ndarray | None, np.ndarray | None]:
    """(g_ris, g_alice) with G = g_ris g_alice^H if G is numerically rank one."""
    if not np.any(g_mat):
        n_r, n_a = g_mat.shape
        return np.zeros(n_r, dtype=complex), np.zeros(n_a, dtype=complex)
    u, s, vh = np.linalg.svd(g_mat)
    if s.size > 1 and s[1] > tol * s[0]:
        return None, None
    return s[0] * u[:, 0], vh[0].conj()


@dataclass
class SensingLmiData:
    """Data of the posterior-MSE constraint tr(C(R_s)) <= mse_max."""

    c_pred_inv: np.ndarray  # (6, 6)
    jacobian: np.ndarray  # (5, 6)
    z_tilde: np.ndarray  # (5,) noise scale such that Q_Z = diag(z)/illum
    steering: np.ndarray  # (N_A,) at the predicted angles
    mse_max: float

    def information_matrix(self) -> np.ndarray:
        """M with C^-1(R_s) = C_pred^-1 + (a^H R_s a) M; zero-noise rows dropped."""
        keep = self.z_tilde > 1e-300
        j = self.jacobian[keep]
        z = self.z_tilde[keep]
        return j.T @ np.diag(1.0 / z) @ j

    def posterior_cov(self, r_s: np.ndarray) -> np.ndarray:
        illum = float(np.real(self.steering.conj() @ r_s @ self.steering))
        return np.linalg.inv(self.c_pred_inv + illum * self.information_matrix())


@dataclass
class RateSurrogate:
    """First-order concave surrogate of the sum rate at a fixed expansion point.

    Works in SINR-normalized units (channel outer products divided by the
    Bob noise power), which leaves rates and gradients unchanged.
    """

    h_outer: np.ndarray  # (K, N_A, N_A) normalized outer products
    grad_w: np.ndarray  # (K, N_A, N_A) gradients of P1 wrt each W_k
    grad_rs: np.ndarray  # (N_A, N_A)
    f_prev: np.ndarray  # (K,) Q1 log arguments at the expansion point
    d_prev: np.ndarray  # (K,) P1 log arguments at the expansion point
    w_prev: list[np.ndarray]
    r_s_prev: np.ndarray

    def _args(self, w_mats, r_s) -> tuple[np.ndarray, np.ndarray]:
        quads = np.array(
            [
                [float(np.real(np.trace(h @ w))) for w in w_mats]
                + [float(np.real(np.trace(h @ r_s)))]
                for h in self.h_outer
            ]
        )
        totals = quads.sum(axis=1) + 1.0
        own = quads[np.arange(len(self.h_outer)), np.arange(len(w_mats))]
        return totals, totals - own

    def true_objective(self, w_mats, r_s) -> float:
        f, d = self._args(w_mats, r_s)
        return float(np.sum(np.log2(f) - np.log2(d)))

    def surrogate(self, w_mats, r_s) -> float:
        f, _ = self._args(w_mats, r_s)
        lin = sum(
            float(np.real(np.trace(self.grad_w[k].conj().T @ (w_mats[k] - self.w_prev[k]))))
            for k in range(len(w_mats))
        )
        lin += float(np.real(np.trace(self.grad_rs.conj().T @ (r_s - self.r_s_prev))))
        p1_tilde = float(np.sum(np.log2(self.d_prev))) + lin
        return float(np.sum(np.log2(f))) - p1_tilde


def sca_rate_surrogate(
    w_prev: list[np.ndarray],
    r_s_prev: np.ndarray,
    h_eff: np.ndarray,
    sigma_b2: float,
) -> RateSurrogate:
    """Linearize the interference term P1 of the sum rate at (W_prev, R_s_prev)."""
    if sigma_b2 <= 0:
        raise ValueError("sigma_b2 must be positive")
    k_users, _ = h_eff.shape
    h_outer = np.einsum("ki,kj->kij", h_eff, h_eff.conj()) / sigma_b2
    quads = np.array(
        [
            [float(np.real(np.trace(h @ w))) for w in w_prev]
            + [float(np.real(np.trace(h @ r_s_prev)))]
            for h in h_outer
        ]
    )
    totals = quads.sum(axis=1) + 1.0
    own = quads[np.arange(k_users), np.arange(k_users)]
    d_prev = totals - own
    if np.any(d_prev <= 0):
        raise ValueError("expansion point has nonpositive interference terms")
    weights = 1.0 / (LN2 * d_prev)
    grad_rs = np.einsum("k,kij->ij", weights, h_outer)
    grad_w = np.stack(
        [
            np.einsum("k,kij->ij", weights, h_outer)
            - weights[k] * h_outer[k]
            for k in range(k_users)
        ]
    )
    return RateSurrogate(
        h_outer=h_outer,
        grad_w=grad_w,
        grad_rs=grad_rs,
        f_prev=totals,
        d_prev=d_prev,
        w_prev=[w.copy() for w in w_prev],
        r_s_prev=r_s_prev.copy(),
    )


def _covert_stacking(
    data: CovertLmiData,
) -> tuple[list[np.ndarray], list[tuple[int, float, int]], np.ndarray]:
    """Active uncertainty row-blocks, multiplier specs, and the channel row.

    Returns (blocks, mu_specs, w_row) with mu_specs entries
    (ball index 0=rw / 1=aw, normalized radius, rows).  Uses the exact scalar
    reduction of the RIS ball whenever G is rank one.
    """
    n_r = data.n_ris
    sigma_w = np.sqrt(data.sigma_w2)
    d_rw = data.delta_rw / sigma_w
    d_aw = data.delta_aw / sigma_w
    w_row = (data.h_bar.conj() / sigma_w) @ data.g_bar

    blocks: list[np.ndarray] = []
    mu_specs: list[tuple[int, float, int]] = []
    if d_rw > 0.0:
        if data.reducible:
            rho = d_rw * float(np.linalg.norm(data.g_ris))
            if rho > 0.0:
                blocks.append(data.g_alice.conj()[None, :])
                mu_specs.append((0, rho, 1))
        else:
            blocks.append(data.g_bar[:n_r])
            mu_specs.append((0, d_rw, n_r))
    if d_aw > 0.0:
        blocks.append(np.eye(data.n_tx, dtype=complex))
        mu_specs.append((1, d_aw, data.n_tx))
    return blocks, mu_specs, w_row


def assemble_covert_matrix(
    data: CovertLmiData, r_mat: np.ndarray, mu1: float = 0.0, mu2: float = 0.0
) -> np.ndarray:
    """Numeric unbalanced covertness LMI value for a fixed R and multipliers."""
    blocks, mu_specs, w_row = _covert_stacking(data)
    g_aug = np.vstack(blocks + [w_row[None, :]]) if blocks else w_row[None, :]
    m = g_aug.shape[0] - 1
    out = -(g_aug @ r_mat @ g_aug.conj().T).astype(complex)
    offset = 0
    mu_vals = (mu1, mu2)
    for ball, radius, rows in mu_specs:
        idx = offset + np.arange(rows)
        out[idx, idx] += mu_vals[ball]
        out[m, m] -= mu_vals[ball] * radius**2
        offset += rows
    out[m, m] += data.eta2 - 1.0
    return out


def build_covert_lmi(
    data: CovertLmiData,
    r_block: str,
    mu1_block: str,
    mu2_block: str,
    balance: bool = True,
) -> Lmi:
    """S-procedure LMI certifying the worst-case covertness constraint.

    The affine map is a single congruence of R = sum(W_k) - (eta2-1) R_s
    (hosted in r_block) by the stacked matrix [B; w^H] where B collects the
    uncertainty directions of the ACTIVE balls (radius > 0) and w is the
    predicted effective warden channel.  Inactive balls are points and
    contribute no rows or multipliers; a rank-one G collapses the RIS ball to
    one scalar row; with both radii zero the LMI degenerates to the scalar
    nominal constraint.  Channel units are normalized by sigma_w and the
    whole LMI is balanced by an exact diagonal congruence.
    """
    blocks, mu_specs, w_row = _covert_stacking(data)
    mu_names = (mu1_block, mu2_block)
    g_aug = np.vstack(blocks + [w_row[None, :]]) if blocks else w_row[None, :]
    m = g_aug.shape[0] - 1

    # balancing congruence assuming O(1) transmit power
    if balance:
        scales = []
        for b in blocks:
            scales.append(
                np.full(b.shape[0], 1.0 / max(np.linalg.norm(b, 2), 1e-12))
            )
        corner = max(float(np.linalg.norm(w_row)) ** 2, data.eta2 - 1.0, 1.0)
        scales.append(np.array([1.0 / np.sqrt(corner)]))
        scale = np.concatenate(scales)
    else:
        scale = np.ones(m + 1)
    d_out = scale[:, None] * scale[None, :]

    const = np.zeros((m + 1, m + 1))
    const[m, m] = data.eta2 - 1.0
    terms: list = [CongruenceTerm(r_block, scale[:, None] * g_aug, coeff=-1.0)]
    offset = 0
    mu_rescale = [1.0, 1.0]
    for ball, radius, rows in mu_specs:
        mu_mat = np.zeros((m + 1, m + 1))
        mu_mat[offset + np.arange(rows), offset + np.arange(rows)] = 1.0
        mu_mat[m, m] = -radius**2
        mu_mat *= d_out
        # normalize the multiplier column (rescales the nonneg variable only;
        # physical mu = solved value / colnorm)
        colnorm = max(np.abs(mu_mat).max(), 1e-300)
        mu_mat /= colnorm
        mu_rescale[ball] = 1.0 / colnorm
        terms.append(
            ExprMatrixTerm(LinExpr().add_scalar(mu_names[ball], 1.0), mu_mat)
        )
        offset += rows
    return Lmi(
        dim=m + 1,
        terms=terms,
        const=const * d_out,
        metadata={"mu_rescale": tuple(mu_rescale)},
    )


def evaluate_covert_quadratic(
    data: CovertLmiData,
    r_mat: np.ndarray,
    delta_rw_vec: np.ndarray,
    delta_aw_vec: np.ndarray,
) -> float:
    """Normalized slack of the robust covertness inequality at one error draw.

    Returns (eta2-1) - (h+delta)^H Gbar R Gbar^H (h+delta) / sigma_w^2;
    nonnegative iff the constraint holds at this uncertainty realization.
    """
    sigma_w = np.sqrt(data.sigma_w2)
    h = (data.h_bar + np.concatenate([delta_rw_vec, delta_aw_vec])) / sigma_w
    v = data.g_bar.conj().T @ h
    return float((data.eta2 - 1.0) - np.real(v.conj() @ r_mat @ v))


def covert_lmi_feasible(
    data: CovertLmiData, r_mat: np.ndarray, feas_tol: float = 1e-7
) -> bool:
    """Robust covertness feasibility for a FIXED transmit matrix R.

    The zero-multiplier certificate (an eigenvalue check) settles the common
    slack case instantly; otherwise the two-multiplier S-procedure
    feasibility problem is solved.  Used by the initializer power backoff and
    by phase-candidate screening.
    """
    pi0 = assemble_covert_matrix(data, r_mat)
    min_eig = float(np.linalg.eigvalsh(0.5 * (pi0 + pi0.conj().T))[0])
    if min_eig >= -1e-10 * max(1.0, float(np.abs(pi0).max())):
        return True

    prog = ConicProgram("covert_feasibility")
    prog.add_nonneg_scalar("mu1")
    prog.add_nonneg_scalar("mu2")
    lmi = build_covert_lmi(data, "__r__", "mu1", "mu2")
    # fold the fixed R through the congruence term into the constant
    terms = []
    const = lmi.const.astype(complex)
    for term in lmi.terms:
        if isinstance(term, CongruenceTerm):
            const = const + term.coeff * (
                term.left @ (np.conj(r_mat) if term.conjugate else r_mat)
                @ term.left.conj().T
            )
        else:
            terms.append(term)
    prog.add_lmi(Lmi(dim=lmi.dim, terms=terms, const=const))
    prog.set_objective(
        "minimize", LinExpr().add_scalar("mu1", 1.0).add_scalar("mu2", 1.0)
    )
    report = prog.solve(feas_tol=feas_tol)
    return report.status == "optimal"


def build_sensing_lmis(
    data: SensingLmiData,
    r_s_block: str,
    c_blocks: list[str],
    illum_hint: float = 1.0,
) -> tuple[list[Lmi], LinExpr]:
    """Schur LMIs bounding the posterior covariance diagonal by slacks c_i.

    Returns the six LMI blocks and the budget expression sum(c_i) - mse_max
    (to be added as an inequality <= 0).
    """
    info = data.information_matrix()
    c_inv0 = 0.5 * (data.c_pred_inv + data.c_pred_inv.T)
    a_outer = np.outer(data.steering, data.steering.conj())
    # per-axis balancing against the mid-illumination information matrix;
    # the slack corner is balanced against its natural size mse_max
    mid = np.diag(c_inv0) + 0.5 * illum_hint * np.diag(info)
    s = 1.0 / np.sqrt(np.maximum(mid, 1e-12))
    t = 1.0 / np.sqrt(max(data.mse_max, 1e-12))
    info_b = info * np.outer(s, s)
    c_inv0_b = c_inv0 * np.outer(s, s)

    lmis = []
    budget = LinExpr(const=-data.mse_max)
    for i, c_name in enumerate(c_blocks):
        const = np.zeros((7, 7))
        const[:6, :6] = c_inv0_b
        const[6, :6] = t * s * np.eye(6)[i]
        const[:6, 6] = t * s * np.eye(6)[i]
        info_pad = np.zeros((7, 7))
        info_pad[:6, :6] = info_b
        corner = np.zeros((7, 7))
        corner[6, 6] = t**2
        lmis.append(
            Lmi(
                dim=7,
                terms=[
                    ExprMatrixTerm(LinExpr().add_matrix(r_s_block, a_outer), info_pad),
                    ExprMatrixTerm(LinExpr().add_scalar(c_name, 1.0), corner),
                ],
                const=const,
            )
        )
        budget.add_scalar(c_name, 1.0)
    return lmis, budget


def _psd_floor(mat: np.ndarray) -> np.ndarray:
    """Clip tiny negative eigenvalues so the block is exactly PSD."""
    sym = 0.5 * (mat + mat.conj().T)
    evals, evecs = np.linalg.eigh(sym)
    if evals[0] >= 0.0:
        return sym
    return (evecs * np.maximum(evals, 0.0)) @ evecs.conj().T


def certify_iterate(
    iterate: BeamformingIterate,
    covert: CovertLmiData,
    sensing: SensingLmiData | None,
    p_max: float,
    feas_tol: float = 1e-7,
) -> BeamformingIterate | None:
    """Feasibility certificate for a solver candidate.

    PSD blocks are floored exactly; power and sensing budgets are verified;
    the covertness LMI is checked at the candidate's own multipliers to
    solver accuracy, escalating to a fresh multiplier search (and then a
    shrinking communication backoff, which only adds slack) when the quick
    check fails.  Returns the certified iterate or None.
    """
    w_mats = [_psd_floor(w) for w in iterate.w_mats]
    r_s = _psd_floor(iterate.r_s)
    total = float(np.real(sum(np.trace(w) for w in w_mats) + np.trace(r_s)))
    if total > p_max * (1.0 + 1e-6) + 1e-15:
        return None
    if total > p_max and total > 0:
        w_mats = [w * (p_max / total) for w in w_mats]
        r_s = r_s * (p_max / total)
    if sensing is not None:
        mse = float(np.trace(sensing.posterior_cov(r_s)))
        if mse > sensing.mse_max * (1.0 + 1e-6):
            return None

    def accepted(scaled: list[np.ndarray]) -> BeamformingIterate:
        return BeamformingIterate(
            w_mats=scaled,
            r_s=r_s,
            mu1=iterate.mu1,
            mu2=iterate.mu2,
            sensing_slacks=iterate.sensing_slacks,
        )

    r_mat = sum(w_mats) - (covert.eta2 - 1.0) * r_s
    pi = assemble_covert_matrix(covert, r_mat, iterate.mu1, iterate.mu2)
    min_eig = float(np.linalg.eigvalsh(0.5 * (pi + pi.conj().T))[0])
    if min_eig >= -1e-8 * max(1.0, float(np.abs(pi).max())):
        return accepted(w_mats)
    # candidate multipliers may be off; search fresh ones, then back off
    for backoff in (0.0, 1e-6, 1e-4, 1e-2):
        scaled = [(1.0 - backoff) * w for w in w_mats]
        r_mat = sum(scaled) - (covert.eta2 - 1.0) * r_s
        if covert_lmi_feasible(covert, r_mat, feas_tol):
            return accepted(scaled)
    return None


def solve_beamforming_subproblem(
    prev: BeamformingIterate,
    h_eff: np.ndarray,
    covert: CovertLmiData,
    sensing: SensingLmiData | None,
    p_max: float,
    sigma_b2: float,
    feas_tol: float = 1e-7,
    rel_gap: float = 1e-6,
    max_iter: int = 200,
) -> tuple[BeamformingIterate, SolveReport, RateSurrogate]:
    """One SCA pass of the relaxed beamforming subproblem.

    The solver's candidate is accepted only with an exact feasibility
    certificate (certify_iterate), which also rescues near-solutions the
    backend reports as numerical_error.  On rejection the previous iterate is
    returned unchanged together with the report; the caller decides the
    fallback.
    """
    if covert.eta2 <= 1.0:
        raise CovertSilenceError(
            "covertness level forces zero communication power"
        )
    k_users = h_eff.shape[0]
    n_a = h_eff.shape[1]
    surrogate = sca_rate_surrogate(prev.w_mats, prev.r_s, h_eff, sigma_b2)

    prog = ConicProgram("beamforming_subproblem")
    w_names = [prog.add_hermitian_block(f"w{k}", n_a) for k in range(k_users)]
    prog.add_hermitian_block("r_s", n_a)
    prog.add_hermitian_block("r_cov", n_a, psd=False)
    prog.add_nonneg_scalar("mu1")
    prog.add_nonneg_scalar("mu2")
    s_names = [prog.add_free_scalar(f"s{k}") for k in range(k_users)]

    prog.equate_hermitian(
        "r_cov", [(w, 1.0) for w in w_names] + [("r_s", -(covert.eta2 - 1.0))]
    )
    covert_lmi = build_covert_lmi(covert, "r_cov", "mu1", "mu2")
    mu_rescale = covert_lmi.metadata["mu_rescale"]
    prog.add_lmi(covert_lmi)

    c_names: list[str] = []
    if sensing is not None:
        c_names = [prog.add_nonneg_scalar(f"c{i}") for i in range(6)]
        lmis, budget = build_sensing_lmis(
            sensing, "r_s", c_names, illum_hint=p_max
        )
        for lmi in lmis:
            prog.add_lmi(lmi)
        prog.add_ineq(budget)

    power = LinExpr(const=-p_max)
    for w in w_names:
        power.add_matrix(w, np.eye(n_a))
    power.add_matrix("r_s", np.eye(n_a))
    prog.add_ineq(power)

    # exact hypograph of each concave log term of Q1
    for k, s_name in enumerate(s_names):
        f_expr = LinExpr(const=1.0)
        for w in w_names:
            f_expr.add_matrix(w, surrogate.h_outer[k])
        f_expr.add_matrix("r_s", surrogate.h_outer[k])
        prog.add_log_hypograph(s_name, f_expr)

    objective = LinExpr()
    for k, (w, s_name) in enumerate(zip(w_names, s_names)):
        objective.add_scalar(s_name, 1.0 / LN2)
        objective.add_matrix(w, -surrogate.grad_w[k])
    objective.add_matrix("r_s", -surrogate.grad_rs)
    prog.set_objective("maximize", objective)

    report = prog.solve(feas_tol=feas_tol, rel_gap=rel_gap, max_iter=max_iter)
    usable = report.status == "optimal" or (
        report.status == "numerical_error"
        and report.primal_residual <= 1e4 * feas_tol
        and report.min_eigenvalue >= -1e4 * feas_tol
    )
    if not usable:
        return prev, report, surrogate

    candidate = BeamformingIterate(
        w_mats=[np.asarray(report.blocks[w]) for w in w_names],
        r_s=np.asarray(report.blocks["r_s"]),
        mu1=float(report.blocks["mu1"]) * mu_rescale[0],
        mu2=float(report.blocks["mu2"]) * mu_rescale[1],
        sensing_slacks=(
            np.array([report.blocks[c] for c in c_names]) if c_names else None
        ),
    )
    certified = certify_iterate(candidate, covert, sensing, p_max)
    if certified is None:
        return prev, report, surrogate
    return certified, report, surrogate


def extract_rank_one(w_mat: np.ndarray) -> tuple[np.ndarray, float]:
    """Principal component w of a PSD matrix and the energy ratio lmax/tr."""
    trace = float(np.real(np.trace(w_mat)))
    n = w_mat.shape[0]
    if trace <= 0.0:
        return np.zeros(n, dtype=complex), 1.0
    evals, evecs = np.linalg.eigh(0.5 * (w_mat + w_mat.conj().T))
    lam = float(max(evals[-1], 0.0))
    w = np.sqrt(lam) * evecs[:, -1]
    return w, lam / trace
