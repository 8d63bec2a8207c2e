"""Covertness metrics for the warden's binary hypothesis test.

Under both hypotheses the warden sees L i.i.d. zero-mean complex Gaussian
samples whose variances differ: lambda0 with sensing only, lambda1 with
communication added.  The KL divergence L*(ln(l1/l0) + l0/l1 - 1) drives the
covertness constraint D <= 2 eps^2; its worst case over the channel
uncertainty balls is estimated here by multistart projected gradient ascent
(a verification oracle, never used inside the optimizer).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc, gammaincc


@dataclass(frozen=True)
class LambdaPair:
    """Received-power pair at the warden: lambda1 >= lambda0 >= noise power."""

    lambda0: float
    lambda1: float


@dataclass(frozen=True)
class CovertBudget:
    """Covertness level eps, slot length L and the derived threshold eta2 > 1."""

    epsilon: float
    num_symbols: int
    eta2: float

    @staticmethod
    def from_level(epsilon: float, num_symbols: int) -> "CovertBudget":
        return CovertBudget(
            epsilon=epsilon,
            num_symbols=num_symbols,
            eta2=eta2_root(epsilon, num_symbols),
        )


def eta2_root(epsilon: float, num_symbols: int) -> float:
    """Unique root > 1 of ln(x) + 1/x - 1 = 2 eps^2 / L.

    Solved by bisection in u = x - 1 (bracket [0, 1] doubled until a sign
    change) so the near-cancellation of ln(x) + 1/x - 1 around x = 1 is
    avoided; absolute tolerance 1e-12 on the root.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    if num_symbols < 1:
        raise ValueError("num_symbols must be >= 1")
    target = 2.0 * epsilon**2 / num_symbols
    if target == 0.0:
        return 1.0

    def h(u: float) -> float:
        # ln(1+u) + 1/(1+u) - 1 = log1p(u) - u/(1+u), accurate for small u
        return math.log1p(u) - u / (1.0 + u) - target

    lo, hi = 0.0, 1.0
    while h(hi) < 0.0:
        hi *= 2.0
    while hi - lo > 1e-13:
        mid = 0.5 * (lo + hi)
        if h(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 1.0 + 0.5 * (lo + hi)


def lambda_pair(
    h_w: np.ndarray, w_c: np.ndarray, r_s: np.ndarray, sigma_w2: float
) -> LambdaPair:
    """Received powers at the warden without/with the communication signal.

    w_c stacks the beamformers column-wise (N_A x K).
    """
    h_w = np.asarray(h_w)
    base = float(np.real(h_w.conj() @ r_s @ h_w)) + sigma_w2
    comm = float(np.sum(np.abs(h_w.conj() @ w_c) ** 2)) if w_c.size else 0.0
    return LambdaPair(lambda0=base, lambda1=base + comm)


def kl_divergence(pair: LambdaPair, num_symbols: int) -> float:
    """KL divergence of the no-communication law from the communication law."""
    ratio = pair.lambda1 / pair.lambda0
    return num_symbols * (math.log(ratio) + 1.0 / ratio - 1.0)


def pinsker_lower_bound(kl: float) -> float:
    """Lower bound on the warden's total detection error, max(0, 1 - sqrt(D/2))."""
    if kl < 0:
        raise ValueError("KL divergence must be nonnegative")
    return max(0.0, 1.0 - math.sqrt(kl / 2.0))


def detector_error_probabilities(
    pair: LambdaPair, num_symbols: int
) -> tuple[float, float]:
    """(P_FA, P_MD) of the optimal radiometer on L i.i.d. samples.

    The likelihood-ratio test reduces to an energy threshold
    tau* = L l0 l1 ln(l1/l0) / (l1 - l0); the sample energy is Gamma(L)
    distributed under either hypothesis, giving regularized gamma tails.
    """
    l0, l1 = pair.lambda0, pair.lambda1
    if not (l1 >= l0 > 0):
        raise ValueError("need lambda1 >= lambda0 > 0")
    ell = float(num_symbols)
    if l1 == l0:
        threshold = ell * l0
    else:
        threshold = ell * l0 * l1 * math.log(l1 / l0) / (l1 - l0)
    p_fa = float(gammaincc(ell, threshold / l0))
    p_md = float(gammainc(ell, threshold / l1))
    return p_fa, p_md


def _ball_project(vec: np.ndarray, radius: float) -> np.ndarray:
    norms = np.linalg.norm(vec, axis=-1, keepdims=True)
    scale = np.where(norms > radius, radius / np.maximum(norms, 1e-300), 1.0)
    return vec * scale


def worst_case_kl(
    h_aw_hat: np.ndarray,
    h_rw_hat: np.ndarray,
    delta_aw: float,
    delta_rw: float,
    theta: np.ndarray,
    g_mat: np.ndarray,
    w_c: np.ndarray,
    r_s: np.ndarray,
    sigma_w2: float,
    num_symbols: int,
    seed: int = 0,
    n_starts: int = 64,
    n_steps: int = 200,
    n_boundary: int = 10_000,
) -> float:
    """Lower bound on max KL over the two channel-error balls.

    Multistart projected gradient ascent over the column-form errors
    (e_aw, e_rw) plus random boundary sampling; the best value found is
    returned.  Acceptance-testing oracle only.
    """
    rng = np.random.default_rng(seed)
    n_a = h_aw_hat.shape[0]
    n_r = h_rw_hat.shape[0]
    # h_w = h_aw + A h_rw with A = G^H diag(conj(theta))
    a_map = g_mat.conj().T * np.conj(theta)[None, :]
    h_hat = h_aw_hat + a_map @ h_rw_hat
    m0 = np.asarray(r_s)
    m1 = m0 + w_c @ w_c.conj().T
    ell = float(num_symbols)

    def kl_batch(e_a: np.ndarray, e_r: np.ndarray) -> np.ndarray:
        h = h_hat[None, :] + e_a + e_r @ a_map.T
        l0 = np.real(np.einsum("bi,ij,bj->b", h.conj(), m0, h)) + sigma_w2
        l1 = np.real(np.einsum("bi,ij,bj->b", h.conj(), m1, h)) + sigma_w2
        ratio = l1 / l0
        return ell * (np.log(ratio) + 1.0 / ratio - 1.0)

    def crandn(shape) -> np.ndarray:
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    best = kl_batch(np.zeros((1, n_a), complex), np.zeros((1, n_r), complex))[0]

    if delta_aw == 0.0 and delta_rw == 0.0:
        return float(best)

    # deterministic seeds: dominant directions of the communication quadratic
    evals, evecs = np.linalg.eigh(m1 - m0)
    lead = evecs[:, -1]
    seeds_a = [delta_aw * lead, -delta_aw * lead]
    seeds_r_raw = a_map.conj().T @ lead
    seeds_r_dir = seeds_r_raw / max(np.linalg.norm(seeds_r_raw), 1e-300)
    seeds_r = [delta_rw * seeds_r_dir, -delta_rw * seeds_r_dir]

    # starts: random interior points plus the deterministic seeds
    e_a = crandn((n_starts, n_a))
    e_a = _ball_project(
        e_a * rng.uniform(0, 1, (n_starts, 1)) ** 0.5, delta_aw
    ) * (delta_aw > 0)
    e_r = crandn((n_starts, n_r))
    e_r = _ball_project(
        e_r * rng.uniform(0, 1, (n_starts, 1)) ** 0.5, delta_rw
    ) * (delta_rw > 0)
    e_a[0] = 0.0
    e_r[0] = 0.0
    for i, (sa, sr) in enumerate(zip(seeds_a, seeds_r)):
        e_a[1 + i] = sa
        e_r[1 + i] = sr

    step_a = 0.1 * delta_aw
    step_r = 0.1 * delta_rw
    for _ in range(n_steps):
        h = h_hat[None, :] + e_a + e_r @ a_map.T
        l0 = np.real(np.einsum("bi,ij,bj->b", h.conj(), m0, h)) + sigma_w2
        l1 = np.real(np.einsum("bi,ij,bj->b", h.conj(), m1, h)) + sigma_w2
        gap = l1 - l0
        d_l1 = ell * gap / l1**2
        d_l0 = -ell * gap / (l0 * l1)
        grad_h = d_l0[:, None] * (h @ m0.T.conj()) + d_l1[:, None] * (h @ m1.T.conj())
        grad_a = grad_h
        grad_r = grad_h @ np.conj(a_map)
        na = np.linalg.norm(grad_a, axis=1, keepdims=True)
        nr = np.linalg.norm(grad_r, axis=1, keepdims=True)
        e_a = _ball_project(e_a + step_a * grad_a / np.maximum(na, 1e-300), delta_aw)
        e_r = _ball_project(e_r + step_r * grad_r / np.maximum(nr, 1e-300), delta_rw)
    best = max(best, float(np.max(kl_batch(e_a, e_r))))

    if n_boundary > 0:
        ba = crandn((n_boundary, n_a))
        ba *= delta_aw / np.maximum(np.linalg.norm(ba, axis=1, keepdims=True), 1e-300)
        br = crandn((n_boundary, n_r))
        br *= delta_rw / np.maximum(np.linalg.norm(br, axis=1, keepdims=True), 1e-300)
        best = max(best, float(np.max(kl_batch(ba, br))))
    return float(best)
