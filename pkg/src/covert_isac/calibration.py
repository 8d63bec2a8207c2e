"""Offline calibration of the channel-error-bound vectors.

For each warden link the bound radius is delta^2 = ||gamma^T C_pred||^2.
gamma is fitted offline: sample state perturbations e ~ N(0, Sigma) over a
grid of representative covariances and anchor states, measure the channel
deviations ||h(chi+e) - h(chi)||, and least-squares fit gamma so that
||Sigma gamma|| tracks the 95th-percentile deviation, then scale up so the
bound covers the target quantile at every grid point.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import least_squares


def batch_los_channels(
    anchor: np.ndarray,
    positions: np.ndarray,
    n_h: int,
    n_v: int,
    rho0: float,
) -> np.ndarray:
    """LoS channels from a UPA at `anchor` to each row of `positions`.

    Vectorized equivalent of channels.los_channel; the zenith set has
    measure zero under the Gaussian perturbations so it is not special-cased.
    """
    diff = positions - anchor[None, :]
    d = np.linalg.norm(diff, axis=1)
    r = np.hypot(diff[:, 0], diff[:, 1])
    sin_el = diff[:, 2] / d
    cos_el = r / d
    sin_az = np.divide(diff[:, 1], r, out=np.zeros_like(r), where=r > 0)
    u = sin_el * sin_az  # horizontal phase slope
    horiz = np.exp(1j * np.pi * np.outer(u, np.arange(n_h)))
    vert = np.exp(1j * np.pi * np.outer(cos_el, np.arange(n_v)))
    # horizontal-major Kronecker order: entry (i_h, i_v) -> i_h * n_v + i_v
    chans = (horiz[:, :, None] * vert[:, None, :]).reshape(len(d), n_h * n_v)
    return (np.sqrt(rho0) / d)[:, None] * chans


def deviation_quantile(
    anchor_pos: np.ndarray,
    state: np.ndarray,
    sigma: np.ndarray,
    n_h: int,
    n_v: int,
    rho0: float,
    rng: np.random.Generator,
    n_samples: int = 10_000,
    quantile: float = 0.95,
) -> float:
    """Quantile of ||h(chi + e) - h(chi)|| for e ~ N(0, sigma)."""
    chol = np.linalg.cholesky(sigma + 1e-12 * np.eye(6))
    perturbations = rng.standard_normal((n_samples, 6)) @ chol.T
    positions = state[None, :3] + perturbations[:, :3]
    h0 = batch_los_channels(anchor_pos, state[None, :3], n_h, n_v, rho0)[0]
    h = batch_los_channels(anchor_pos, positions, n_h, n_v, rho0)
    deviations = np.linalg.norm(h - h0[None, :], axis=1)
    return float(np.quantile(deviations, quantile))


def fit_gamma(
    anchor_pos: np.ndarray,
    states: np.ndarray,
    covariances: list[np.ndarray],
    n_h: int,
    n_v: int,
    rho0: float,
    seed: int,
    n_samples: int = 10_000,
    quantile: float = 0.95,
) -> np.ndarray:
    """Fit the 6-vector gamma for one link over a (state, covariance) grid.

    The returned gamma satisfies ||Sigma gamma|| >= measured quantile at
    every grid point, so the bound covers >= `quantile` of perturbations there.
    """
    rng = np.random.default_rng(seed)
    sigmas, targets = [], []
    for state in np.atleast_2d(states):
        for sigma in covariances:
            q = deviation_quantile(
                anchor_pos, state, sigma, n_h, n_v, rho0, rng, n_samples, quantile
            )
            sigmas.append(sigma)
            targets.append(q)
    targets = np.asarray(targets)

    def residuals(gamma: np.ndarray) -> np.ndarray:
        return np.array(
            [np.linalg.norm(s @ gamma) for s in sigmas]
        ) - targets

    typical = np.mean([np.linalg.norm(s @ np.ones(6)) for s in sigmas])
    x0 = np.full(6, max(np.mean(targets), 1e-12) / max(typical, 1e-12))
    fit = least_squares(residuals, x0, bounds=(0.0, np.inf))
    gamma = fit.x
    # conservative scale-up: never under-cover at a grid point
    ratios = [
        t / max(np.linalg.norm(s @ gamma), 1e-300)
        for s, t in zip(sigmas, targets)
    ]
    return gamma * max(max(ratios), 1.0)
