"""Geometric and stochastic channel models.

All links use the large-scale power law rho0 * d^(-alpha) with rho0 the
channel power at one meter.  Air-ground links (Alice/RIS to the warden) are
line-of-sight with half-wavelength UPA steering vectors; user links are
Rayleigh flat fading.  Antenna indexing is horizontal-major: the steering
vector is the Kronecker product of the horizontal factor and the vertical
factor, which is the wire format for every channel vector in this package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GeometryError(ValueError):
    """Raised for singular geometry (zenith: target directly above/below)."""


@dataclass(frozen=True)
class AngleSet:
    """Distance plus departure angles of a link.

    azimuth is resolved over the full circle with atan2 so that
    (sin(azimuth), cos(azimuth)) match the radar measurement model;
    elevation = asin(dz / distance) lies in [-pi/2, pi/2].
    """

    distance: float
    azimuth: float
    elevation: float


def geometry_to_angles(src: np.ndarray, dst: np.ndarray) -> AngleSet:
    """Distance, azimuth and elevation of the link src -> dst.

    Raises GeometryError when dst is at the zenith of src (dx = dy = 0),
    where the azimuth is undefined.
    """
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    diff = dst - src
    d = float(np.linalg.norm(diff))
    if d == 0.0:
        raise GeometryError("source and destination coincide")
    r_xy = float(np.hypot(diff[0], diff[1]))
    if r_xy == 0.0:
        raise GeometryError("zenith geometry: azimuth undefined")
    azimuth = float(np.arctan2(diff[1], diff[0]))
    elevation = float(np.arcsin(np.clip(diff[2] / d, -1.0, 1.0)))
    return AngleSet(distance=d, azimuth=azimuth, elevation=elevation)


def steering_vector(theta: float, phi: float, n_h: int, n_v: int) -> np.ndarray:
    """Half-wavelength UPA steering vector for azimuth theta, elevation phi.

    Horizontal element i contributes phase pi*i*sin(phi)*sin(theta), vertical
    element k contributes pi*k*cos(phi); entries are ordered horizontal-major
    via the Kronecker product.  Every entry has unit modulus.
    """
    if n_h < 1 or n_v < 1:
        raise ValueError("array dimensions must be >= 1")
    horiz = np.exp(1j * np.pi * np.arange(n_h) * np.sin(phi) * np.sin(theta))
    vert = np.exp(1j * np.pi * np.arange(n_v) * np.cos(phi))
    return np.kron(horiz, vert)


def path_loss_gain(d: float, alpha: float, rho0_db: float) -> float:
    """Linear power gain rho0 * d^(-alpha) with rho0 given in dB."""
    if d <= 0.0:
        raise ValueError(f"distance must be positive, got {d}")
    return float(10.0 ** ((rho0_db - 10.0 * alpha * np.log10(d)) / 10.0))


def los_channel(
    src: np.ndarray, dst: np.ndarray, n_h: int, n_v: int, rho0_db: float
) -> np.ndarray:
    """LoS channel column vector sqrt(rho0 / d^2) * a(theta, phi) for src -> dst.

    The receiver is a single antenna; the steering vector lives on the
    src-side UPA of shape (n_h, n_v).
    """
    ang = geometry_to_angles(src, dst)
    scale = np.sqrt(path_loss_gain(ang.distance, 2.0, rho0_db))
    return scale * steering_vector(ang.azimuth, ang.elevation, n_h, n_v)


def los_mimo_channel(
    src: np.ndarray,
    dst: np.ndarray,
    src_shape: tuple[int, int],
    dst_shape: tuple[int, int],
    rho0_db: float,
    alpha: float,
) -> np.ndarray:
    """Rank-one LoS MIMO channel from a UPA at src to a UPA at dst.

    Returns sqrt(rho0 * d^-alpha) * a_dst(dst->src angles) a_src(src->dst)^H
    of shape (dst elements, src elements).  Used for the Alice-RIS link.
    """
    fwd = geometry_to_angles(src, dst)
    rev = geometry_to_angles(dst, src)
    scale = np.sqrt(path_loss_gain(fwd.distance, alpha, rho0_db))
    a_src = steering_vector(fwd.azimuth, fwd.elevation, *src_shape)
    a_dst = steering_vector(rev.azimuth, rev.elevation, *dst_shape)
    return scale * np.outer(a_dst, a_src.conj())


def target_response(
    q_a: np.ndarray,
    q_w: np.ndarray,
    rcs: float,
    rho0_db: float,
    n_h: int,
    n_v: int,
) -> np.ndarray:
    """Round-trip target response matrix sqrt(rho0*rcs/d^4) * a a^H.

    Hermitian, PSD and rank one by construction.
    """
    ang = geometry_to_angles(q_a, q_w)
    rho0 = 10.0 ** (rho0_db / 10.0)
    scale = np.sqrt(rho0 * rcs / ang.distance**4)
    a = steering_vector(ang.azimuth, ang.elevation, n_h, n_v)
    return scale * np.outer(a, a.conj())


def sample_rayleigh_channel(
    rng: np.random.Generator, gain: float, dim: int
) -> np.ndarray:
    """I.i.d. circularly symmetric complex Gaussian vector, per-entry variance = gain."""
    if gain < 0.0:
        raise ValueError("gain must be nonnegative")
    sigma = np.sqrt(gain / 2.0)
    return sigma * (rng.standard_normal(dim) + 1j * rng.standard_normal(dim))


def effective_channel(
    h_d: np.ndarray, h_r: np.ndarray, g_mat: np.ndarray, theta: np.ndarray
) -> np.ndarray:
    """Effective downlink channel h with h^H = h_d^H + h_r^H diag(theta) G.

    Returned as a column vector of size N_A.
    """
    h_d = np.asarray(h_d)
    h_r = np.asarray(h_r)
    g_mat = np.asarray(g_mat)
    theta = np.asarray(theta)
    n_r, n_a = g_mat.shape
    if h_d.shape != (n_a,) or h_r.shape != (n_r,) or theta.shape != (n_r,):
        raise ValueError(
            f"shape mismatch: h_d {h_d.shape}, h_r {h_r.shape}, "
            f"G {g_mat.shape}, theta {theta.shape}"
        )
    # h^H = h_d^H + h_r^H diag(theta) G  =>  h = h_d + G^H diag(conj(theta)) h_r
    return h_d + g_mat.conj().T @ (np.conj(theta) * h_r)


@dataclass
class ChannelSet:
    """Per-slot channel state consumed by the optimizer.

    Legitimate channels are known exactly; the warden channels are the
    EKF-predicted estimates together with the uncertainty-ball radii.
    """

    h_d: np.ndarray  # (K, N_A) Alice-Bob direct channels
    h_r: np.ndarray  # (K, N_R) RIS-Bob channels
    g_mat: np.ndarray  # (N_R, N_A) Alice-RIS channel
    h_aw_hat: np.ndarray  # (N_A,) predicted Alice-warden channel
    h_rw_hat: np.ndarray  # (N_R,) predicted RIS-warden channel
    delta_aw: float  # Alice-warden error-ball radius
    delta_rw: float  # RIS-warden error-ball radius

    @property
    def n_users(self) -> int:
        return self.h_d.shape[0]

    @property
    def n_tx(self) -> int:
        return self.h_d.shape[1]

    @property
    def n_ris(self) -> int:
        return self.h_r.shape[1]

    def effective_user_channels(self, theta: np.ndarray) -> np.ndarray:
        """Stack of effective Bob channels for the given RIS phases, shape (K, N_A)."""
        return np.stack(
            [
                effective_channel(self.h_d[k], self.h_r[k], self.g_mat, theta)
                for k in range(self.n_users)
            ]
        )

    def effective_warden_channel(self, theta: np.ndarray) -> np.ndarray:
        """Predicted effective warden channel for the given RIS phases."""
        return effective_channel(self.h_aw_hat, self.h_rw_hat, self.g_mat, theta)
