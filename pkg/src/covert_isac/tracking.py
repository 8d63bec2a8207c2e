"""Extended Kalman filter over the warden's 6-D kinematic state.

State chi = [position, velocity]; constant-velocity prediction; radar
measurement z = [tau, doppler, sin(az), cos(az), sin(el)] whose noise
covariance scales inversely with the matched-filter output SNR and therefore
with the sensing illumination a^H R_s a.  Channel-error-bound calibration
maps the predicted covariance to norm bounds on the warden channel errors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from .channels import AngleSet, GeometryError, steering_vector


class EkfNumericsError(RuntimeError):
    """Raised when the innovation covariance cannot be factorized."""


class ZeroIlluminationError(ValueError):
    """Raised when the sensing covariance deposits no power on the target."""


@dataclass(frozen=True)
class WardenState:
    """Kinematic state: position (m) and velocity (m/s), both 3-vectors."""

    position: np.ndarray
    velocity: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity]).astype(float)

    @staticmethod
    def from_vector(chi: np.ndarray) -> "WardenState":
        chi = np.asarray(chi, dtype=float)
        return WardenState(position=chi[:3].copy(), velocity=chi[3:].copy())


@dataclass
class EkfBelief:
    """Gaussian belief over the warden state: mean (6,) and covariance (6, 6)."""

    mean: np.ndarray
    covariance: np.ndarray

    def copy(self) -> "EkfBelief":
        return EkfBelief(self.mean.copy(), self.covariance.copy())


@dataclass(frozen=True)
class MeasurementVector:
    """Radar measurement: delay (s), doppler (Hz), sin/cos azimuth, sin elevation."""

    tau: float
    doppler: float
    sin_theta: float
    cos_theta: float
    sin_phi: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.tau, self.doppler, self.sin_theta, self.cos_theta, self.sin_phi]
        )

    @staticmethod
    def from_array(z: np.ndarray) -> "MeasurementVector":
        return MeasurementVector(*(float(v) for v in z))


@dataclass(frozen=True)
class MeasurementNoise:
    """Diagonal measurement-noise covariance, stored as the variance vector."""

    variances: np.ndarray

    @property
    def covariance(self) -> np.ndarray:
        return np.diag(self.variances)


@dataclass(frozen=True)
class RadarParams:
    """Constants entering the matched-filter SNR and noise-variance model."""

    rho0: float  # channel power at 1 m, linear
    rcs: float  # radar cross-section (m^2)
    g_mf: float  # matched-filter gain
    sigma_r2: float  # radar receive noise power (W)
    c_tau: float  # delay-estimation constant
    c_doppler: float  # doppler-estimation constant
    c_azimuth: float  # azimuth-estimation constant
    c_elevation: float  # elevation-estimation constant
    n_h: int  # transmit UPA horizontal elements
    n_v: int  # transmit UPA vertical elements

    @property
    def n_tx(self) -> int:
        return self.n_h * self.n_v


@dataclass(frozen=True)
class ErrorBoundParams:
    """Calibration vectors mapping predicted covariance to channel error radii."""

    gamma_aw: np.ndarray
    gamma_rw: np.ndarray


def transition_matrix(delta: float) -> np.ndarray:
    """Constant-velocity transition F = [[I3, delta*I3], [0, I3]]."""
    f = np.eye(6)
    f[:3, 3:] = delta * np.eye(3)
    return f


def ekf_predict(belief: EkfBelief, delta: float, process_noise: np.ndarray) -> EkfBelief:
    """Time update: mean <- F mean, C <- F C F^T + Q."""
    f = transition_matrix(delta)
    mean = f @ belief.mean
    cov = f @ belief.covariance @ f.T + process_noise
    return EkfBelief(mean=mean, covariance=0.5 * (cov + cov.T))


def measurement_function(
    state: WardenState, q_a: np.ndarray, f_c: float
) -> MeasurementVector:
    """Noise-free measurement of the state seen from the radar at q_a."""
    p = state.position - np.asarray(q_a, dtype=float)
    d = float(np.linalg.norm(p))
    r = float(np.hypot(p[0], p[1]))
    if r == 0.0:
        raise GeometryError("zenith geometry: azimuth measurement undefined")
    tau = 2.0 * d / SPEED_OF_LIGHT
    doppler = 2.0 * float(state.velocity @ p) * f_c / (SPEED_OF_LIGHT * d)
    return MeasurementVector(
        tau=tau,
        doppler=doppler,
        sin_theta=p[1] / r,
        cos_theta=p[0] / r,
        sin_phi=p[2] / d,
    )


def measurement_jacobian(state: WardenState, q_a: np.ndarray, f_c: float) -> np.ndarray:
    """5x6 Jacobian of the measurement function at the given state."""
    p = state.position - np.asarray(q_a, dtype=float)
    v = state.velocity
    d = float(np.linalg.norm(p))
    r = float(np.hypot(p[0], p[1]))
    if r == 0.0:
        raise GeometryError("zenith geometry: Jacobian singular")
    jac = np.zeros((5, 6))
    # delay row: d(tau)/dq = 2 p / (c d), zero velocity block
    jac[0, :3] = 2.0 * p / (SPEED_OF_LIGHT * d)
    # doppler row
    vp = float(v @ p)
    jac[1, :3] = 2.0 * f_c * (v * d**2 - vp * p) / (SPEED_OF_LIGHT * d**3)
    jac[1, 3:] = 2.0 * f_c * p / (SPEED_OF_LIGHT * d)
    # sin(azimuth) row
    jac[2, 0] = -p[1] * p[0] / r**3
    jac[2, 1] = p[0] ** 2 / r**3
    # cos(azimuth) row
    jac[3, 0] = p[1] ** 2 / r**3
    jac[3, 1] = -p[0] * p[1] / r**3
    # sin(elevation) row
    jac[4, 0] = -p[2] * p[0] / d**3
    jac[4, 1] = -p[2] * p[1] / d**3
    jac[4, 2] = r**2 / d**3
    return jac


def matched_filter_snr(r_s: np.ndarray, angles: AngleSet, params: RadarParams) -> float:
    """Output SNR of the matched filter for sensing covariance r_s at the target."""
    a = steering_vector(angles.azimuth, angles.elevation, params.n_h, params.n_v)
    illum = float(np.real(a.conj() @ r_s @ a))
    if illum <= 0.0:
        raise ZeroIlluminationError("a^H R_s a must be positive for sensing")
    return (
        params.rho0
        * params.rcs
        * params.g_mf
        * params.n_tx
        * illum
        / (params.sigma_r2 * angles.distance**4)
    )


def measurement_noise_cov(
    r_s: np.ndarray, predicted: AngleSet, params: RadarParams
) -> MeasurementNoise:
    """Diagonal measurement noise for the given illumination and geometry.

    Raw angle variances are mapped onto the sin/cos components with the
    high-SNR approximations sigma_sin(az)^2 ~ cos^2(az) sigma_az^2,
    sigma_cos(az)^2 ~ sin^2(az) sigma_az^2, sigma_sin(el)^2 ~ cos^2(el) sigma_el^2.
    """
    snr = matched_filter_snr(r_s, predicted, params)
    var_tau = params.c_tau / snr
    var_doppler = params.c_doppler / snr
    var_az = params.c_azimuth / snr
    var_el = params.c_elevation / snr
    cos_az2 = np.cos(predicted.azimuth) ** 2
    cos_el2 = np.cos(predicted.elevation) ** 2
    variances = np.array(
        [
            var_tau,
            var_doppler,
            cos_az2 * var_az,
            (1.0 - cos_az2) * var_az,
            cos_el2 * var_el,
        ]
    )
    return MeasurementNoise(variances=variances)


def synthesize_measurement(
    true_state: WardenState,
    r_s: np.ndarray,
    params: RadarParams,
    q_a: np.ndarray,
    f_c: float,
    rng: np.random.Generator,
) -> MeasurementVector:
    """Simulated radar measurement: true-geometry mean plus Gaussian noise.

    The noise covariance is evaluated at the TRUE geometry; the tracker
    consumes it with the predicted-geometry covariance instead, keeping
    simulator ground truth separate from tracker knowledge.
    """
    p = true_state.position - np.asarray(q_a, dtype=float)
    d = float(np.linalg.norm(p))
    r = float(np.hypot(p[0], p[1]))
    angles = AngleSet(
        distance=d,
        azimuth=float(np.arctan2(p[1], p[0])),
        elevation=float(np.arcsin(np.clip(p[2] / d, -1, 1))),
    )
    if r == 0.0:
        raise GeometryError("zenith geometry")
    noise = measurement_noise_cov(r_s, angles, params)
    clean = measurement_function(true_state, q_a, f_c).as_array()
    z = clean + np.sqrt(noise.variances) * rng.standard_normal(5)
    return MeasurementVector.from_array(z)


def ekf_update(
    belief_pred: EkfBelief,
    z: MeasurementVector,
    jacobian: np.ndarray,
    noise: MeasurementNoise,
    predicted_meas: MeasurementVector,
) -> EkfBelief:
    """Measurement update in gain form.

    The innovation covariance is solved in row-equilibrated coordinates so
    that the wildly different measurement scales (seconds vs Hz) do not
    destroy the factorization.
    """
    c_pred = belief_pred.covariance
    s = jacobian @ c_pred @ jacobian.T + noise.covariance
    s = 0.5 * (s + s.T)
    scale = np.sqrt(np.maximum(np.diag(s), 0.0))
    floor = 1e-15 * (np.max(scale) if np.max(scale) > 0 else 1.0) + 1e-300
    scale = np.maximum(scale, floor)
    d_inv = 1.0 / scale
    s_bal = s * d_inv[:, None] * d_inv[None, :]
    s_bal += 1e-13 * np.eye(5)
    try:
        # K = C J^T S^{-1} = C J^T D (D S D)^{-1} D
        rhs = np.linalg.solve(s_bal, np.diag(d_inv))
        gain = c_pred @ jacobian.T @ (d_inv[:, None] * rhs)
    except np.linalg.LinAlgError as exc:
        raise EkfNumericsError("singular innovation covariance") from exc
    innovation = z.as_array() - predicted_meas.as_array()
    mean = belief_pred.mean + gain @ innovation
    cov = (np.eye(6) - gain @ jacobian) @ c_pred
    return EkfBelief(mean=mean, covariance=0.5 * (cov + cov.T))


def posterior_information_form(
    c_pred: np.ndarray, jacobian: np.ndarray, noise: MeasurementNoise
) -> np.ndarray:
    """Posterior covariance via (C^-1 + J^T Q_Z^-1 J)^-1; oracle for ekf_update."""
    info = np.linalg.inv(c_pred) + jacobian.T @ np.diag(1.0 / noise.variances) @ jacobian
    cov = np.linalg.inv(info)
    return 0.5 * (cov + cov.T)


def posterior_mse(belief: EkfBelief) -> float:
    """Tracking posterior MSE, tr(C)."""
    return float(np.trace(belief.covariance))


def calibrate_error_bounds(
    c_pred: np.ndarray, params: ErrorBoundParams
) -> tuple[float, float]:
    """Channel error radii (delta_aw, delta_rw) with delta^2 = ||gamma^T C_pred||^2."""
    delta_aw = float(np.linalg.norm(params.gamma_aw @ c_pred))
    delta_rw = float(np.linalg.norm(params.gamma_rw @ c_pred))
    return delta_aw, delta_rw
