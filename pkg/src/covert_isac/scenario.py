"""Scenario configuration: physical constants, geometry, and algorithm knobs.

Field defaults follow the reference system setup (5x2 transmit UPA, RIS at
[60, 60, 10] m, four users around [45, 90, 10] m, a 20 m/s aerial warden,
T = 7 s frames of 0.1 s slots).  Powers are stored in dBm/dB exactly as
usually quoted; linear-unit accessors do the conversions.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .covertness import CovertBudget
from .tracking import ErrorBoundParams, RadarParams


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_lin(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass
class ScenarioConfig:
    # arrays
    n_h: int = 5
    n_v: int = 2
    n_ris: int = 10
    ris_shape: tuple[int, int] | None = None  # defaults to (n_ris // 2, 2)

    # frame structure
    frame_duration_s: float = 7.0
    slot_duration_s: float = 0.1
    symbols_per_slot: int = 1000

    # powers and noise
    p_tx_dbm: float = 30.0
    noise_bob_dbm: float = -90.0
    noise_willie_dbm: float = -90.0
    noise_radar_dbm: float = -100.0

    # covertness and sensing requirements
    epsilon: float = 0.05
    mse_max: float = 7.0

    # radar measurement model
    g_mf: float = 1000.0
    f_c_hz: float = 3e9
    c_tau: float = 1e-6
    c_doppler: float = 1e5
    c_azimuth: float = 1.0
    c_elevation: float = 1.0
    rcs: float = 1.0

    # large-scale fading
    rho0_db: float = -30.0
    alpha_alice_bob: float = 4.0
    alpha_ris_bob: float = 2.0
    alpha_alice_ris: float = 2.2

    # geometry
    alice_pos: tuple[float, float, float] = (0.0, 0.0, 10.0)
    ris_pos: tuple[float, float, float] = (60.0, 60.0, 10.0)
    bob_center: tuple[float, float, float] = (45.0, 90.0, 10.0)
    bob_radius: float = 5.0
    n_users: int = 4

    # warden motion
    warden_init_pos: tuple[float, float, float] = (80.0, 20.0, 50.0)
    warden_speed: float = 20.0
    warden_init_heading_deg: float = 135.0
    heading_change_min: float = -np.pi / 18.0
    heading_change_max: float = 0.0

    # EKF model
    process_noise_pos_std: float = 0.1
    process_noise_vel_std: float = 0.5
    init_cov_diag: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    gamma_aw: tuple[float, ...] | None = None  # calibrated lazily when None
    gamma_rw: tuple[float, ...] | None = None

    # algorithm thresholds
    eps_out: float = 1e-4
    eps_in1: float = 1e-4
    eps_in2: float = 0.999
    max_outer: int = 30
    max_inner: int = 50
    srocr_step0: float = 0.1
    rank_tol: float = 0.999

    # solver
    feas_tol: float = 1e-7
    rel_gap: float = 1e-6
    solver_max_iter: int = 200

    master_seed: int = 0

    def __post_init__(self):
        n = round(self.frame_duration_s / self.slot_duration_s)
        if abs(n * self.slot_duration_s - self.frame_duration_s) > 1e-9:
            raise ValueError("frame duration must be an integer number of slots")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.ris_shape is None:
            if self.n_ris % 2 == 0:
                self.ris_shape = (self.n_ris // 2, 2)
            else:
                self.ris_shape = (self.n_ris, 1)
        elif self.ris_shape[0] * self.ris_shape[1] != self.n_ris:
            raise ValueError("ris_shape does not match n_ris")

    # ---------------- derived quantities ----------------
    @property
    def n_slots(self) -> int:
        return round(self.frame_duration_s / self.slot_duration_s)

    @property
    def n_tx(self) -> int:
        return self.n_h * self.n_v

    @property
    def p_tx_w(self) -> float:
        return dbm_to_watt(self.p_tx_dbm)

    @property
    def sigma_b2_w(self) -> float:
        return dbm_to_watt(self.noise_bob_dbm)

    @property
    def sigma_w2_w(self) -> float:
        return dbm_to_watt(self.noise_willie_dbm)

    @property
    def sigma_r2_w(self) -> float:
        return dbm_to_watt(self.noise_radar_dbm)

    @property
    def rho0_lin(self) -> float:
        return db_to_lin(self.rho0_db)

    def process_noise(self) -> np.ndarray:
        p, v = self.process_noise_pos_std**2, self.process_noise_vel_std**2
        return np.diag([p, p, p, v, v, v])

    def init_cov(self) -> np.ndarray:
        return np.diag(np.asarray(self.init_cov_diag, dtype=float))

    def warden_init_velocity(self) -> np.ndarray:
        heading = np.deg2rad(self.warden_init_heading_deg)
        return self.warden_speed * np.array([np.cos(heading), np.sin(heading), 0.0])

    def radar_params(self) -> RadarParams:
        return RadarParams(
            rho0=self.rho0_lin,
            rcs=self.rcs,
            g_mf=self.g_mf,
            sigma_r2=self.sigma_r2_w,
            c_tau=self.c_tau,
            c_doppler=self.c_doppler,
            c_azimuth=self.c_azimuth,
            c_elevation=self.c_elevation,
            n_h=self.n_h,
            n_v=self.n_v,
        )

    def covert_budget(self) -> CovertBudget:
        return CovertBudget.from_level(self.epsilon, self.symbols_per_slot)

    def error_bound_params(self) -> ErrorBoundParams:
        gamma_aw, gamma_rw = self.resolve_gammas()
        return ErrorBoundParams(gamma_aw=gamma_aw, gamma_rw=gamma_rw)

    def resolve_gammas(self) -> tuple[np.ndarray, np.ndarray]:
        """Stored calibration vectors, or the lazily fitted defaults."""
        if self.gamma_aw is not None and self.gamma_rw is not None:
            return (
                np.asarray(self.gamma_aw, dtype=float),
                np.asarray(self.gamma_rw, dtype=float),
            )
        from .calibration import fit_gamma

        key = _gamma_cache_key(self)
        if key not in _GAMMA_CACHE:
            states = _calibration_states(self)
            base = np.diag([1.0, 1.0, 1.0, 0.5, 0.5, 0.5])
            covs = [0.5 * base, 2.0 * base, 8.0 * base]
            gamma_aw = fit_gamma(
                np.asarray(self.alice_pos),
                states,
                covs,
                self.n_h,
                self.n_v,
                self.rho0_lin,
                seed=20240 + 1,
                n_samples=4000,
            )
            gamma_rw = fit_gamma(
                np.asarray(self.ris_pos),
                states,
                covs,
                self.ris_shape[0],
                self.ris_shape[1],
                self.rho0_lin,
                seed=20240 + 2,
                n_samples=4000,
            )
            _GAMMA_CACHE[key] = (gamma_aw, gamma_rw)
        return _GAMMA_CACHE[key]

    # ---------------- serialization ----------------
    def to_dict(self) -> dict:
        out = asdict(self)
        out["heading_change_min"] = float(self.heading_change_min)
        out["heading_change_max"] = float(self.heading_change_max)
        return out

    @staticmethod
    def from_dict(data: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(ScenarioConfig)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        coerced = dict(data)
        for key in (
            "ris_shape",
            "alice_pos",
            "ris_pos",
            "bob_center",
            "warden_init_pos",
            "init_cov_diag",
            "gamma_aw",
            "gamma_rw",
        ):
            if key in coerced and coerced[key] is not None:
                coerced[key] = tuple(coerced[key])
        return ScenarioConfig(**coerced)

    @staticmethod
    def from_file(path: str) -> "ScenarioConfig":
        with open(path) as fh:
            return ScenarioConfig.from_dict(json.load(fh))

    def to_file(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


_GAMMA_CACHE: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}


def _gamma_cache_key(cfg: ScenarioConfig) -> tuple:
    return (
        cfg.alice_pos,
        cfg.ris_pos,
        cfg.warden_init_pos,
        cfg.n_h,
        cfg.n_v,
        cfg.ris_shape,
        round(cfg.rho0_db, 9),
        cfg.warden_init_heading_deg,
        cfg.warden_speed,
    )


def _calibration_states(cfg: ScenarioConfig) -> np.ndarray:
    """Representative warden states along the nominal trajectory."""
    pos = np.asarray(cfg.warden_init_pos, dtype=float)
    vel = cfg.warden_init_velocity()
    states = []
    for t in (0.0, 0.5 * cfg.frame_duration_s, cfg.frame_duration_s):
        states.append(np.concatenate([pos + t * vel, vel]))
    return np.asarray(states)
