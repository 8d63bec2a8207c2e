import numpy as np
import pytest
from scipy.constants import c as C_LIGHT

from covert_isac.calibration import batch_los_channels, fit_gamma
from covert_isac.channels import AngleSet, GeometryError, geometry_to_angles, los_channel
from covert_isac.tracking import (
    EkfBelief,
    ErrorBoundParams,
    MeasurementNoise,
    MeasurementVector,
    RadarParams,
    WardenState,
    calibrate_error_bounds,
    ekf_predict,
    ekf_update,
    measurement_function,
    measurement_jacobian,
    measurement_noise_cov,
    posterior_information_form,
    posterior_mse,
    synthesize_measurement,
    transition_matrix,
)

Q_A = np.array([0.0, 0.0, 10.0])
F_C = 3e9

TABLE_PARAMS = RadarParams(
    rho0=1e-3,
    rcs=1.0,
    g_mf=1000.0,
    sigma_r2=1e-13,
    c_tau=1e-6,
    c_doppler=1e5,
    c_azimuth=1.0,
    c_elevation=1.0,
    n_h=5,
    n_v=2,
)


def random_state(rng) -> WardenState:
    # keep well off zenith
    pos = Q_A + np.array(
        [rng.uniform(30, 120), rng.uniform(20, 120), rng.uniform(10, 60)]
    )
    vel = rng.uniform(-20, 20, 3)
    return WardenState(position=pos, velocity=vel)


class TestPredict:
    def test_constant_velocity_step(self):
        belief = EkfBelief(np.array([0, 0, 0, 1.0, 0, 0]), np.zeros((6, 6)))
        out = ekf_predict(belief, 0.1, np.zeros((6, 6)))
        np.testing.assert_allclose(out.mean, [0.1, 0, 0, 1, 0, 0], atol=1e-15)

    def test_additive_process_noise(self):
        q = np.diag([1, 2, 3, 4, 5, 6.0])
        belief = EkfBelief(np.zeros(6), np.zeros((6, 6)))
        out = ekf_predict(belief, 0.1, q)
        np.testing.assert_allclose(out.covariance, q)

    def test_identity_covariance_propagation(self):
        # hand oracle: C' = F F^T, trace computed independently
        belief = EkfBelief(np.zeros(6), np.eye(6))
        out = ekf_predict(belief, 0.1, np.zeros((6, 6)))
        f = transition_matrix(0.1)
        oracle = f @ f.T
        np.testing.assert_allclose(out.covariance, oracle, atol=1e-15)
        assert np.trace(out.covariance) == pytest.approx(np.trace(oracle))

    def test_output_symmetric_psd(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((6, 6))
        belief = EkfBelief(rng.standard_normal(6), a @ a.T)
        out = ekf_predict(belief, 0.1, 0.01 * np.eye(6))
        np.testing.assert_allclose(out.covariance, out.covariance.T)
        assert np.linalg.eigvalsh(out.covariance).min() > 0


class TestMeasurementFunction:
    def test_hand_arithmetic(self):
        state = WardenState(np.array([100.0, 0, 10.0]), np.array([20.0, 0, 0]))
        z = measurement_function(state, Q_A, F_C)
        assert z.tau == pytest.approx(200.0 / C_LIGHT, rel=1e-12)
        assert z.doppler == pytest.approx(2 * 20 * F_C / C_LIGHT, rel=1e-12)
        assert (z.sin_theta, z.cos_theta, z.sin_phi) == (0.0, 1.0, 0.0)

    def test_zero_velocity(self):
        state = WardenState(np.array([50.0, 60, 40.0]), np.zeros(3))
        assert measurement_function(state, Q_A, F_C).doppler == 0.0

    def test_trig_identity(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            z = measurement_function(random_state(rng), Q_A, F_C)
            assert z.sin_theta**2 + z.cos_theta**2 == pytest.approx(1.0, abs=1e-12)

    def test_zenith_rejected(self):
        state = WardenState(np.array([0.0, 0.0, 60.0]), np.ones(3))
        with pytest.raises(GeometryError):
            measurement_function(state, Q_A, F_C)


class TestJacobian:
    def test_doppler_velocity_block(self):
        state = WardenState(np.array([100.0, 0, 10.0]), np.array([20.0, 0, 0]))
        jac = measurement_jacobian(state, Q_A, F_C)
        assert jac[1, 3] == pytest.approx(2 * F_C / C_LIGHT, rel=1e-12)
        np.testing.assert_allclose(jac[1, 4:], 0.0, atol=1e-15)

    def test_delay_velocity_block_zero(self):
        rng = np.random.default_rng(1)
        jac = measurement_jacobian(random_state(rng), Q_A, F_C)
        np.testing.assert_array_equal(jac[0, 3:], np.zeros(3))
        np.testing.assert_array_equal(jac[2:, 3:], np.zeros((3, 3)))

    def test_matches_central_differences(self):
        rng = np.random.default_rng(2)
        h = 1e-4
        for _ in range(100):
            state = random_state(rng)
            chi = state.as_vector()
            jac = measurement_jacobian(state, Q_A, F_C)
            num = np.zeros((5, 6))
            for i in range(6):
                dp = chi.copy()
                dm = chi.copy()
                dp[i] += h
                dm[i] -= h
                zp = measurement_function(WardenState.from_vector(dp), Q_A, F_C)
                zm = measurement_function(WardenState.from_vector(dm), Q_A, F_C)
                num[:, i] = (zp.as_array() - zm.as_array()) / (2 * h)
            scale = np.maximum(np.abs(jac), np.abs(num))
            scale[scale == 0] = 1.0
            assert np.max(np.abs(jac - num) / scale) < 1e-4


class TestMeasurementNoise:
    def test_hand_arithmetic_snr(self):
        r_s = (0.5 / 10) * np.eye(10)
        angles = geometry_to_angles(Q_A, np.array([100.0, 0.0, 10.0]))
        noise = measurement_noise_cov(r_s, angles, TABLE_PARAMS)
        # SNR = 1e-3 * 1 * 1000 * 10 * 0.5 / (1e-13 * 100^4) = 5e5
        assert noise.variances[0] == pytest.approx(1e-6 / 5e5, rel=1e-10)

    def test_doubling_rs_halves_variances(self):
        rng = np.random.default_rng(3)
        m = rng.standard_normal((10, 10)) + 1j * rng.standard_normal((10, 10))
        r_s = m @ m.conj().T
        angles = AngleSet(distance=90.0, azimuth=0.4, elevation=0.3)
        v1 = measurement_noise_cov(r_s, angles, TABLE_PARAMS).variances
        v2 = measurement_noise_cov(2 * r_s, angles, TABLE_PARAMS).variances
        np.testing.assert_allclose(v2, v1 / 2, rtol=1e-12)

    def test_zero_azimuth_kills_cos_noise(self):
        r_s = 0.05 * np.eye(10)
        angles = AngleSet(distance=90.0, azimuth=0.0, elevation=0.3)
        noise = measurement_noise_cov(r_s, angles, TABLE_PARAMS)
        assert noise.variances[3] == 0.0
        assert noise.variances[2] == pytest.approx(
            TABLE_PARAMS.c_azimuth
            / (1e-3 * 1e3 * 10 * 0.5 / (1e-13 * 90.0**4)),
            rel=1e-10,
        )


class TestSynthesize:
    def test_noise_free_constants(self):
        params = RadarParams(
            rho0=1e-3, rcs=1.0, g_mf=1e3, sigma_r2=1e-13,
            c_tau=0.0, c_doppler=0.0, c_azimuth=0.0, c_elevation=0.0,
            n_h=5, n_v=2,
        )
        state = WardenState(np.array([80.0, 20, 50.0]), np.array([-14.0, 14, 0]))
        rng = np.random.default_rng(0)
        z = synthesize_measurement(state, 0.05 * np.eye(10), params, Q_A, F_C, rng)
        np.testing.assert_allclose(
            z.as_array(), measurement_function(state, Q_A, F_C).as_array(), atol=1e-18
        )

    def test_empirical_delay_variance(self):
        state = WardenState(np.array([80.0, 20, 50.0]), np.array([-14.0, 14, 0]))
        r_s = 0.05 * np.eye(10)
        rng = np.random.default_rng(7)
        taus = np.array(
            [
                synthesize_measurement(state, r_s, TABLE_PARAMS, Q_A, F_C, rng).tau
                for _ in range(10_000)
            ]
        )
        angles = geometry_to_angles(Q_A, state.position)
        expected = measurement_noise_cov(r_s, angles, TABLE_PARAMS).variances[0]
        assert np.var(taus) == pytest.approx(expected, rel=0.05)

    def test_deterministic_given_seed(self):
        state = WardenState(np.array([80.0, 20, 50.0]), np.array([-14.0, 14, 0]))
        r_s = 0.05 * np.eye(10)
        z1 = synthesize_measurement(
            state, r_s, TABLE_PARAMS, Q_A, F_C, np.random.default_rng(123)
        )
        z2 = synthesize_measurement(
            state, r_s, TABLE_PARAMS, Q_A, F_C, np.random.default_rng(123)
        )
        np.testing.assert_array_equal(z1.as_array(), z2.as_array())


def random_update_instance(rng):
    state = random_state(rng)
    a = rng.standard_normal((6, 6))
    c_pred = a @ a.T + 0.1 * np.eye(6)
    jac = measurement_jacobian(state, Q_A, F_C)
    # O(1) variances keep both posterior formulas well conditioned
    noise = MeasurementNoise(variances=rng.uniform(0.5, 2.0, 5))
    return state, c_pred, jac, noise


class TestUpdate:
    def test_uninformative_measurement(self):
        rng = np.random.default_rng(11)
        state, c_pred, jac, noise = random_update_instance(rng)
        huge = MeasurementNoise(variances=noise.variances * 1e12)
        belief = EkfBelief(state.as_vector(), c_pred)
        z0 = measurement_function(state, Q_A, F_C)
        z = MeasurementVector.from_array(z0.as_array() + rng.standard_normal(5))
        out = ekf_update(belief, z, jac, huge, z0)
        np.testing.assert_allclose(out.mean, belief.mean, atol=1e-6)
        np.testing.assert_allclose(out.covariance, c_pred, rtol=1e-6)

    def test_certain_prior_unchanged(self):
        rng = np.random.default_rng(12)
        state, _, jac, noise = random_update_instance(rng)
        belief = EkfBelief(state.as_vector(), np.zeros((6, 6)))
        z0 = measurement_function(state, Q_A, F_C)
        z = MeasurementVector.from_array(z0.as_array() + 1.0)
        out = ekf_update(belief, z, jac, noise, z0)
        np.testing.assert_allclose(out.mean, belief.mean, atol=1e-9)
        np.testing.assert_allclose(out.covariance, 0.0, atol=1e-9)

    def test_gain_form_matches_information_form(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            state, c_pred, jac, noise = random_update_instance(rng)
            belief = EkfBelief(state.as_vector(), c_pred)
            z0 = measurement_function(state, Q_A, F_C)
            out = ekf_update(belief, z0, jac, noise, z0)
            info = posterior_information_form(c_pred, jac, noise)
            err = np.linalg.norm(out.covariance - info) / np.linalg.norm(info)
            assert err < 1e-8

    def test_posterior_trace_never_exceeds_prior(self):
        rng = np.random.default_rng(14)
        for _ in range(50):
            state, c_pred, jac, noise = random_update_instance(rng)
            belief = EkfBelief(state.as_vector(), c_pred)
            z0 = measurement_function(state, Q_A, F_C)
            out = ekf_update(belief, z0, jac, noise, z0)
            assert np.trace(out.covariance) <= np.trace(c_pred) + 1e-10


class TestNoiseFreeClosedLoop:
    def test_tracks_constant_velocity_exactly(self):
        # measurement-noise constants all zero; the EKF keeps its default
        # process-noise model so the covariance never collapses to zero
        params = RadarParams(
            rho0=1e-3, rcs=1.0, g_mf=1e3, sigma_r2=1e-13,
            c_tau=0.0, c_doppler=0.0, c_azimuth=0.0, c_elevation=0.0,
            n_h=5, n_v=2,
        )
        delta = 0.1
        q_chi = np.diag([0.01, 0.01, 0.01, 0.25, 0.25, 0.25])
        r_s = 0.05 * np.eye(10)
        for seed in range(5):
            rng = np.random.default_rng(seed)
            true = WardenState(
                np.array([80.0, 20.0, 50.0]), np.array([-14.0, 14.0, 0.0])
            )
            belief = EkfBelief(true.as_vector() + rng.standard_normal(6), np.eye(6))
            for _ in range(5):
                true = WardenState(
                    true.position + delta * true.velocity, true.velocity
                )
                belief = ekf_predict(belief, delta, q_chi)
                pred_state = WardenState.from_vector(belief.mean)
                z = synthesize_measurement(true, r_s, params, Q_A, F_C, rng)
                jac = measurement_jacobian(pred_state, Q_A, F_C)
                angles = geometry_to_angles(Q_A, pred_state.position)
                noise = measurement_noise_cov(r_s, angles, params)
                z_pred = measurement_function(pred_state, Q_A, F_C)
                belief = ekf_update(belief, z, jac, noise, z_pred)
            err = np.linalg.norm(belief.mean[:3] - true.position) ** 2
            assert err / np.linalg.norm(true.position) ** 2 <= 1e-6


class TestPosteriorMse:
    def test_identity(self):
        assert posterior_mse(EkfBelief(np.zeros(6), np.eye(6))) == 6.0

    def test_diag(self):
        c = np.diag(np.arange(1.0, 7.0))
        assert posterior_mse(EkfBelief(np.zeros(6), c)) == 21.0

    def test_eigenvalue_oracle(self):
        rng = np.random.default_rng(31)
        a = rng.standard_normal((6, 6))
        c = a @ a.T
        assert posterior_mse(EkfBelief(np.zeros(6), c)) == pytest.approx(
            np.sum(np.linalg.eigvalsh(c)), rel=1e-12
        )


class TestErrorBounds:
    def test_zero_covariance(self):
        params = ErrorBoundParams(gamma_aw=np.ones(6), gamma_rw=np.ones(6))
        assert calibrate_error_bounds(np.zeros((6, 6)), params) == (0.0, 0.0)

    def test_homogeneity(self):
        rng = np.random.default_rng(41)
        a = rng.standard_normal((6, 6))
        c = a @ a.T
        params = ErrorBoundParams(
            gamma_aw=rng.uniform(0, 1, 6), gamma_rw=rng.uniform(0, 1, 6)
        )
        d1 = calibrate_error_bounds(c, params)
        d4 = calibrate_error_bounds(4 * c, params)
        assert d4[0] ** 2 == pytest.approx(16 * d1[0] ** 2, rel=1e-12)
        assert d4[1] ** 2 == pytest.approx(16 * d1[1] ** 2, rel=1e-12)


class TestGammaCalibration:
    def test_batch_channels_match_scalar_path(self):
        rng = np.random.default_rng(51)
        anchor = np.array([0.0, 0.0, 10.0])
        for _ in range(10):
            pos = anchor + np.array(
                [rng.uniform(20, 100), rng.uniform(20, 100), rng.uniform(5, 50)]
            )
            batch = batch_los_channels(anchor, pos[None, :], 5, 2, 1e-3)[0]
            scalar = los_channel(anchor, pos, 5, 2, -30.0)
            np.testing.assert_allclose(batch, scalar, atol=1e-15)

    def test_fitted_gamma_covers_95_percent(self):
        anchor = np.array([0.0, 0.0, 10.0])
        states = np.array([[80.0, 20.0, 50.0, -14.0, 14.0, 0.0]])
        base = np.diag([1.0, 1.0, 1.0, 0.5, 0.5, 0.5])
        covs = [0.5 * base, base, 2.0 * base]
        gamma = fit_gamma(
            anchor, states, covs, 5, 2, 1e-3, seed=77, n_samples=4000
        )
        assert np.all(gamma >= 0)
        # independent coverage check at a grid point
        rng = np.random.default_rng(99)
        sigma = covs[1]
        delta = np.linalg.norm(sigma @ gamma)
        chol = np.linalg.cholesky(sigma + 1e-12 * np.eye(6))
        pert = rng.standard_normal((10_000, 6)) @ chol.T
        h0 = batch_los_channels(anchor, states[0, None, :3], 5, 2, 1e-3)[0]
        h = batch_los_channels(anchor, states[0, :3] + pert[:, :3], 5, 2, 1e-3)
        dev = np.linalg.norm(h - h0[None, :], axis=1)
        assert np.mean(dev <= delta) >= 0.95
