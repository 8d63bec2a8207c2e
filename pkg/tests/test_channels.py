import numpy as np
import pytest

from covert_isac.channels import (
    ChannelSet,
    GeometryError,
    effective_channel,
    geometry_to_angles,
    los_channel,
    los_mimo_channel,
    path_loss_gain,
    sample_rayleigh_channel,
    steering_vector,
    target_response,
)


class TestSteeringVector:
    def test_symmetry_case_all_ones(self):
        # sin(phi)sin(theta)=0 and cos(phi)=0 kill both phase ramps
        a = steering_vector(0.0, np.pi / 2, 5, 2)
        np.testing.assert_allclose(a, np.ones(10), atol=1e-12)

    def test_single_element(self):
        a = steering_vector(1.234, -0.5, 1, 1)
        np.testing.assert_allclose(a, [1.0 + 0j], atol=1e-15)

    def test_half_turn(self):
        a = steering_vector(np.pi / 2, np.pi / 2, 2, 1)
        np.testing.assert_allclose(a, [1.0, -1.0], atol=1e-12)

    def test_unit_modulus_and_norm(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            theta = rng.uniform(-np.pi, np.pi)
            phi = rng.uniform(-np.pi / 2, np.pi / 2)
            n_h = rng.integers(1, 7)
            n_v = rng.integers(1, 5)
            a = steering_vector(theta, phi, n_h, n_v)
            assert np.max(np.abs(np.abs(a) - 1.0)) < 1e-12
            assert abs(np.linalg.norm(a) ** 2 - n_h * n_v) < 1e-12

    def test_kron_order_is_horizontal_major(self):
        theta, phi = 0.7, 0.3
        a = steering_vector(theta, phi, 3, 2)
        horiz = np.exp(1j * np.pi * np.arange(3) * np.sin(phi) * np.sin(theta))
        vert = np.exp(1j * np.pi * np.arange(2) * np.cos(phi))
        # entry (i_h, i_v) lives at index i_h * n_v + i_v
        for ih in range(3):
            for iv in range(2):
                assert a[ih * 2 + iv] == pytest.approx(horiz[ih] * vert[iv])

    def test_rejects_empty_array(self):
        with pytest.raises(ValueError):
            steering_vector(0.0, 0.0, 0, 2)


class TestPathLoss:
    def test_reference_distance(self):
        assert path_loss_gain(1.0, 3.7, -30.0) == pytest.approx(1e-3, rel=1e-12)

    def test_direct_evaluation(self):
        assert path_loss_gain(100.0, 2.0, -30.0) == pytest.approx(1e-7, rel=1e-12)
        assert path_loss_gain(10.0, 4.0, -30.0) == pytest.approx(1e-7, rel=1e-12)

    def test_nonpositive_distance(self):
        with pytest.raises(ValueError):
            path_loss_gain(0.0, 2.0, -30.0)
        with pytest.raises(ValueError):
            path_loss_gain(-1.0, 2.0, -30.0)


class TestGeometry:
    def test_axis_aligned_x(self):
        ang = geometry_to_angles(np.array([0, 0, 10.0]), np.array([100, 0, 10.0]))
        assert ang.distance == pytest.approx(100.0)
        assert ang.azimuth == pytest.approx(0.0)
        assert ang.elevation == pytest.approx(0.0)

    def test_axis_aligned_y(self):
        ang = geometry_to_angles(np.array([0, 0, 10.0]), np.array([0, 100, 10.0]))
        assert ang.distance == pytest.approx(100.0)
        assert ang.azimuth == pytest.approx(np.pi / 2)
        assert ang.elevation == pytest.approx(0.0)

    def test_345_triangle(self):
        ang = geometry_to_angles(np.zeros(3), np.array([3.0, 4.0, 0.0]))
        assert ang.distance == pytest.approx(5.0)
        assert np.sin(ang.azimuth) == pytest.approx(0.8)

    def test_quadrant_resolution(self):
        # negative dx must flip cos(azimuth) negative; plain asin cannot do that
        ang = geometry_to_angles(np.zeros(3), np.array([-3.0, 4.0, 0.0]))
        assert np.sin(ang.azimuth) == pytest.approx(0.8)
        assert np.cos(ang.azimuth) == pytest.approx(-0.6)

    def test_zenith_rejected(self):
        with pytest.raises(GeometryError):
            geometry_to_angles(np.zeros(3), np.array([0.0, 0.0, 50.0]))

    def test_coincident_rejected(self):
        with pytest.raises(GeometryError):
            geometry_to_angles(np.ones(3), np.ones(3))


class TestLosChannel:
    def test_entry_modulus(self):
        h = los_channel(np.array([0, 0, 10.0]), np.array([100, 0, 10.0]), 5, 2, -30.0)
        np.testing.assert_allclose(np.abs(h), np.sqrt(1e-7), rtol=1e-10)

    def test_hand_evaluated_pattern(self):
        # theta = phi = 0: horizontal factor all ones, vertical factor [1, -1]
        h = los_channel(np.array([0, 0, 10.0]), np.array([100, 0, 10.0]), 5, 2, -30.0)
        expected = np.sqrt(1e-7) * np.kron(np.ones(5), np.array([1.0, -1.0]))
        np.testing.assert_allclose(h, expected, atol=1e-15)

    def test_scalar_case(self):
        h = los_channel(np.zeros(3), np.array([30.0, 40.0, 0.0]), 1, 1, -30.0)
        assert h.shape == (1,)
        assert abs(h[0]) == pytest.approx(np.sqrt(1e-3) / 50.0)

    def test_modulus_constant_across_entries(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            dst = rng.uniform(10, 100, 3)
            h = los_channel(np.zeros(3), dst, 4, 3, -30.0)
            mods = np.abs(h)
            assert np.max(mods) - np.min(mods) < 1e-15


class TestTargetResponse:
    def test_rank_one_hermitian(self):
        H = target_response(
            np.array([0, 0, 10.0]), np.array([80, 20, 50.0]), 1.0, -30.0, 5, 2
        )
        np.testing.assert_allclose(H, H.conj().T, atol=1e-18)
        w = np.linalg.eigvalsh(H)
        assert w[-1] > 0
        assert np.all(np.abs(w[:-1]) <= 1e-12 * w[-1])

    def test_scale_factor(self):
        H = target_response(np.zeros(3), np.array([6.0, 8.0, 0.0]), 1.0, -30.0, 5, 2)
        # d = 10: sqrt(1e-3 / 1e4) = sqrt(1e-7)
        scale = np.sqrt(1e-7)
        assert np.abs(H[0, 0]) == pytest.approx(scale, rel=1e-12)

    def test_trace_over_scale_is_antenna_count(self):
        H = target_response(np.zeros(3), np.array([6.0, 8.0, 0.0]), 1.0, -30.0, 5, 2)
        scale = np.sqrt(1e-7)
        assert np.trace(H).real / scale == pytest.approx(10.0, rel=1e-12)


class TestRayleigh:
    def test_zero_gain(self):
        rng = np.random.default_rng(0)
        h = sample_rayleigh_channel(rng, 0.0, 8)
        np.testing.assert_array_equal(h, np.zeros(8))

    def test_per_entry_variance(self):
        rng = np.random.default_rng(42)
        draws = sample_rayleigh_channel(rng, 2.5, 100_000)
        assert np.mean(np.abs(draws) ** 2) == pytest.approx(2.5, rel=0.02)

    def test_deterministic_given_seed(self):
        a = sample_rayleigh_channel(np.random.default_rng(11), 1.0, 16)
        b = sample_rayleigh_channel(np.random.default_rng(11), 1.0, 16)
        np.testing.assert_array_equal(a, b)

    def test_negative_gain_rejected(self):
        with pytest.raises(ValueError):
            sample_rayleigh_channel(np.random.default_rng(0), -1.0, 4)


class TestEffectiveChannel:
    def _random_setup(self, seed, n_a=6, n_r=4):
        rng = np.random.default_rng(seed)
        h_d = rng.standard_normal(n_a) + 1j * rng.standard_normal(n_a)
        h_r = rng.standard_normal(n_r) + 1j * rng.standard_normal(n_r)
        g = rng.standard_normal((n_r, n_a)) + 1j * rng.standard_normal((n_r, n_a))
        theta = np.exp(1j * rng.uniform(0, 2 * np.pi, n_r))
        return h_d, h_r, g, theta

    def test_direct_path_only(self):
        h_d, _, g, theta = self._random_setup(1)
        h = effective_channel(h_d, np.zeros(4, dtype=complex), g, theta)
        np.testing.assert_allclose(h, h_d, atol=1e-15)

    def test_scalar_chain(self):
        # N_R = 1 with zero direct path: h^H = h_r^H * theta1 * G
        h_r = np.array([2.0 - 1.0j])
        g = np.array([[3.0 + 0.5j]])
        theta = np.array([np.exp(1j * 0.7)])
        h = effective_channel(np.zeros(1, dtype=complex), h_r, g, theta)
        expected_hH = np.conj(h_r[0]) * theta[0] * g[0, 0]
        assert h[0] == pytest.approx(np.conj(expected_hH))

    def test_definition_matches_row_form(self):
        h_d, h_r, g, theta = self._random_setup(2)
        h = effective_channel(h_d, h_r, g, theta)
        row = h_d.conj() + h_r.conj() @ np.diag(theta) @ g
        np.testing.assert_allclose(h.conj(), row, atol=1e-12)

    def test_affine_in_direct_channel(self):
        h_d, h_r, g, theta = self._random_setup(3)
        extra = np.ones(6) * (0.3 - 0.2j)
        lhs = effective_channel(h_d + extra, h_r, g, theta)
        rhs = effective_channel(h_d, h_r, g, theta) + extra
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_linear_in_phases(self):
        h_d, h_r, g, theta = self._random_setup(4)
        h0 = effective_channel(np.zeros_like(h_d), h_r, g, theta)
        h1 = effective_channel(np.zeros_like(h_d), h_r, g, 2.0 * theta)
        np.testing.assert_allclose(h1, 2.0 * h0, atol=1e-12)

    def test_shape_mismatch(self):
        h_d, h_r, g, theta = self._random_setup(5)
        with pytest.raises(ValueError):
            effective_channel(h_d[:-1], h_r, g, theta)


class TestLosMimo:
    def test_rank_one_and_scale(self):
        g = los_mimo_channel(
            np.array([0, 0, 10.0]),
            np.array([60, 60, 10.0]),
            (5, 2),
            (4, 2),
            -30.0,
            2.2,
        )
        assert g.shape == (8, 10)
        s = np.linalg.svd(g, compute_uv=False)
        assert s[1] <= 1e-12 * s[0]
        d = np.linalg.norm([60.0, 60.0])
        expected = np.sqrt(path_loss_gain(d, 2.2, -30.0))
        np.testing.assert_allclose(np.abs(g), expected, rtol=1e-10)


class TestChannelSet:
    def test_effective_channels_match_elementwise(self):
        rng = np.random.default_rng(9)
        k, n_a, n_r = 3, 5, 4
        cs = ChannelSet(
            h_d=rng.standard_normal((k, n_a)) + 1j * rng.standard_normal((k, n_a)),
            h_r=rng.standard_normal((k, n_r)) + 1j * rng.standard_normal((k, n_r)),
            g_mat=rng.standard_normal((n_r, n_a)) + 1j * rng.standard_normal((n_r, n_a)),
            h_aw_hat=rng.standard_normal(n_a) + 1j * rng.standard_normal(n_a),
            h_rw_hat=rng.standard_normal(n_r) + 1j * rng.standard_normal(n_r),
            delta_aw=0.1,
            delta_rw=0.2,
        )
        theta = np.exp(1j * rng.uniform(0, 2 * np.pi, n_r))
        hs = cs.effective_user_channels(theta)
        for i in range(k):
            np.testing.assert_allclose(
                hs[i], effective_channel(cs.h_d[i], cs.h_r[i], cs.g_mat, theta)
            )
        hw = cs.effective_warden_channel(theta)
        np.testing.assert_allclose(
            hw, effective_channel(cs.h_aw_hat, cs.h_rw_hat, cs.g_mat, theta)
        )
