import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from sweatpp.core import PatternError, PointPattern, Window, binomial_pattern, make_regular_quadrature
from sweatpp.sequential import (
    MixtureParams,
    SoftcoreParams,
    WindowSaturatedError,
    draw_arrival,
    log_normalizer_series,
    mixture_loglik,
    seq_loglik,
    simulate_mixture,
    simulate_sequential,
    softcore_log_potential,
)


def naive_log_normalizers(points, params, quad):
    """Fresh O(Jk) quadrature for every k, no running sums."""
    out = []
    e = 2.0 / params.kappa
    for k in range(2, len(points) + 1):
        d = np.hypot(*(quad.nodes[:, None, :] - points[None, : k - 1, :]).transpose(2, 0, 1))
        s = np.sum((params.R / d) ** e, axis=1)
        out.append(-math.log(np.sum(quad.weights * np.exp(-s))))
    return np.array(out)


def naive_mixture_loglik(points, params, quad, area):
    """Direct transcription of the mixture log-likelihood, point by point."""
    sc = params.softcore
    total = -math.log(area)
    z = naive_log_normalizers(points, sc, quad)
    for k in range(1, len(points)):
        pot = sum(-((sc.R / math.dist(points[k], points[i])) ** sc.exponent) for i in range(k))
        f = math.exp(z[k - 1] + pot)
        total += math.log((1 - params.theta) * f + params.theta / area)
    return total


class TestParams:
    @pytest.mark.parametrize("R,k", [(0, 0.5), (-1, 0.5), (1, 0), (1, 1), (math.nan, 0.5)])
    def test_softcore_invalid(self, R, k):
        with pytest.raises(ValueError):
            SoftcoreParams(R, k)

    @pytest.mark.parametrize("theta", [-0.1, 1.1])
    def test_mixture_invalid(self, theta):
        with pytest.raises(ValueError):
            MixtureParams(70, 0.4, theta)


class TestPotential:
    def test_empty_prefix(self):
        assert softcore_log_potential([1, 1], np.empty((0, 2)), SoftcoreParams(70, 0.4)) == 0.0

    def test_all_at_distance_R(self):
        ang = np.linspace(0, 2 * np.pi, 7)[:-1]
        prefix = np.column_stack([np.cos(ang), np.sin(ang)]) * 70 + 500
        assert softcore_log_potential([500, 500], prefix, SoftcoreParams(70, 0.3)) == pytest.approx(-6.0, rel=1e-12)

    def test_matches_direct_sum(self, rng):
        prefix = rng.random((50, 2)) * 1000
        y = np.array([321.0, 654.0])
        p = SoftcoreParams(55.0, 0.37)
        direct = -sum((55.0 / math.dist(y, q)) ** (2 / 0.37) for q in prefix)
        assert softcore_log_potential(y, prefix, p) == pytest.approx(direct, rel=1e-12)

    def test_coincident_point(self):
        assert softcore_log_potential([1, 1], [[1, 1]], SoftcoreParams(70, 0.4)) == -math.inf


class TestNormalizers:
    def test_naive_oracle_small(self, rng):
        w = Window(800, 600)
        quad = make_regular_quadrature(w, 400)
        p = binomial_pattern(50, w, rng)
        params = SoftcoreParams(45.0, 0.4)
        got = log_normalizer_series(p, params, quad)
        np.testing.assert_allclose(got, naive_log_normalizers(p.points, params, quad), rtol=0, atol=1e-10)

    @given(st.integers(2, 40), st.floats(5, 150), st.floats(0.05, 0.95), st.integers(0, 2**31))
    @settings(max_examples=25, deadline=None)
    def test_naive_oracle_property(self, n, R, kappa, seed):
        w = Window(500, 400)
        quad = make_regular_quadrature(w, 300)
        p = binomial_pattern(n, w, np.random.default_rng(seed))
        params = SoftcoreParams(R, kappa)
        np.testing.assert_allclose(
            log_normalizer_series(p, params, quad), naive_log_normalizers(p.points, params, quad), rtol=0, atol=1e-10
        )

    def test_tiny_R_gives_area(self, rng, camera_window, camera_quad):
        p = binomial_pattern(30, camera_window, rng)
        z = log_normalizer_series(p, SoftcoreParams(1e-12, 0.4), camera_quad)
        np.testing.assert_allclose(z, -math.log(camera_window.area), atol=1e-6)

    def test_near_hard_core_disc(self, camera_window):
        R = 70.0
        p = PointPattern(np.array([[1296.0, 972.0], [10.0, 10.0]]), camera_window)
        quad = make_regular_quadrature(camera_window, 1_000_000)
        z2 = log_normalizer_series(p, SoftcoreParams(R, 0.02), quad)[0]
        assert math.exp(-z2) == pytest.approx(camera_window.area - math.pi * R**2, rel=0.02)

    def test_needs_two_points(self, camera_quad):
        with pytest.raises(PatternError):
            log_normalizer_series(PointPattern(np.array([[1.0, 1.0]])), SoftcoreParams(70, 0.4), camera_quad)

    def test_node_on_point_contributes_zero(self):
        w = Window(4, 4)
        quad = make_regular_quadrature(w, 4)  # nodes at 1 and 3
        p = PointPattern(np.array([[1.0, 1.0], [3.0, 2.0]]), w)
        params = SoftcoreParams(0.5, 0.5)
        z = log_normalizer_series(p, params, quad)[0]
        s = [(0.5 / math.dist((1, 1), node)) ** 4 for node in [(3, 1), (1, 3), (3, 3)]]
        assert z == pytest.approx(-math.log(4 * sum(math.exp(-v) for v in s)), rel=1e-12)


class TestLoglik:
    def test_one_point(self, camera_window, camera_quad):
        p = PointPattern(np.array([[3.0, 4.0]]), camera_window)
        assert seq_loglik(p, SoftcoreParams(70, 0.4), camera_quad) == -math.log(2592 * 1944)

    def test_two_points_fine_quadrature(self, camera_window, camera_quad):
        p = PointPattern(np.array([[1000.0, 900.0], [1200.0, 900.0]]), camera_window)
        params = SoftcoreParams(70, 0.4)
        fine = make_regular_quadrature(camera_window, 1_000_000)
        assert seq_loglik(p, params, camera_quad) == pytest.approx(seq_loglik(p, params, fine), abs=1e-4)

    def test_explicit_formula(self, rng):
        w = Window(400, 300)
        quad = make_regular_quadrature(w, 300)
        p = binomial_pattern(12, w, rng)
        params = SoftcoreParams(60, 0.5)
        z = naive_log_normalizers(p.points, params, quad)
        pot = sum(
            softcore_log_potential(p.points[k], p.points[:k], params) for k in range(1, p.n)
        )
        expected = -math.log(w.area) + pot + z.sum()
        assert seq_loglik(p, params, quad) == pytest.approx(expected, rel=1e-12)

    def test_duplicate_points(self, camera_window, camera_quad):
        p = PointPattern(np.array([[5.0, 5.0], [5.0, 5.0]]), camera_window)
        assert seq_loglik(p, SoftcoreParams(70, 0.4), camera_quad) == -math.inf

    def test_mixture_reductions(self, rng, camera_window, camera_quad):
        p = binomial_pattern(40, camera_window, rng)
        for R, k in [(70, 0.4), (20, 0.9), (150, 0.1)]:
            assert mixture_loglik(p, MixtureParams(R, k, 0.0), camera_quad) == seq_loglik(
                p, SoftcoreParams(R, k), camera_quad
            )
            assert mixture_loglik(p, MixtureParams(R, k, 1.0), camera_quad) == -40 * math.log(camera_window.area)

    def test_mixture_direct_formula(self):
        w = Window(300, 300)
        quad = make_regular_quadrature(w, 900)
        p = PointPattern(np.array([[100.0, 100.0], [130.0, 110.0], [200.0, 250.0]]), w)
        params = MixtureParams(50, 0.4, 0.5)
        assert mixture_loglik(p, params, quad) == pytest.approx(
            naive_mixture_loglik(p.points, params, quad, w.area), rel=1e-12
        )

    def test_mixture_survives_duplicates(self, camera_window, camera_quad):
        p = PointPattern(np.array([[5.0, 5.0], [5.0, 5.0]]), camera_window)
        v = mixture_loglik(p, MixtureParams(70, 0.4, 0.1), camera_quad)
        assert v == pytest.approx(-2 * math.log(camera_window.area) + math.log(0.1))

    def test_decreasing_in_R_for_binomial_pattern(self, camera_window, camera_quad):
        p = binomial_pattern(150, camera_window, np.random.default_rng(2))
        Rs = np.linspace(20, 200, 19)
        ll = [seq_loglik(p, SoftcoreParams(R, 0.4), camera_quad) for R in Rs]
        assert np.all(np.diff(ll) < 0)

    def test_not_monotone_in_R_for_inhibited_pattern(self, camera_window, camera_quad):
        # a close pair exists, yet the normaliser term makes the likelihood rise towards the true R
        p = simulate_sequential(200, SoftcoreParams(70, 0.4), camera_window, np.random.default_rng(4))
        d = np.hypot(*(p.points[:, None] - p.points[None]).transpose(2, 0, 1))
        assert d[np.triu_indices(p.n, 1)].min() < 62
        assert seq_loglik(p, SoftcoreParams(70, 0.4), camera_quad) > seq_loglik(p, SoftcoreParams(62, 0.4), camera_quad)

    @pytest.mark.slow
    def test_true_parameters_more_likely(self, camera_window, camera_quad):
        rng = np.random.default_rng(99)
        true, far = SoftcoreParams(70, 0.4), SoftcoreParams(140, 0.4)
        diffs = []
        for _ in range(500):
            p = simulate_sequential(100, true, camera_window, rng)
            diffs.append(seq_loglik(p, true, camera_quad) - seq_loglik(p, far, camera_quad))
        assert np.mean(diffs) > 0


class TestSimulation:
    def test_count_and_window(self, rng, camera_window):
        p = simulate_sequential(100, SoftcoreParams(70, 0.4), camera_window, rng)
        assert p.n == 100
        assert camera_window.contains(p.points).all()

    def test_tiny_R_is_uniform(self, camera_window):
        rng = np.random.default_rng(4)
        xs = np.concatenate(
            [simulate_sequential(50, SoftcoreParams(1e-12, 0.5), camera_window, rng).points[:, 0] for _ in range(100)]
        )
        assert stats.kstest(xs / camera_window.width, "uniform").pvalue > 0.01

    def test_near_hard_core(self, camera_window):
        rng = np.random.default_rng(8)
        ok = 0
        for _ in range(100):
            p = simulate_sequential(100, SoftcoreParams(70, 0.05), camera_window, rng)
            d = np.hypot(*(p.points[:, None] - p.points[None]).transpose(2, 0, 1))
            ok += d[np.triu_indices(100, 1)].min() >= 0.8 * 70
        assert ok >= 99

    def test_theta_zero_bitwise_identical(self, camera_window):
        a = simulate_sequential(60, SoftcoreParams(70, 0.4), camera_window, np.random.default_rng(3))
        b = simulate_mixture(60, MixtureParams(70, 0.4, 0.0), camera_window, np.random.default_rng(3))
        np.testing.assert_array_equal(a.points, b.points)

    def test_theta_one_uniform(self, camera_window):
        rng = np.random.default_rng(6)
        ys = np.concatenate(
            [simulate_mixture(40, MixtureParams(300, 0.2, 1.0), camera_window, rng).points[:, 1] for _ in range(50)]
        )
        assert stats.kstest(ys / camera_window.height, "uniform").pvalue > 0.01

    def test_noise_adds_close_pairs(self, camera_window):
        def near_pairs(p, R):
            d = np.hypot(*(p.points[:, None] - p.points[None]).transpose(2, 0, 1))
            return np.sum(d[np.triu_indices(p.n, 1)] < R / 2)

        rng = np.random.default_rng(10)
        clean = noisy = 0
        for _ in range(100):
            clean += near_pairs(simulate_mixture(200, MixtureParams(70, 0.4, 0.0), camera_window, rng), 70)
            noisy += near_pairs(simulate_mixture(200, MixtureParams(70, 0.4, 0.3), camera_window, rng), 70)
        assert noisy > clean

    def test_saturation(self):
        w = Window(100, 100)
        with pytest.raises(WindowSaturatedError):
            draw_arrival([[50.0, 50.0]], SoftcoreParams(500, 0.02), w, np.random.default_rng(0), max_proposals=1000)

    def test_n_must_be_positive(self, rng, camera_window):
        with pytest.raises(ValueError):
            simulate_sequential(0, SoftcoreParams(70, 0.4), camera_window, rng)

    def test_arrival_density_chi_square(self):
        # one prefix point; compare accepted locations with the normalised density on a 4 x 4 grid
        w = Window(400, 400)
        prefix = np.array([[130.0, 210.0]])
        params = SoftcoreParams(90, 0.5)
        rng = np.random.default_rng(17)
        draws = np.array([draw_arrival(prefix, params, w, rng) for _ in range(4000)])
        quad = make_regular_quadrature(w, 160_000)
        dens = np.exp([softcore_log_potential(y, prefix, params) for y in quad.nodes[::1]])
        cell = (quad.nodes // 100).astype(int)
        expected = np.zeros((4, 4))
        np.add.at(expected, (cell[:, 0], cell[:, 1]), dens * quad.weights)
        expected *= 4000 / expected.sum()
        observed = np.zeros((4, 4))
        dc = (draws // 100).astype(int)
        np.add.at(observed, (dc[:, 0], dc[:, 1]), 1)
        assert stats.chisquare(observed.ravel(), expected.ravel()).pvalue > 0.01
