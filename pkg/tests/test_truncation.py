import math

import numpy as np
import pytest
from scipy import integrate, stats

from skewar.errors import NumericalDegeneracyError, ParameterError
from skewar.truncation import GaussianMoments, sequential_truncate, truncated_scalar_moments

from conftest import random_spd


def quad_moments(m, s2):
    """Truncated moments by direct integration of the normal density over [0, inf)."""
    s = math.sqrt(s2)
    lo, hi = 0.0, max(m, 0.0) + 40 * s
    pdf = lambda t: stats.norm.pdf(t, m, s)
    opts = dict(epsabs=0.0, epsrel=1e-13, limit=500, points=[max(m, 0.0)])
    z, _ = integrate.quad(pdf, lo, hi, **opts)
    m1, _ = integrate.quad(lambda t: t * pdf(t), lo, hi, **opts)
    mean = m1 / z
    m2, _ = integrate.quad(lambda t: (t - mean) ** 2 * pdf(t), lo, hi, **opts)
    return mean, m2 / z


def rejection_moments(rng, mean, cov, constrained, count):
    x = rng.multivariate_normal(mean, cov, size=count)
    keep = x[(x[:, constrained] >= 0).all(axis=1)]
    return keep.mean(axis=0), np.cov(keep.T)


def test_half_normal():
    m, v = truncated_scalar_moments(0.0, 1.0)
    assert m == pytest.approx(math.sqrt(2 / math.pi), abs=1e-15)
    assert v == pytest.approx(1 - 2 / math.pi, abs=1e-15)


@pytest.mark.parametrize("m,s2", [(-3.0, 1.0), (0.4, 2.5), (-1.0, 0.1), (2.0, 0.3), (-6.5, 1.0)])
def test_scalar_moments_match_quadrature(m, s2):
    got = truncated_scalar_moments(m, s2)
    ref = quad_moments(m, s2)
    np.testing.assert_allclose(got, ref, rtol=0, atol=1e-8 * max(1.0, s2))


def test_deep_truncation_value():
    m, v = truncated_scalar_moments(-3.0, 1.0)
    assert m == pytest.approx(0.28310, abs=5e-6)
    assert v == pytest.approx(0.0705592, abs=1e-7)


def test_inactive_constraint_far_in_the_tail():
    m, v = truncated_scalar_moments(10.0, 1.0)
    assert abs(m - 10.0) < 1e-6 and abs(v - 1.0) < 1e-6


@pytest.mark.parametrize("m", [-40.0, -8.0 * 1.7, -100.0])
def test_deep_negative_mean_is_finite_and_positive(m):
    mp, vp = truncated_scalar_moments(m, 1.7 ** 2)
    assert 0 < mp < 1.7 / 4 and 0 < vp < (1.7 / 4) ** 2


def test_tail_switch_is_continuous():
    # the asymptotic branch takes over at alpha = 8
    s2 = 0.64
    s = math.sqrt(s2)
    left = truncated_scalar_moments(-8 * s * (1 - 1e-9), s2)
    right = truncated_scalar_moments(-8 * s * (1 + 1e-9), s2)
    np.testing.assert_allclose(left, right, rtol=1e-7)
    ref = quad_moments(-8 * s, s2)
    np.testing.assert_allclose(right, ref, rtol=1e-7)


def test_scalar_variance_shrinks_and_mean_rises():
    for m in np.linspace(-20, 20, 81):
        mp, vp = truncated_scalar_moments(m, 2.0)
        assert mp > 0 and mp >= m and 0 < vp <= 2.0


def test_invalid_variance():
    with pytest.raises(ParameterError):
        truncated_scalar_moments(0.0, 0.0)


def test_empty_constraint_set_is_identity(rng):
    g = GaussianMoments(rng.normal(size=3), random_spd(rng, 3))
    out = sequential_truncate(g, [])
    np.testing.assert_array_equal(out.mean, g.mean)
    np.testing.assert_array_equal(out.cov, g.cov)


def test_single_coordinate():
    out = sequential_truncate(GaussianMoments([0.0], [[1.0]]), [0])
    np.testing.assert_allclose(out.mean, [math.sqrt(2 / math.pi)], atol=1e-15)
    np.testing.assert_allclose(out.cov, [[1 - 2 / math.pi]], atol=1e-15)


def test_diagonal_covariance_is_exact(rng):
    for _ in range(10):
        d = 4
        mean = rng.normal(size=d)
        var = rng.uniform(0.1, 3.0, size=d)
        out = sequential_truncate(GaussianMoments(mean, np.diag(var)), [1, 3])
        for i in range(d):
            if i in (1, 3):
                m, v = truncated_scalar_moments(mean[i], var[i])
            else:
                m, v = mean[i], var[i]
            assert out.mean[i] == pytest.approx(m, abs=1e-12)
            assert out.cov[i, i] == pytest.approx(v, abs=1e-12)
        off = out.cov - np.diag(np.diag(out.cov))
        assert np.max(np.abs(off)) < 1e-12


def test_uncorrelated_coordinate_untouched(rng):
    cov = np.zeros((3, 3))
    cov[:2, :2] = [[1.0, 0.6], [0.6, 2.0]]
    cov[2, 2] = 0.7
    g = GaussianMoments([0.2, -0.4, 1.3], cov)
    out = sequential_truncate(g, [0, 1])
    assert abs(out.mean[2] - 1.3) < 1e-14 and abs(out.cov[2, 2] - 0.7) < 1e-14
    assert np.all(np.abs(out.cov[2, :2]) < 1e-14)


def test_single_constraint_is_exact_against_rejection(rng):
    cov = np.array([[1.0, 0.7, -0.3], [0.7, 2.0, 0.2], [-0.3, 0.2, 0.5]])
    mean = np.array([-0.5, 0.3, 0.1])
    out = sequential_truncate(GaussianMoments(mean, cov), [0])
    m, c = rejection_moments(rng, mean, cov, [0], 2_000_000)
    np.testing.assert_allclose(out.mean, m, atol=5e-3)
    np.testing.assert_allclose(out.cov, c, atol=5e-3)


BIVARIATE = (np.zeros(2), np.array([[1.0, 0.8], [0.8, 1.0]]))


@pytest.fixture(scope="module")
def bivariate_reference():
    return rejection_moments(np.random.default_rng(7), *BIVARIATE, [0, 1], 10_000_000)


@pytest.mark.xfail(strict=True, reason="sequential truncation error at correlation 0.8 is about 0.03 in the "
                                       "mean and 0.07 in the covariance")
def test_correlated_quadrant_within_two_hundredths(bivariate_reference):
    out = sequential_truncate(GaussianMoments(*BIVARIATE), [0, 1])
    m, c = bivariate_reference
    assert np.max(np.abs(out.mean - m)) < 0.02 and np.max(np.abs(out.cov - c)) < 0.02


def test_correlated_quadrant_method_error(bivariate_reference):
    out = sequential_truncate(GaussianMoments(*BIVARIATE), [0, 1])
    m, c = bivariate_reference
    assert np.max(np.abs(out.mean - m)) < 0.035
    assert np.max(np.abs(out.cov - c)) < 0.08
    # the approximation underestimates the spread, never inflates it
    assert np.all(np.diag(out.cov) < np.diag(c))


def test_exchangeable_inputs_are_order_invariant():
    cov = np.array([[1.0, 0.4, 0.2], [0.4, 1.0, 0.2], [0.2, 0.2, 1.5]])
    g = GaussianMoments([0.1, 0.1, -0.3], cov)
    a = sequential_truncate(g, [0, 1])
    b = sequential_truncate(g, [1, 0])
    perm = [1, 0, 2]
    np.testing.assert_allclose(a.mean, b.mean[perm], atol=1e-14)
    np.testing.assert_allclose(a.cov, b.cov[np.ix_(perm, perm)], atol=1e-14)


def test_constrained_variances_never_grow(rng):
    for _ in range(30):
        g = GaussianMoments(rng.normal(size=4), random_spd(rng, 4))
        out = sequential_truncate(g, [0, 2])
        assert out.cov[0, 0] <= g.cov[0, 0] and out.cov[2, 2] <= g.cov[2, 2]
        assert np.linalg.eigvalsh(out.cov)[0] > -1e-10


def test_errors():
    g = GaussianMoments([0.0, 0.0], np.eye(2))
    with pytest.raises(ParameterError):
        sequential_truncate(g, [2])
    with pytest.raises(ParameterError):
        GaussianMoments([0.0, 0.0], [[1.0, 0.5], [0.4, 1.0]])
    degenerate = GaussianMoments([0.0, 0.0], [[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(NumericalDegeneracyError) as info:
        sequential_truncate(degenerate, [0, 1])
    assert info.value.step == 1
