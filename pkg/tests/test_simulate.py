import numpy as np
import pytest
from scipy import stats

from skewar.errors import DivergenceError, ParameterError
from skewar.simulate import (companion_matrix, generate_stable_coefficients, identification_error,
                             simulate_trajectory)
from skewar.skew_normal import SkewNormalParams, sn_moments

from conftest import mc_band

TRUTH = SkewNormalParams([0.0, 0.0], 0.01 * np.eye(2), [[2.0, 0.0], [1.0, 2.0]])


def test_single_root_is_the_coefficient():
    a = generate_stable_coefficients(np.random.default_rng(0), 1)
    r = np.random.default_rng(0).uniform(-1, 1)
    assert a[0] == pytest.approx(r, abs=1e-15)


def test_two_roots_expand_to_sum_and_product():
    a = generate_stable_coefficients(np.random.default_rng(1), 2)
    r1, r2 = np.random.default_rng(1).uniform(-1, 1, size=2)
    np.testing.assert_allclose(a, [r1 + r2, -r1 * r2], atol=1e-15)


@pytest.mark.parametrize("n", [1, 2, 5, 25])
def test_companion_matrix_is_stable(n):
    rng = np.random.default_rng(n)
    for _ in range(20):
        a = generate_stable_coefficients(rng, n)
        assert np.max(np.abs(np.linalg.eigvals(companion_matrix(a)))) < 1


def test_recursion_matches_direct_loop(rng):
    a = generate_stable_coefficients(rng, 4)
    zs = simulate_trajectory(np.random.default_rng(3), a, TRUTH, 200)
    from skewar.skew_normal import sn_sample

    e = sn_sample(np.random.default_rng(3), TRUTH, 200)
    z = np.zeros_like(e)
    for k in range(200):
        z[k] = e[k] + sum(a[j] * z[k - 1 - j] for j in range(min(k, 4)))
    np.testing.assert_allclose(zs, z, atol=1e-10)


def test_zero_coefficients_give_iid_noise(rng):
    zs = simulate_trajectory(rng, np.zeros(3), TRUTH, 100_000)
    mean, cov = sn_moments(TRUTH)
    m, se = mc_band(zs)
    assert np.all(np.abs(m - mean) < 3 * se)
    c = zs - zs.mean(axis=0)
    cm, cse = mc_band(c[:, :, None] * c[:, None, :])
    assert np.all(np.abs(cm - cov) < 3 * cse)
    assert np.all(stats.skew(zs, axis=0) > 0)


def test_ar1_autocorrelation():
    zs = simulate_trajectory(np.random.default_rng(4), [0.9], SkewNormalParams([0.0], [[1.0]], [[0.0]]), 50_000)
    z = zs[:, 0] - zs[:, 0].mean()
    rho1 = np.dot(z[1:], z[:-1]) / np.dot(z, z)
    assert abs(rho1 - 0.9) < 0.02


def test_unstable_coefficients_diverge():
    with pytest.raises(DivergenceError):
        simulate_trajectory(np.random.default_rng(0), [1.5], SkewNormalParams([0.0], [[1.0]], [[0.0]]), 5000)


def test_empty_and_invalid_lengths():
    assert simulate_trajectory(np.random.default_rng(0), [0.1], TRUTH, 0).shape == (0, 2)
    with pytest.raises(ParameterError):
        simulate_trajectory(np.random.default_rng(0), [0.1], TRUTH, -1)
    with pytest.raises(ParameterError):
        generate_stable_coefficients(np.random.default_rng(0), 0)


def test_identification_error():
    assert identification_error([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert identification_error([1.0, 0.0], [0.0, 0.0]) == 1.0
    assert identification_error([3.0, 4.0], [0.0, 0.0]) == 5.0
    np.testing.assert_allclose(identification_error(np.array([[3.0, 4.0], [0.0, 1.0]]), [0.0, 0.0]), [5.0, 1.0])
    with pytest.raises(ParameterError):
        identification_error([1.0], [1.0, 2.0])
