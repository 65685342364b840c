"""Synthetic AR data with skew-normal innovations."""

from __future__ import annotations

import numpy as np
from scipy import signal

from .errors import DivergenceError, ParameterError
from .skew_normal import SkewNormalParams, sn_sample

__all__ = [
    "companion_matrix",
    "generate_stable_coefficients",
    "simulate_trajectory",
    "identification_error",
]

_OVERFLOW = 1e150


def companion_matrix(coeffs) -> np.ndarray:
    """Companion matrix of ``z_k = sum_i a_i z_{k-i}``."""
    a = np.atleast_1d(np.asarray(coeffs, dtype=float))
    n = a.shape[0]
    M = np.zeros((n, n))
    M[0] = a
    M[1:, :-1] = np.eye(n - 1)
    return M


def generate_stable_coefficients(rng: np.random.Generator, n_ar: int) -> np.ndarray:
    """AR coefficients whose characteristic roots are i.i.d. ``unif(-1, 1)``.

    The roots ``r`` define ``prod(q - r_i) = q^n - a_1 q^{n-1} - ... - a_n``.
    """
    if n_ar < 1:
        raise ParameterError("n_ar must be positive")
    roots = rng.uniform(-1.0, 1.0, size=n_ar)
    return -np.poly(roots)[1:]


def simulate_trajectory(rng: np.random.Generator, coeffs, truth: SkewNormalParams, K: int) -> np.ndarray:
    """``K`` measurements of ``z_k = sum_i a_i z_{k-i} + e_k`` from zero history.

    Returns an array of shape ``(K, n_z)``.
    """
    a = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if K < 0:
        raise ParameterError("K must be non-negative")
    if K == 0:
        return np.zeros((0, truth.n_z))
    e = sn_sample(rng, truth, K)
    z = signal.lfilter([1.0], np.concatenate([[1.0], -a]), e, axis=0)
    if not np.all(np.isfinite(z)) or np.max(np.abs(z)) > _OVERFLOW:
        raise DivergenceError("trajectory diverged; coefficients are not stable")
    return np.ascontiguousarray(z)


def identification_error(x_est, x_true) -> np.ndarray | float:
    """Euclidean coefficient error; ``x_est`` may be a (K, n_ar) trajectory."""
    x_est = np.asarray(x_est, dtype=float)
    x_true = np.asarray(x_true, dtype=float)
    if x_est.shape[-1] != x_true.shape[-1]:
        raise ParameterError("coefficient vectors differ in length")
    err = np.sqrt(np.sum((x_est - x_true) ** 2, axis=-1))
    return float(err) if err.ndim == 0 else err
