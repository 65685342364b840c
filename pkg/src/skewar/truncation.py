"""Moment matching for normals truncated to the positive side of some coordinates.

Constraints ``x_i >= 0`` are absorbed one at a time: the scalar marginal is
truncated exactly and the change is propagated to the remaining coordinates
through linear-Gaussian conditioning. With a single constraint or a diagonal
covariance this is exact; otherwise it is an approximation whose result
depends on the processing order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._kernels import trunc_moments
from .errors import NumericalDegeneracyError, ParameterError

__all__ = ["GaussianMoments", "truncated_scalar_moments", "sequential_truncate"]


@dataclass(frozen=True, eq=False)
class GaussianMoments:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        d = mean.shape[0]
        if mean.ndim != 1 or cov.shape != (d, d):
            raise ParameterError(f"inconsistent shapes {mean.shape} and {cov.shape}")
        if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(cov))):
            raise ParameterError("cov is not symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def truncated_scalar_moments(m: float, s2: float) -> tuple[float, float]:
    """Mean and variance of ``N(m, s2)`` conditioned on being non-negative.

    >>> truncated_scalar_moments(0.0, 1.0)  # half-normal
    (0.7978845608028654, 0.3633802276324186)
    """
    if not s2 > 0:
        raise ParameterError(f"variance must be positive, got {s2}")
    m_plus, v_plus = trunc_moments(float(m), float(s2))
    return float(m_plus), float(v_plus)


def sequential_truncate(g: GaussianMoments, constrained: Sequence[int]) -> GaussianMoments:
    """Approximate moments of ``g`` restricted to ``x_i >= 0`` for ``i`` in ``constrained``.

    Indices are 0-based and processed in the order given; pass them sorted
    for the conventional ascending order.
    """
    mean = g.mean.copy()
    cov = g.cov.copy()
    d = g.dim
    for step, i in enumerate(constrained):
        if not 0 <= i < d:
            raise ParameterError(f"constraint index {i} outside [0, {d})")
        s2 = cov[i, i]
        if not s2 > 0:
            raise NumericalDegeneracyError(
                f"non-positive marginal variance {s2} at coordinate {i}", quantity="truncation", step=step
            )
        m_plus, v_plus = trunc_moments(mean[i], s2)
        c = cov[:, i].copy()
        mean = mean + c * ((m_plus - mean[i]) / s2)
        cov = cov + np.outer(c, c) * ((v_plus - s2) / (s2 * s2))
        cov = 0.5 * (cov + cov.T)
    return GaussianMoments(mean, cov)
