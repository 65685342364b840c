"""Stable-spline coefficient prior, adaptive process noise and default noise priors."""

from __future__ import annotations

import math

import numpy as np

from .errors import ParameterError
from .mvniw import MvniwParams

__all__ = [
    "DEFAULT_NU",
    "spline_kernel",
    "stable_spline_prior",
    "adaptive_Q",
    "skew_noise_prior",
    "gaussian_noise_prior",
]

DEFAULT_NU = 4.0 + 1e-10
SPLINE_SCALE = (30.0 - 1.0) / 3.0
SPLINE_DECAY = 0.5


def spline_kernel(n_ar: int) -> np.ndarray:
    """First-order stable spline shape ``0.5 ** max(i, j)`` (0-based indices)."""
    if n_ar < 1:
        raise ParameterError("n_ar must be positive")
    idx = np.arange(n_ar)
    return SPLINE_DECAY ** np.maximum.outer(idx, idx).astype(float)


def stable_spline_prior(n_ar: int) -> np.ndarray:
    return SPLINE_SCALE * spline_kernel(n_ar)


def adaptive_Q(P: np.ndarray, gamma: float) -> np.ndarray:
    """Process noise ``(1/gamma - 1) * max(diag(P)) * spline_kernel``.

    Keeps the predicted covariance in the stable-spline family; zero when
    ``gamma == 1``.
    """
    if not 0.0 < gamma <= 1.0:
        raise ParameterError(f"gamma must lie in (0, 1], got {gamma}")
    P = np.asarray(P, dtype=float)
    return (1.0 / gamma - 1.0) * float(np.max(np.diag(P))) * spline_kernel(P.shape[0])


def skew_noise_prior(n_z: int, nu: float = DEFAULT_NU, delta_scale: float | None = None,
                     v_scale: float = 1.0, psi_scale: float | None = None) -> MvniwParams:
    """Initial MVNIW prior splitting unit variance equally between the
    symmetric and the skewed component.

    Defaults: ``DeltaHat = sqrt(pi/4) I``, ``V = I``, ``Psi = (nu - 3)/2 I``,
    so that ``E[R^-1]^-1 = (2/pi) DeltaHat^2 = I/2`` for ``n_z = 2``.
    """
    if delta_scale is None:
        delta_scale = math.sqrt(math.pi / 2.0 * 0.5)
    if psi_scale is None:
        psi_scale = (nu - 3.0) / 2.0
    eye = np.eye(n_z)
    return MvniwParams(DeltaHat=delta_scale * eye, V=v_scale * eye, Psi=psi_scale * eye, nu=nu)


def gaussian_noise_prior(n_z: int, nu: float = DEFAULT_NU, psi_scale: float | None = None):
    """``(Psi, nu)`` of the inverse-Wishart prior for the baseline; ``Psi = (nu - 3) I``."""
    if psi_scale is None:
        psi_scale = nu - 3.0
    return psi_scale * np.eye(n_z), float(nu)
