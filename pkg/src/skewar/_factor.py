"""Square-root helpers shared by the identifier front ends."""

from __future__ import annotations

import numpy as np

from . import _kernels
from .errors import ParameterError

PSD_RTOL = 1e-10


def check_psd(M: np.ndarray, name: str) -> np.ndarray:
    """Symmetrized ``M``; raises unless it is PSD up to a relative tolerance."""
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ParameterError(f"{name} contains non-finite values")
    scale = max(float(np.max(np.abs(M), initial=0.0)), 1e-300)
    if np.max(np.abs(M - M.T), initial=0.0) > 1e-8 * scale:
        raise ParameterError(f"{name} is not symmetric")
    M = 0.5 * (M + M.T)
    if M.size and np.min(np.linalg.eigvalsh(M)) < -PSD_RTOL * scale:
        raise ParameterError(f"{name} is not positive semi-definite")
    return M


def psd_factor(M: np.ndarray) -> np.ndarray:
    """Lower-triangular ``L`` with ``L L^T = M`` for a PSD ``M``.

    Cholesky when it succeeds, otherwise a clipped eigen-factor brought back
    to triangular form.
    """
    M = np.ascontiguousarray(M, dtype=float)
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        w, Q = np.linalg.eigh(M)
        F = Q * np.sqrt(np.clip(w, 0.0, None))
        return _kernels.tria(np.ascontiguousarray(F))
