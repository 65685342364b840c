"""Matrix-variate-normal / inverse-Wishart (MVNIW) noise-parameter posterior.

``Delta | R ~ MN(DeltaHat, R (x) V)`` (among-row ``R``, among-column ``V``) and
``R ~ IW(Psi, nu)``. The inverse-Wishart convention is fixed by the moment
``E[R^{-1}] = (nu - n_z - 1) Psi^{-1}``, i.e. ``R^{-1}`` is Wishart with scale
``Psi^{-1}`` and ``nu - n_z - 1`` degrees of freedom. The moments the filter
needs exist when ``nu > 2 n_z``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DegreesOfFreedomError, ParameterError

__all__ = [
    "MvniwParams",
    "expected_R",
    "forget",
    "mvniw_cross_moments",
    "mvniw_sample",
    "symmetrize",
]


def symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def _require_spd(name, M):
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise ParameterError(f"{name} is not positive definite") from None


@dataclass(frozen=True, eq=False)
class MvniwParams:
    DeltaHat: np.ndarray
    V: np.ndarray
    Psi: np.ndarray
    nu: float

    def __post_init__(self):
        D = np.atleast_2d(np.asarray(self.DeltaHat, dtype=float))
        n = D.shape[0]
        if D.shape != (n, n):
            raise ParameterError("DeltaHat must be square")
        V = np.atleast_2d(np.asarray(self.V, dtype=float))
        Psi = np.atleast_2d(np.asarray(self.Psi, dtype=float))
        if V.shape != (n, n) or Psi.shape != (n, n):
            raise ParameterError("V and Psi must match DeltaHat's shape")
        V, Psi = symmetrize(V), symmetrize(Psi)
        _require_spd("V", V)
        _require_spd("Psi", Psi)
        nu = float(self.nu)
        if not nu > 2 * n:
            raise DegreesOfFreedomError(f"nu must exceed 2*n_z = {2 * n}, got {nu}")
        object.__setattr__(self, "DeltaHat", D)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "Psi", Psi)
        object.__setattr__(self, "nu", nu)

    @property
    def n_z(self) -> int:
        return self.DeltaHat.shape[0]


def expected_R(p: MvniwParams) -> np.ndarray:
    """``E[R^{-1}]^{-1} = Psi / (nu - n_z - 1)``."""
    dof = p.nu - p.n_z - 1
    if dof <= 0:
        raise DegreesOfFreedomError("nu - n_z - 1 must be positive")
    return p.Psi / dof


def mvniw_cross_moments(p: MvniwParams):
    """Return ``(E[R^{-1} Delta], E[Delta^T R^{-1} Delta])``.

    These are ``Rbar^{-1} DeltaHat`` and ``n_z V + DeltaHat^T Rbar^{-1} DeltaHat``
    with ``Rbar = expected_R(p)``.
    """
    Rbar = expected_R(p)
    R_inv_D = np.linalg.solve(Rbar, p.DeltaHat)
    second = p.n_z * p.V + p.DeltaHat.T @ R_inv_D
    return R_inv_D, symmetrize(second)


def mvniw_sample(rng: np.random.Generator, p: MvniwParams):
    """Draw ``(R, Delta)`` from the joint distribution."""
    n = p.n_z
    R = stats.invwishart.rvs(df=p.nu - n - 1, scale=p.Psi, random_state=rng)
    R = symmetrize(np.atleast_2d(R))
    G = rng.standard_normal((n, n))
    Delta = p.DeltaHat + np.linalg.cholesky(R) @ G @ np.linalg.cholesky(p.V).T
    return R, Delta


def forget(p: MvniwParams, gamma: float) -> MvniwParams:
    """Forgetting-factor prediction.

    ``(DeltaHat, V / gamma, gamma Psi, gamma nu + (1 - gamma) 2 n_z)``. The
    degrees-of-freedom map has fixed point ``2 n_z`` and approaches it
    from above, so validity is preserved.
    """
    if not 0.0 < gamma <= 1.0:
        raise ParameterError(f"gamma must lie in (0, 1], got {gamma}")
    n = p.n_z
    return MvniwParams(
        DeltaHat=p.DeltaHat.copy(),
        V=p.V / gamma,
        Psi=gamma * p.Psi,
        nu=2 * n + gamma * (p.nu - 2 * n),
    )
