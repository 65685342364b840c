"""Normal-innovation VB identifier with an inverse-Wishart noise posterior.

This is the skew-normal identifier with the skewness removed: the noise
covariance ``R`` gets an ``IW(Psi, nu)`` posterior (same convention as in
:mod:`skewar.mvniw`), and the prediction step forgets ``nu`` toward
``n_z + 1``, the smallest value for which ``E[R^-1]^-1`` exists.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DegreesOfFreedomError, ParameterError
from ._factor import check_psd, psd_factor
from .identifier import IdentifierConfig, _as_measurements, _raise_status, _with_history

__all__ = ["GaussianFilterState", "GaussianTrace", "gvb_update", "gvb_predict", "filter_gaussian"]


@dataclass(frozen=True, eq=False)
class GaussianFilterState:
    x: np.ndarray
    P: np.ndarray
    Psi: np.ndarray
    nu: float

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        Psi = np.atleast_2d(np.asarray(self.Psi, dtype=float))
        n, m = x.shape[0], Psi.shape[0]
        if P.shape != (n, n) or Psi.shape != (m, m):
            raise ParameterError("inconsistent state dimensions")
        P, Psi = check_psd(P, "P"), 0.5 * (Psi + Psi.T)
        try:
            np.linalg.cholesky(Psi)
        except np.linalg.LinAlgError:
            raise ParameterError("Psi is not positive definite") from None
        nu = float(self.nu)
        if not nu > m + 1:
            raise DegreesOfFreedomError(f"nu must exceed n_z + 1 = {m + 1}, got {nu}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "Psi", Psi)
        object.__setattr__(self, "nu", nu)

    @property
    def n_ar(self) -> int:
        return self.x.shape[0]

    @property
    def n_z(self) -> int:
        return self.Psi.shape[0]

    @property
    def expected_R(self) -> np.ndarray:
        return self.Psi / (self.nu - self.n_z - 1.0)


def gvb_update(pred: GaussianFilterState, z, C, iterations: int = 10, tol: float = 0.0) -> GaussianFilterState:
    """One measurement update: ``nu + 1``, then alternate the Kalman update of
    ``(x, P)`` under ``R = Psi / (nu - n_z - 1)`` with
    ``Psi = Psi_prior + r r^T + C P C^T``.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if z.shape != (pred.n_z,) or C.shape != (pred.n_z, pred.n_ar):
        raise ParameterError("z or C has the wrong shape")
    if iterations < 1:
        raise ParameterError("iterations must be at least 1")
    x, SP, Psi, nu, n_iter, status, fail_iter = _kernels.gauss_step(
        pred.x.copy(), psd_factor(pred.P), pred.Psi.copy(), pred.nu, z, np.ascontiguousarray(C),
        iterations, float(tol),
    )
    if status != _kernels.OK:
        _raise_status(status, None, fail_iter)
    return GaussianFilterState(x, SP @ SP.T, Psi, nu)


def gvb_predict(post: GaussianFilterState, Q, gamma: float) -> GaussianFilterState:
    if not 0.0 < gamma <= 1.0:
        raise ParameterError(f"gamma must lie in (0, 1], got {gamma}")
    floor = post.n_z + 1.0
    return GaussianFilterState(
        post.x.copy(), post.P + np.asarray(Q, dtype=float), gamma * post.Psi, floor + gamma * (post.nu - floor)
    )


@dataclass(eq=False)
class GaussianTrace:
    x: np.ndarray
    P_diag: np.ndarray
    Psi: np.ndarray
    nu: np.ndarray
    vb_iterations: np.ndarray
    final: GaussianFilterState
    P: np.ndarray | None = field(default=None)

    def __len__(self):
        return self.x.shape[0]

    @property
    def expected_R(self) -> np.ndarray:
        n_z = self.Psi.shape[-1]
        return self.Psi / (self.nu - n_z - 1.0)[:, None, None]

    def states(self) -> list[GaussianFilterState]:
        if self.P is None:
            raise ValueError("trace was recorded without full covariances")
        return [GaussianFilterState(self.x[k], self.P[k], self.Psi[k], self.nu[k]) for k in range(len(self))]


def filter_gaussian(measurements, init: GaussianFilterState, cfg: IdentifierConfig, store_P: bool = False,
                    check_spd: bool = True, history=None) -> GaussianTrace:
    """Baseline counterpart of :func:`skewar.identifier.filter_skew`."""
    if init.n_ar != cfg.n_ar or init.n_z != cfg.n_z:
        raise ParameterError("state dimensions do not match config")
    zs = _as_measurements(measurements, cfg.n_z)
    n_meas = zs.shape[0]
    zs, start = _with_history(zs, history, cfg.n_ar, cfg.n_z)
    adaptive, FQ, LK = cfg.kernel_args()
    out = _kernels.gauss_run(
        zs, start, init.x.copy(), psd_factor(init.P), init.Psi.copy(), init.nu, cfg.gamma, adaptive, FQ, LK,
        cfg.vb_iterations, cfg.tol, store_P, check_spd,
    )
    xs, p_diag, Ps, Psis, nus, iters, done, status, fail_step, fail_iter, x, SP, Psi, nu = out
    if status != _kernels.OK:
        _raise_status(status, fail_step + 1, fail_iter)
    final = GaussianFilterState(x, SP @ SP.T, Psi, nu) if n_meas else init
    return GaussianTrace(x=xs, P_diag=p_diag, Psi=Psis, nu=nus, vb_iterations=iters, final=final,
                         P=Ps if store_P else None)
