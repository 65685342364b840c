"""Recursive variational-Bayes identifier for AR models with skew-normal innovations.

Per measurement the posterior is approximated as

    q(x, u) q(R, Delta),    q(x, u) ~ N(xi, Xi),    q(R, Delta) ~ MVNIW

and the two factors are updated alternately for a fixed number of
iterations (or until the joint mean stops moving). Between measurements the
coefficients follow a random walk and the noise parameters are flattened by
the forgetting factor.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import NumericalDegeneracyError, ParameterError
from .mvniw import MvniwParams, forget
from ._factor import check_psd, psd_factor
from .priors import adaptive_Q, spline_kernel

__all__ = [
    "IdentifierConfig",
    "FilterState",
    "VbIterate",
    "SkewTrace",
    "build_regressor",
    "vb_measurement_update",
    "predict",
    "filter_skew",
    "run_identifier",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class IdentifierConfig:
    """Settings shared by both identifiers.

    ``q_policy`` is either ``"adaptive"`` (stable-spline shaped process
    noise scaled by the largest posterior variance) or a fixed SPD matrix.
    ``vb_tol``, when set, stops the VB loop early once the relative change of
    the joint mean drops below it; ``vb_iterations`` is then an upper bound.
    """

    n_ar: int
    n_z: int
    gamma: float = 0.975
    vb_iterations: int = 10
    vb_tol: float | None = None
    q_policy: str | np.ndarray = "adaptive"

    def __post_init__(self):
        if self.n_ar < 1 or self.n_z < 1:
            raise ParameterError("n_ar and n_z must be positive")
        if not 0.0 < self.gamma <= 1.0:
            raise ParameterError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.vb_iterations < 1:
            raise ParameterError("vb_iterations must be at least 1")
        if self.vb_tol is not None and not self.vb_tol > 0:
            raise ParameterError("vb_tol must be positive")
        if isinstance(self.q_policy, str):
            if self.q_policy != "adaptive":
                raise ParameterError(f"unknown Q policy {self.q_policy!r}")
        else:
            Q = np.asarray(self.q_policy, dtype=float)
            if Q.shape != (self.n_ar, self.n_ar):
                raise ParameterError("fixed Q must be n_ar x n_ar")
            if np.min(np.linalg.eigvalsh(0.5 * (Q + Q.T))) < -1e-12:
                raise ParameterError("fixed Q must be positive semi-definite")
            object.__setattr__(self, "q_policy", 0.5 * (Q + Q.T))

    @property
    def adaptive(self) -> bool:
        return isinstance(self.q_policy, str)

    def kernel_args(self):
        """``(adaptive, FQ, LK)`` as the compiled drivers expect them: the
        factor of a fixed ``Q`` and the Cholesky factor of the spline kernel."""
        LK = np.linalg.cholesky(spline_kernel(self.n_ar))
        if self.adaptive:
            FQ = np.zeros((self.n_ar, self.n_ar))
        else:
            FQ = psd_factor(self.q_policy)
        return self.adaptive, FQ, LK

    def process_noise(self, P: np.ndarray) -> np.ndarray:
        if self.adaptive:
            return adaptive_Q(P, self.gamma)
        return self.q_policy.copy()

    @property
    def tol(self) -> float:
        return 0.0 if self.vb_tol is None else float(self.vb_tol)


@dataclass(frozen=True, eq=False)
class FilterState:
    """Coefficient mean ``x``, covariance ``P`` and noise-parameter posterior."""

    x: np.ndarray
    P: np.ndarray
    noise: MvniwParams

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        n = x.shape[0]
        if P.shape != (n, n):
            raise ParameterError(f"P must be {n}x{n}, got {P.shape}")
        P = check_psd(P, "P")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "P", P)

    @property
    def n_ar(self) -> int:
        return self.x.shape[0]

    @property
    def n_z(self) -> int:
        return self.noise.n_z


@dataclass(frozen=True, eq=False)
class VbIterate:
    """Joint (x, u) moments after the last truncation of a VB loop."""

    xi: np.ndarray
    Xi: np.ndarray
    u_mean: np.ndarray
    U: np.ndarray
    Upsilon: np.ndarray


def build_regressor(history: Sequence[np.ndarray], n_ar: int, n_z: int) -> np.ndarray:
    """``[z_{k-1} z_{k-2} ... z_{k-n_ar}]`` from the most-recent-first ``history``.

    Missing lags (early steps) become zero columns.
    """
    C = np.zeros((n_z, n_ar))
    for j, z in enumerate(history[:n_ar]):
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if z.shape != (n_z,):
            raise ParameterError(f"history entry {j} has shape {z.shape}, expected ({n_z},)")
        C[:, j] = z
    return C


def _check_dims(state: FilterState, cfg: IdentifierConfig):
    if state.n_ar != cfg.n_ar or state.n_z != cfg.n_z:
        raise ParameterError(
            f"state dimensions ({state.n_ar}, {state.n_z}) do not match config ({cfg.n_ar}, {cfg.n_z})"
        )


def _raise_status(status, step, iteration):
    quantity = _kernels.STATUS_QUANTITY.get(status, "?")
    raise NumericalDegeneracyError(
        f"{quantity} lost positive definiteness", quantity=quantity, step=step,
        iteration=None if iteration is None or iteration < 0 else iteration + 1,
    )


def vb_measurement_update(pred: FilterState, z, C, cfg: IdentifierConfig):
    """Measurement update for one sample; returns ``(posterior, last_iterate)``."""
    _check_dims(pred, cfg)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if z.shape != (cfg.n_z,) or C.shape != (cfg.n_z, cfg.n_ar):
        raise ParameterError("z or C has the wrong shape")
    nz = pred.noise
    (x, SP, D, V, Psi, nu, u_mean, U, Ups, n_iter, status, fail_iter) = _kernels.skew_step(
        pred.x.copy(), psd_factor(pred.P), nz.DeltaHat.copy(), nz.V.copy(), nz.Psi.copy(),
        float(nz.nu), z, np.ascontiguousarray(C), cfg.vb_iterations, cfg.tol,
    )
    if status != _kernels.OK:
        _raise_status(status, None, fail_iter)
    log.debug("VB loop finished after %d iterations", n_iter)
    P = SP @ SP.T
    post = FilterState(x, P, MvniwParams(D, V, Psi, nu))
    Xi = np.block([[P, Ups], [Ups.T, U]])
    it = VbIterate(xi=np.concatenate([x, u_mean]), Xi=Xi, u_mean=u_mean, U=U, Upsilon=Ups)
    return post, it


def predict(post: FilterState, Q, gamma: float) -> FilterState:
    """Random-walk prediction of the coefficients plus noise-parameter forgetting."""
    Q = np.asarray(Q, dtype=float)
    return FilterState(post.x.copy(), post.P + Q, forget(post.noise, gamma))


@dataclass(eq=False)
class SkewTrace:
    """Per-step posterior (k|k) summaries from :func:`filter_skew`.

    ``final`` is the predictive state after the last step, so a stream can be
    continued by passing it as the next ``init``.
    """

    x: np.ndarray
    P_diag: np.ndarray
    DeltaHat: np.ndarray
    V: np.ndarray
    Psi: np.ndarray
    nu: np.ndarray
    vb_iterations: np.ndarray
    final: FilterState
    P: np.ndarray | None = field(default=None)

    def __len__(self):
        return self.x.shape[0]

    @property
    def expected_R(self) -> np.ndarray:
        n_z = self.Psi.shape[-1]
        return self.Psi / (self.nu - n_z - 1.0)[:, None, None]

    def states(self) -> list[FilterState]:
        if self.P is None:
            raise ValueError("trace was recorded without full covariances")
        return [
            FilterState(self.x[k], self.P[k], MvniwParams(self.DeltaHat[k], self.V[k], self.Psi[k], self.nu[k]))
            for k in range(len(self))
        ]


def _as_measurements(measurements, n_z):
    zs = np.asarray(measurements, dtype=float)
    if zs.size == 0:
        return np.zeros((0, n_z))
    if zs.ndim == 1 and n_z == 1:
        zs = zs[:, None]
    if zs.ndim != 2 or zs.shape[1] != n_z:
        raise ParameterError(f"measurements must have shape (K, {n_z}), got {zs.shape}")
    if not np.all(np.isfinite(zs)):
        raise ParameterError("measurements contain non-finite values")
    return np.ascontiguousarray(zs)


def _with_history(zs, history, n_ar, n_z):
    """Prepend up to ``n_ar`` earlier measurements (oldest first)."""
    if history is None:
        return zs, 0
    h = _as_measurements(history, n_z)[-n_ar:]
    return np.ascontiguousarray(np.concatenate([h, zs])), h.shape[0]


def filter_skew(measurements, init: FilterState, cfg: IdentifierConfig, store_P: bool = False,
                check_spd: bool = True, history=None) -> SkewTrace:
    """Run the identifier over a whole sequence inside the compiled driver.

    ``history`` holds measurements that preceded ``measurements`` (oldest
    first); they fill the first regressors when a stream is resumed.

    Raises :class:`NumericalDegeneracyError` with the 1-based step index on
    failure. ``check_spd`` additionally verifies that every posterior ``P``
    has a non-singular, finite square-root factor.
    """
    _check_dims(init, cfg)
    zs = _as_measurements(measurements, cfg.n_z)
    n_meas = zs.shape[0]
    zs, start = _with_history(zs, history, cfg.n_ar, cfg.n_z)
    adaptive, FQ, LK = cfg.kernel_args()
    nz = init.noise
    out = _kernels.skew_run(
        zs, start, init.x.copy(), psd_factor(init.P), nz.DeltaHat.copy(), nz.V.copy(), nz.Psi.copy(),
        float(nz.nu), cfg.gamma, adaptive, FQ, LK, cfg.vb_iterations, cfg.tol, store_P, check_spd,
    )
    (xs, p_diag, Ps, Ds, Vs, Psis, nus, iters, done, status, fail_step, fail_iter,
     x, SP, D, V, Psi, nu) = out
    if status != _kernels.OK:
        _raise_status(status, fail_step + 1, fail_iter)
    final = FilterState(x, SP @ SP.T, MvniwParams(D, V, Psi, nu)) if n_meas else init
    return SkewTrace(
        x=xs, P_diag=p_diag, DeltaHat=Ds, V=Vs, Psi=Psis, nu=nus, vb_iterations=iters,
        final=final, P=Ps if store_P else None,
    )


def run_identifier(measurements, init: FilterState, cfg: IdentifierConfig) -> list[FilterState]:
    """Posterior state after each measurement."""
    return filter_skew(measurements, init, cfg, store_P=True).states()
