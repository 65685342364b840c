"""Canonical fundamental skew normal (CFUSN) distribution.

The parametrization is shifted so that the mean does not depend on the
skewness matrix: ``z = mu + Delta (u - sqrt(2/pi) 1) + R^{1/2} w`` with
``u ~ N_+(0, I)`` and ``w ~ N(0, I)``. Hence ``E[z] = mu`` and
``Var[z] = R + (1 - 2/pi) Delta Delta^T``, the middle factor being the
variance of a half-normal variable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import ParameterError

__all__ = [
    "SQRT_2_OVER_PI",
    "HALF_NORMAL_VAR",
    "SkewNormalParams",
    "mvn_cdf",
    "sn_logpdf",
    "sn_pdf",
    "sn_moments",
    "sn_sample",
]

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
HALF_NORMAL_VAR = 1.0 - 2.0 / math.pi

# absolute tolerance of the orthant probability for n_z >= 3
MVN_CDF_ATOL = 1e-8


def _as_spd(name, M, n, symmetry_rtol=1e-10):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape != (n, n):
        raise ParameterError(f"{name} must have shape ({n}, {n}), got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ParameterError(f"{name} has non-finite entries")
    scale = max(float(np.max(np.abs(M))), 1.0)
    if np.max(np.abs(M - M.T)) > symmetry_rtol * scale:
        raise ParameterError(f"{name} is not symmetric")
    M = 0.5 * (M + M.T)
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise ParameterError(f"{name} is not positive definite") from None
    return M


@dataclass(frozen=True, eq=False)
class SkewNormalParams:
    """Location ``mu``, scale ``R`` (SPD) and skewness ``Delta`` (square)."""

    mu: np.ndarray
    R: np.ndarray
    Delta: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        if mu.ndim != 1:
            raise ParameterError("mu must be a vector")
        n = mu.shape[0]
        R = _as_spd("R", self.R, n)
        Delta = np.atleast_2d(np.asarray(self.Delta, dtype=float))
        if Delta.shape != (n, n):
            raise ParameterError(f"Delta must have shape ({n}, {n}), got {Delta.shape}")
        if not np.all(np.isfinite(Delta)):
            raise ParameterError("Delta has non-finite entries")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "Delta", Delta)

    @property
    def n_z(self) -> int:
        return self.mu.shape[0]

    @property
    def Omega(self) -> np.ndarray:
        return self.R + self.Delta @ self.Delta.T

    @classmethod
    def standardized_1d(cls, delta: float) -> "SkewNormalParams":
        """Zero-mean, unit-variance scalar distribution with skewness ``delta``.

        Requires ``delta**2 < 1 / (1 - 2/pi)``.
        """
        r = 1.0 - HALF_NORMAL_VAR * delta**2
        if r <= 0:
            raise ParameterError("|delta| too large for unit variance")
        return cls(mu=[0.0], R=[[r]], Delta=[[delta]])


def _bvn_cdf(h, k, rho):
    """P(X <= h, Y <= k) for a standard bivariate normal, via Owen's T."""
    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    tiny = 1e-300
    h = np.where(h == 0.0, tiny, h)
    k = np.where(k == 0.0, tiny, k)
    root = math.sqrt(1.0 - rho * rho)
    a_h = (k - rho * h) / (h * root)
    a_k = (h - rho * k) / (k * root)
    beta = np.where(np.signbit(h) == np.signbit(k), 0.0, 0.5)
    out = 0.5 * (special.ndtr(h) + special.ndtr(k)) - special.owens_t(h, a_h) - special.owens_t(k, a_k) - beta
    return np.clip(out, 0.0, 1.0)


def _mvn_cdf_recursive(b, cov, atol):
    n = b.shape[0]
    if n == 1:
        return float(special.ndtr(b[0] / math.sqrt(cov[0, 0])))
    if n == 2:
        s1, s2 = math.sqrt(cov[0, 0]), math.sqrt(cov[1, 1])
        return float(_bvn_cdf(b[0] / s1, b[1] / s2, cov[0, 1] / (s1 * s2)))
    s1 = math.sqrt(cov[0, 0])
    reg = cov[1:, 0] / s1
    cond = cov[1:, 1:] - np.outer(reg, reg)
    rest = b[1:]

    # integrate over p = Phi(t) so the domain is bounded and the weight flat
    def integrand(p):
        t = special.ndtri(p)
        return _mvn_cdf_recursive(rest - reg * t, cond, atol)

    upper = float(special.ndtr(b[0] / s1))
    if upper <= 0.0:
        return 0.0
    val, _ = integrate.quad(integrand, 0.0, upper, epsabs=atol / 10, epsrel=0.0, limit=200)
    return min(max(val, 0.0), 1.0)


def mvn_cdf(b, cov, atol=MVN_CDF_ATOL):
    """Zero-mean multivariate normal CDF ``P(X <= b)`` for ``X ~ N(0, cov)``.

    Exact closed forms for one and two dimensions (error function, Owen's
    T); for three or more dimensions, nested adaptive quadrature over the
    leading coordinate with absolute tolerance ``atol``. ``b`` may carry
    leading batch dimensions.
    """
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    b = np.asarray(b, dtype=float)
    n = cov.shape[0]
    if b.shape[-1] != n:
        raise ParameterError("dimension mismatch between b and cov")
    if n == 1:
        return special.ndtr(b[..., 0] / math.sqrt(cov[0, 0]))
    if n == 2:
        s1, s2 = math.sqrt(cov[0, 0]), math.sqrt(cov[1, 1])
        return _bvn_cdf(b[..., 0] / s1, b[..., 1] / s2, cov[0, 1] / (s1 * s2))
    flat = b.reshape(-1, n)
    out = np.array([_mvn_cdf_recursive(row, cov, atol) for row in flat])
    return out.reshape(b.shape[:-1])


def _check_z(z, n):
    z = np.asarray(z, dtype=float)
    if z.ndim == 0 and n == 1:
        z = z.reshape(1)
    if z.shape[-1] != n:
        raise ParameterError(f"expected trailing dimension {n}, got shape {z.shape}")
    return z


def sn_logpdf(z, params: SkewNormalParams):
    """Log-density of the CFUSN distribution. ``z`` has shape ``(..., n_z)``."""
    n = params.n_z
    z = _check_z(z, n)
    Delta = params.Delta
    Omega = params.Omega
    chol = np.linalg.cholesky(Omega)
    loc = params.mu - SQRT_2_OVER_PI * Delta.sum(axis=1)
    dev = z - loc
    # solve Omega^{-1} dev for all rows at once
    white = np.linalg.solve(chol, dev.reshape(-1, n).T)
    alpha = np.linalg.solve(chol.T, white).T.reshape(dev.shape)
    maha = np.sum(white**2, axis=0).reshape(dev.shape[:-1])
    log_det = 2.0 * np.sum(np.log(np.diag(chol)))
    log_normal = -0.5 * (n * math.log(2.0 * math.pi) + log_det + maha)

    omega_inv_delta = np.linalg.solve(Omega, Delta)
    trunc_cov = np.eye(n) - Delta.T @ omega_inv_delta
    trunc_cov = 0.5 * (trunc_cov + trunc_cov.T)
    eig = np.linalg.eigvalsh(trunc_cov)
    if eig[0] <= 0.0:
        raise ParameterError("truncation scale I - Delta^T Omega^-1 Delta lost positive definiteness")
    arg = alpha @ Delta
    if n == 1:
        log_cdf = special.log_ndtr(arg[..., 0] / math.sqrt(trunc_cov[0, 0]))
    else:
        with np.errstate(divide="ignore"):
            log_cdf = np.log(mvn_cdf(arg, trunc_cov))
    return n * math.log(2.0) + log_normal + log_cdf


def sn_pdf(z, params: SkewNormalParams):
    """Density of the CFUSN distribution. Scalar for a single point."""
    out = np.exp(sn_logpdf(z, params))
    return float(out) if np.ndim(out) == 0 else out


def sn_moments(params: SkewNormalParams):
    """Mean and covariance ``(mu, R + (1 - 2/pi) Delta Delta^T)``."""
    D = params.Delta
    cov = params.R + HALF_NORMAL_VAR * (D @ D.T)
    return params.mu.copy(), 0.5 * (cov + cov.T)


def sn_sample(rng: np.random.Generator, params: SkewNormalParams, count: int) -> np.ndarray:
    """Draw ``count`` samples, shape ``(count, n_z)``.

    The positive-orthant normal is sampled as ``|N(0, I)|`` componentwise,
    which is exact only because its covariance is the identity. Do not
    reuse this for correlated truncation.
    """
    if count < 1:
        raise ParameterError("count must be positive")
    n = params.n_z
    try:
        L = np.linalg.cholesky(params.R)
    except np.linalg.LinAlgError:
        raise ParameterError("R is not positive definite") from None
    u = np.abs(rng.standard_normal((count, n)))
    w = rng.standard_normal((count, n))
    return params.mu + (u - SQRT_2_OVER_PI) @ params.Delta.T + w @ L.T
