"""Monte Carlo comparison of the skew-normal identifier against the baseline.

Each replication draws stable AR coefficients and a trajectory from its own
random stream, seeded by ``np.random.SeedSequence([seed, replication])``, so
results do not depend on execution order or on the number of worker
threads. Replications run in a thread pool; the compiled kernels release
the GIL.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Callable

import numpy as np

from ._accel import USE_NUMBA
from .baseline import GaussianFilterState, filter_gaussian
from .errors import DivergenceError, NumericalDegeneracyError, ParameterError
from .identifier import FilterState, IdentifierConfig, filter_skew
from .priors import DEFAULT_NU, gaussian_noise_prior, skew_noise_prior, stable_spline_prior
from .simulate import generate_stable_coefficients, identification_error, simulate_trajectory
from .skew_normal import SkewNormalParams

__all__ = [
    "ExperimentConfig",
    "BenchmarkRecord",
    "BenchmarkResult",
    "BenchmarkAbortedError",
    "replication_rng",
    "run_replication",
    "run_benchmark",
    "relative_difference",
    "write_benchmark",
    "PERCENTILES",
]

log = logging.getLogger(__name__)

PERCENTILES = (5, 25, 50, 75, 95)
IMPROVEMENT_THRESHOLD = 0.25
FAILURE_TOLERANCE = 0.01
# denominators below this are replaced by it when forming rho
EPS_GUARD = 1e-12
SUMMARY_FORMAT = "skewar-benchmark-summary v1"


class BenchmarkAbortedError(RuntimeError):
    """Too many replications failed for the remainder to be representative."""


def _matrix(value, n, name):
    M = np.atleast_2d(np.asarray(value, dtype=float))
    if M.shape != (n, n):
        raise ParameterError(f"{name} must be {n}x{n}, got {M.shape}")
    return M


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Everything that determines a benchmark run.

    Defaults reproduce the reference experiment: AR(25) with 2-dimensional
    innovations, ``R = 0.01 I``, ``Delta = [[2, 0], [1, 2]]``, forgetting
    factor 0.975 and 10 VB iterations. ``truth_Delta`` has no default for
    ``n_z != 2``.

    Prior knobs left at ``None`` take the package defaults from
    :mod:`skewar.priors`. ``thin`` keeps every ``thin``-th step (plus the
    last) in the CSV and the percentile curves.
    """

    n_ar: int = 25
    n_z: int = 2
    steps: int = 10_000
    replications: int = 1000
    gamma: float = 0.975
    vb_iterations: int = 10
    vb_tol: float | None = None
    seed: int = 0
    q_policy: str | np.ndarray = "adaptive"
    truth_mu: np.ndarray | None = None
    truth_R: np.ndarray | None = None
    truth_Delta: np.ndarray | None = None
    prior_nu: float = DEFAULT_NU
    prior_delta_scale: float | None = None
    prior_v_scale: float = 1.0
    prior_psi_scale: float | None = None
    gauss_prior_nu: float | None = None
    gauss_prior_psi_scale: float | None = None
    thin: int = 1
    threads: int = 1
    out: str | None = None

    def __post_init__(self):
        for name in ("n_ar", "n_z", "steps", "replications", "vb_iterations", "thin", "threads"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise ParameterError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ParameterError(f"seed must be a non-negative integer, got {self.seed!r}")
        object.__setattr__(self, "seed", int(self.seed))
        n = self.n_z
        mu = np.zeros(n) if self.truth_mu is None else np.atleast_1d(np.asarray(self.truth_mu, dtype=float))
        if mu.shape != (n,):
            raise ParameterError(f"truth_mu must have length {n}")
        R = 0.01 * np.eye(n) if self.truth_R is None else _matrix(self.truth_R, n, "truth_R")
        if self.truth_Delta is None:
            if n != 2:
                raise ParameterError("truth_Delta has no default for n_z != 2")
            Delta = np.array([[2.0, 0.0], [1.0, 2.0]])
        else:
            Delta = _matrix(self.truth_Delta, n, "truth_Delta")
        object.__setattr__(self, "truth_mu", mu)
        object.__setattr__(self, "truth_R", R)
        object.__setattr__(self, "truth_Delta", Delta)
        if isinstance(self.q_policy, (list, tuple)):
            object.__setattr__(self, "q_policy", np.asarray(self.q_policy, dtype=float))
        # builds and validates everything derived
        self.truth()
        self.identifier_config()
        self.initial_states()

    def truth(self) -> SkewNormalParams:
        return SkewNormalParams(self.truth_mu, self.truth_R, self.truth_Delta)

    def identifier_config(self) -> IdentifierConfig:
        return IdentifierConfig(
            n_ar=self.n_ar, n_z=self.n_z, gamma=float(self.gamma), vb_iterations=self.vb_iterations,
            vb_tol=self.vb_tol, q_policy=self.q_policy,
        )

    def initial_states(self) -> tuple[FilterState, GaussianFilterState]:
        P0 = stable_spline_prior(self.n_ar)
        x0 = np.zeros(self.n_ar)
        noise = skew_noise_prior(
            self.n_z, nu=self.prior_nu, delta_scale=self.prior_delta_scale, v_scale=self.prior_v_scale,
            psi_scale=self.prior_psi_scale,
        )
        g_nu = self.prior_nu if self.gauss_prior_nu is None else self.gauss_prior_nu
        Psi, nu = gaussian_noise_prior(self.n_z, nu=g_nu, psi_scale=self.gauss_prior_psi_scale)
        return FilterState(x0, P0, noise), GaussianFilterState(x0, P0, Psi, nu)

    def sampled_steps(self) -> np.ndarray:
        """1-based step indices kept after thinning; always ends with ``steps``."""
        ks = np.arange(self.thin, self.steps + 1, self.thin)
        if ks.size == 0 or ks[-1] != self.steps:
            ks = np.append(ks, self.steps)
        return ks

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, np.ndarray):
                v = v.tolist()
            out[f.name] = v
        return out

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON of everything except output and thread settings."""
        d = self.to_dict()
        for key in ("out", "threads"):
            d.pop(key)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)


def replication_rng(seed: int, replication: int) -> np.random.Generator:
    """Independent stream for one replication."""
    return np.random.default_rng(np.random.SeedSequence([seed, replication]))


def relative_difference(eps_skew, eps_gauss):
    """``(eps_gauss - eps_skew) / eps_gauss`` and the number of guarded denominators."""
    eps_skew = np.asarray(eps_skew, dtype=float)
    eps_gauss = np.asarray(eps_gauss, dtype=float)
    small = eps_gauss < EPS_GUARD
    denom = np.where(small, EPS_GUARD, eps_gauss)
    return (eps_gauss - eps_skew) / denom, int(np.count_nonzero(small))


@dataclass(eq=False)
class BenchmarkRecord:
    """Per-step identification errors of one replication."""

    replication: int
    seed: tuple
    eps_skew: np.ndarray
    eps_gauss: np.ndarray
    config_hash: str
    coefficients: np.ndarray
    invariants: dict = field(default_factory=dict)

    @property
    def rho(self) -> np.ndarray:
        return relative_difference(self.eps_skew, self.eps_gauss)[0]


def _min_eig(stack):
    if len(stack) == 0:
        return math.inf
    return float(np.min(np.linalg.eigvalsh(stack)))


def run_replication(cfg: ExperimentConfig, replication: int, config_hash: str | None = None) -> BenchmarkRecord:
    """Simulate one trajectory and run both identifiers on it."""
    rng = replication_rng(cfg.seed, replication)
    coeffs = generate_stable_coefficients(rng, cfg.n_ar)
    zs = simulate_trajectory(rng, coeffs, cfg.truth(), cfg.steps)
    icfg = cfg.identifier_config()
    init_s, init_g = cfg.initial_states()
    s = filter_skew(zs, init_s, icfg)
    g = filter_gaussian(zs, init_g, icfg)
    inv = {
        "skew_min_P_diag": float(np.min(s.P_diag)),
        "skew_min_eig_Psi": _min_eig(s.Psi),
        "skew_min_eig_V": _min_eig(s.V),
        "skew_nu_min": float(np.min(s.nu)),
        "skew_nu_max": float(np.max(s.nu)),
        "gauss_min_P_diag": float(np.min(g.P_diag)),
        "gauss_min_eig_Psi": _min_eig(g.Psi),
        "gauss_nu_min": float(np.min(g.nu)),
        "gauss_nu_max": float(np.max(g.nu)),
    }
    return BenchmarkRecord(
        replication=replication,
        seed=(cfg.seed, replication),
        eps_skew=identification_error(s.x, coeffs),
        eps_gauss=identification_error(g.x, coeffs),
        config_hash=config_hash or cfg.config_hash(),
        coefficients=coeffs,
        invariants=inv,
    )


_INVARIANT_REDUCE = {
    "skew_min_P_diag": min, "skew_min_eig_Psi": min, "skew_min_eig_V": min, "skew_nu_min": min,
    "skew_nu_max": max, "gauss_min_P_diag": min, "gauss_min_eig_Psi": min, "gauss_nu_min": min,
    "gauss_nu_max": max,
}


@dataclass(eq=False)
class BenchmarkResult:
    config: ExperimentConfig
    config_hash: str
    records: list
    failures: list
    ks: np.ndarray
    curves: dict
    final: dict
    epsilon_guard_count: int
    invariants: dict
    wall_clock_seconds: float

    @property
    def rho(self) -> np.ndarray:
        """``(replications, steps)`` relative differences of the completed runs."""
        return np.array([r.rho for r in self.records])

    def summary(self) -> dict:
        """Deterministic summary; wall-clock time and the thread count are kept out of it."""
        config = self.config.to_dict()
        config.pop("threads")
        return {
            "format": SUMMARY_FORMAT,
            "config": config,
            "config_hash": self.config_hash,
            "seed_rule": "numpy.random.SeedSequence([seed, replication])",
            "replications": {
                "requested": self.config.replications,
                "completed": len(self.records),
                "seeds": [list(r.seed) for r in self.records],
                "failed": self.failures,
            },
            "final": self.final,
            "epsilon_guard_count": self.epsilon_guard_count,
            "invariants": self.invariants,
            "curves": {key: [float(v) for v in val] for key, val in self.curves.items()},
        }


def _failure_entry(cfg, replication, exc):
    return {"replication": replication, "seed": [cfg.seed, replication], "error": f"{type(exc).__name__}: {exc}"}


def run_benchmark(cfg: ExperimentConfig, progress: Callable[[int, int], None] | None = None) -> BenchmarkResult:
    """Run all replications and aggregate the relative-difference statistics.

    A replication that raises a numerical error is logged with its seed and
    dropped; if that happens to 1% of the replications or more, the whole
    benchmark is aborted with :class:`BenchmarkAbortedError`.
    """
    chash = cfg.config_hash()
    n = cfg.replications
    t0 = time.perf_counter()

    def one(rep):
        try:
            return run_replication(cfg, rep, chash)
        except (NumericalDegeneracyError, DivergenceError) as exc:
            log.warning("replication %d (seed [%d, %d]) failed: %s", rep, cfg.seed, rep, exc)
            return _failure_entry(cfg, rep, exc)

    results = [None] * n
    if cfg.threads == 1:
        for rep in range(n):
            results[rep] = one(rep)
            if progress:
                progress(rep + 1, n)
    else:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            for done, (rep, res) in enumerate(zip(range(n), pool.map(one, range(n))), start=1):
                results[rep] = res
                if progress:
                    progress(done, n)
    wall = time.perf_counter() - t0

    records = [r for r in results if isinstance(r, BenchmarkRecord)]
    failures = [r for r in results if isinstance(r, dict)]
    if failures and len(failures) >= FAILURE_TOLERANCE * n:
        raise BenchmarkAbortedError(
            f"{len(failures)} of {n} replications failed (first: {failures[0]['error']})"
        )

    ks = cfg.sampled_steps()
    guard = 0
    rhos = []
    for r in records:
        rho, g = relative_difference(r.eps_skew, r.eps_gauss)
        rhos.append(rho)
        guard += g
    rho = np.array(rhos).reshape(len(records), cfg.steps)
    sampled = rho[:, ks - 1]
    curves = {"k": ks.astype(float)}
    for p in PERCENTILES:
        curves[f"p{p}"] = np.percentile(sampled, p, axis=0)
    last = rho[:, -1]
    final = {
        "k": cfg.steps,
        "fraction_rho_positive": float(np.mean(last > 0)),
        "fraction_rho_above_0.25": float(np.mean(last > IMPROVEMENT_THRESHOLD)),
        "percentiles": {f"p{p}": float(np.percentile(last, p)) for p in PERCENTILES},
        "median_eps_skew": float(np.median([r.eps_skew[-1] for r in records])),
        "median_eps_gauss": float(np.median([r.eps_gauss[-1] for r in records])),
    }
    invariants = {}
    for key, red in _INVARIANT_REDUCE.items():
        invariants[key] = float(red(r.invariants[key] for r in records))
    return BenchmarkResult(
        config=cfg, config_hash=chash, records=records, failures=failures, ks=ks, curves=curves,
        final=final, epsilon_guard_count=guard, invariants=invariants, wall_clock_seconds=wall,
    )


def write_benchmark(result: BenchmarkResult, out_dir: str) -> dict:
    """Write ``replications.csv``, ``summary.json`` and ``timing.json``.

    The CSV and the summary are byte-identical across reruns of the same
    configuration; wall-clock time lives only in ``timing.json``. Returns
    the three paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "csv": os.path.join(out_dir, "replications.csv"),
        "summary": os.path.join(out_dir, "summary.json"),
        "timing": os.path.join(out_dir, "timing.json"),
    }
    idx = result.ks - 1
    with open(paths["csv"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["replication", "k", "eps_skew", "eps_gauss", "rho"])
        for r in result.records:
            rho = r.rho
            for i, k in zip(idx, result.ks):
                w.writerow([r.replication, int(k), repr(float(r.eps_skew[i])), repr(float(r.eps_gauss[i])),
                            repr(float(rho[i]))])
    with open(paths["summary"], "w") as fh:
        json.dump(result.summary(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(paths["timing"], "w") as fh:
        json.dump({
            "config_hash": result.config_hash,
            "wall_clock_seconds": result.wall_clock_seconds,
            "threads": result.config.threads,
            "numba": USE_NUMBA,
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths
