"""Acceptance suite: every criterion at its stated tolerance.

Each test records a one-line PASS/FAIL verdict that is printed in the
terminal summary. The two 200 x 10000 benchmarks take several minutes each.
"""

import math
import os
import time

import numpy as np
import pytest
from scipy import stats

from skewar.cli import main
from skewar.harness import ExperimentConfig, run_benchmark
from skewar.identifier import FilterState, IdentifierConfig, build_regressor, filter_skew
from skewar.mvniw import MvniwParams, expected_R, mvniw_cross_moments
from skewar.priors import skew_noise_prior
from skewar.simulate import generate_stable_coefficients, simulate_trajectory
from skewar.skew_normal import HALF_NORMAL_VAR, SkewNormalParams, sn_moments, sn_sample
from skewar.truncation import GaussianMoments, sequential_truncate, truncated_scalar_moments

from conftest import ACCEPTANCE, mc_band

THREADS = os.cpu_count() or 1
DESK = dict(n_ar=25, n_z=2, steps=10_000, replications=200, gamma=0.975, vb_iterations=10, seed=2024,
            threads=THREADS)
TRUE_DELTA = np.array([[2.0, 0.0], [1.0, 2.0]])


def verdict(n, passed, detail):
    ACCEPTANCE[n] = (bool(passed), detail)
    assert passed, detail


def timed_benchmark(cfg):
    t0 = time.perf_counter()
    res = run_benchmark(cfg)
    return res, time.perf_counter() - t0


@pytest.fixture(scope="session")
def desk_run():
    return timed_benchmark(ExperimentConfig(**DESK))


@pytest.fixture(scope="session")
def symmetric_run():
    # same total innovation covariance as the skewed truth, no skewness
    R = 0.01 * np.eye(2) + HALF_NORMAL_VAR * TRUE_DELTA @ TRUE_DELTA.T
    cfg = ExperimentConfig(**{**DESK, "seed": 4048}, truth_R=R, truth_Delta=np.zeros((2, 2)))
    return timed_benchmark(cfg)


def test_criterion_1_desk_scale_comparison(desk_run):
    res, seconds = desk_run
    last = res.rho[:, -1]
    win = float(np.mean(last > 0))
    med = float(np.median(last))
    above = float(np.mean(last > 0.25))
    ok = win >= 0.85 and med >= 0.15 and seconds < 20 * 60
    verdict(1, ok, f"win fraction {win:.3f} (>= 0.85), median rho_K {med:.4f} (>= 0.15), "
                   f"fraction rho_K > 0.25 {above:.3f}, {len(res.records)} replications in {seconds / 60:.1f} min")


def test_criterion_2_improvement_trend(desk_run):
    res, _ = desk_run
    med = {k: float(np.median(res.rho[:, k - 1])) for k in (100, 1000, 10_000)}
    ok = med[100] <= med[1000] + 0.02 and med[1000] <= med[10_000] + 0.02
    verdict(2, ok, "median rho_k at k=100/1000/10000: " + " / ".join(f"{v:.4f}" for v in med.values())
            + " (non-decreasing with slack 0.02)")


def test_criterion_3_symmetric_truth_null(symmetric_run):
    res, _ = symmetric_run
    med = float(np.median(res.rho[:, -1]))
    verdict(3, -0.05 <= med <= 0.05, f"median rho_K {med:.4f} with symmetric innovations (within +-0.05)")


def test_criterion_4_kalman_reduction():
    rng = np.random.default_rng(31)
    n_ar, K = 5, 1000
    a = generate_stable_coefficients(rng, n_ar)
    R = np.array([[0.3]])
    zs = simulate_trajectory(rng, a, SkewNormalParams([0.0], R, [[0.0]]), K)
    Q = 1e-5 * np.eye(n_ar)
    nu = 1e9
    noise = MvniwParams([[0.0]], [[1e-12]], (nu - 2) * R, nu)
    P0 = np.eye(n_ar)
    tr = filter_skew(zs, FilterState(np.zeros(n_ar), P0, noise), IdentifierConfig(n_ar, 1, gamma=1.0, q_policy=Q),
                     store_P=True)
    x, P = np.zeros(n_ar), P0.copy()
    worst = 0.0
    for k in range(K):
        C = build_regressor(zs[:k][::-1], n_ar, 1)
        S = C @ P @ C.T + R
        G = P @ C.T / S[0, 0]
        x = x + G @ (zs[k] - C @ x)
        P = P - G @ S @ G.T
        worst = max(worst, np.max(np.abs(tr.x[k] - x)), np.max(np.abs(tr.P[k] - P)))
        P = P + Q
    verdict(4, worst <= 1e-6, f"max per-step deviation from the Kalman filter {worst:.2e} (<= 1e-6) over {K} steps")


def _wishart_joint(rng, p, count):
    n = p.n_z
    prec = stats.wishart.rvs(df=p.nu - n - 1, scale=np.linalg.inv(p.Psi), size=count, random_state=rng)
    prec = prec.reshape(count, n, n)
    R = np.linalg.inv(prec)
    G = rng.standard_normal((count, n, n))
    D = p.DeltaHat + np.linalg.cholesky(R) @ G @ np.linalg.cholesky(p.V).T
    return prec, R, D


def _random_spd(rng, n, floor):
    G = rng.normal(size=(n, n))
    return G @ G.T / n + floor * np.eye(n)


def test_criterion_5_moment_identities():
    rng = np.random.default_rng(55)
    n_sets, draws = 20, 200_000
    worst = {"expected_R": 0.0, "cross_moments": 0.0, "sn_moments": 0.0}
    compared = outside = 0

    def band(name, mc_mean, mc_se, exact):
        nonlocal compared, outside
        z = np.abs(mc_mean - exact) / mc_se
        compared += z.size
        outside += int(np.count_nonzero(z > 3.0))
        worst[name] = max(worst[name], float(np.max(z)))

    for _ in range(n_sets):
        n = int(rng.integers(1, 4))
        p = MvniwParams(rng.normal(size=(n, n)), _random_spd(rng, n, 0.2), _random_spd(rng, n, 0.5),
                        2 * n + rng.uniform(0.5, 6.0))
        prec, R, D = _wishart_joint(rng, p, draws)
        # E[R^-1] is the inverse of expected_R
        band("expected_R", *mc_band(prec), np.linalg.inv(expected_R(p)))
        first, second = mvniw_cross_moments(p)
        band("cross_moments", *mc_band(prec @ D), first)
        band("cross_moments", *mc_band(np.swapaxes(D, 1, 2) @ prec @ D), second)
        sn = SkewNormalParams(rng.normal(size=n), _random_spd(rng, n, 0.05), rng.normal(size=(n, n)))
        x = sn_sample(rng, sn, draws)
        mean, cov = sn_moments(sn)
        band("sn_moments", *mc_band(x), mean)
        c = x - mean
        band("sn_moments", *mc_band(c[:, :, None] * c[:, None, :]), cov)
    ok = outside == 0
    verdict(5, ok, f"{n_sets} random sets, {compared} entries, {outside} outside 3 standard errors; largest: "
            + ", ".join(f"{k} {v:.2f}" for k, v in worst.items()))


def _rejection(rng, mean, cov, constrained, total, chunk=1_000_000):
    L = np.linalg.cholesky(cov)
    kept = []
    for _ in range(total // chunk):
        x = mean + rng.standard_normal((chunk, len(mean))) @ L.T
        kept.append(x[(x[:, constrained] >= 0).all(axis=1)])
    x = np.concatenate(kept)
    return x.mean(axis=0), np.cov(x.T)


def test_criterion_6_sequential_truncation():
    rng = np.random.default_rng(66)
    d, constrained = 4, [1, 3]
    worst = worst_trunc = 0.0

    def dev(out, m, c, sd):
        return max(np.max(np.abs(out.mean - m) / sd), np.max(np.abs(out.cov - c) / np.outer(sd, sd)))

    for _ in range(10):
        mean = rng.normal(size=d)
        cov = _random_spd(rng, d, 0.5)
        out = sequential_truncate(GaussianMoments(mean, cov), constrained)
        m, c = _rejection(rng, mean, cov, constrained, 10_000_000)
        # marginal sd of the normal being truncated; the truncated sd is reported alongside
        worst = max(worst, dev(out, m, c, np.sqrt(np.diag(cov))))
        worst_trunc = max(worst_trunc, dev(out, m, c, np.sqrt(np.diag(c))))
    diag_worst = 0.0
    for _ in range(10):
        mean = rng.normal(size=d)
        var = rng.uniform(0.1, 3.0, size=d)
        out = sequential_truncate(GaussianMoments(mean, np.diag(var)), constrained)
        exact_m, exact_v = mean.copy(), var.copy()
        for i in constrained:
            exact_m[i], exact_v[i] = truncated_scalar_moments(mean[i], var[i])
        diag_worst = max(diag_worst, np.max(np.abs(out.mean - exact_m)), np.max(np.abs(out.cov - np.diag(exact_v))))
    ok = worst <= 0.03 and diag_worst <= 1e-12
    verdict(6, ok, f"largest deviation from 1e7-sample rejection {worst:.4f} in marginal sd units (<= 0.03; "
                   f"{worst_trunc:.4f} in truncated sd units); diagonal cases {diag_worst:.1e} (<= 1e-12)")


def test_criterion_7_invariants(desk_run, symmetric_run):
    problems = []
    for name, (res, _) in (("desk", desk_run), ("symmetric", symmetric_run)):
        inv = res.invariants
        gamma, n_z = res.config.gamma, res.config.n_z
        if res.failures:
            problems.append(f"{name}: {len(res.failures)} failed replications")
        for key in ("skew_min_P_diag", "skew_min_eig_Psi", "skew_min_eig_V", "gauss_min_P_diag", "gauss_min_eig_Psi"):
            if not inv[key] > 0:
                problems.append(f"{name}: {key} = {inv[key]}")
        if not (2 * n_z < inv["skew_nu_min"] and inv["skew_nu_max"] <= 2 * n_z + 1 / (1 - gamma) + 1e-9):
            problems.append(f"{name}: skew nu range [{inv['skew_nu_min']}, {inv['skew_nu_max']}]")
        if not (n_z + 1 < inv["gauss_nu_min"] and inv["gauss_nu_max"] <= n_z + 1 + 1 / (1 - gamma) + 1e-9):
            problems.append(f"{name}: gaussian nu range [{inv['gauss_nu_min']}, {inv['gauss_nu_max']}]")
    inv = desk_run[0].invariants
    detail = (f"no failed steps, P/Psi/V positive definite, skew nu in [{inv['skew_nu_min']:.4f}, "
              f"{inv['skew_nu_max']:.4f}] within (4, 44]") if not problems else "; ".join(problems)
    verdict(7, not problems, detail)


def test_criterion_8_prior_sanity():
    p = skew_noise_prior(2)
    a = np.max(np.abs(expected_R(p) - 0.5 * np.eye(2)))
    b = np.max(np.abs(p.DeltaHat @ p.DeltaHat * (2 / math.pi) - 0.5 * np.eye(2)))
    verdict(8, a <= 1e-12 and b <= 1e-12, f"|E[R^-1]^-1 - I/2| = {a:.1e}, |(2/pi) DeltaHat^2 - I/2| = {b:.1e} (<= 1e-12)")


def test_criterion_9_benchmark_determinism(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("n_ar: 25\nsteps: 1000\nreplications: 4\nseed: 99\nthin: 10\n")
    for name in ("first", "second"):
        code = main(["benchmark", "--config", str(cfg), "--quiet", "--out", str(tmp_path / name)])
        assert code == 0
    same = {f: (tmp_path / "first" / f).read_bytes() == (tmp_path / "second" / f).read_bytes()
            for f in ("replications.csv", "summary.json")}
    verdict(9, all(same.values()), "byte-identical outputs across two runs: "
            + ", ".join(f"{f} {'yes' if v else 'no'}" for f, v in same.items()))
