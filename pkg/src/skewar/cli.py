"""Command-line entry point: ``skewar simulate | identify | benchmark``.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure,
4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .baseline import filter_gaussian
from .config import ConfigError, load_config
from .errors import DivergenceError, NumericalDegeneracyError, ParameterError
from .harness import BenchmarkAbortedError, replication_rng, run_benchmark, write_benchmark
from .identifier import filter_skew
from .simulate import generate_stable_coefficients, identification_error, simulate_trajectory
from .snapshot import load_checkpoint, save_state

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

log = logging.getLogger("skewar")


class InputError(ParameterError):
    """Malformed data file."""


def truth_path_for(data_path: str) -> str:
    stem, _ = os.path.splitext(data_path)
    return stem + ".truth.json"


def _add_common(p, *, replications=False, threads=False):
    p.add_argument("--config", help="YAML experiment configuration")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--steps", type=int, help="number of measurements K")
    p.add_argument("--gamma", type=float, help="forgetting factor in (0, 1]")
    p.add_argument("--vb-iters", type=int, dest="vb_iterations", help="VB iterations per measurement")
    if replications:
        p.add_argument("--replications", type=int)
    if threads:
        p.add_argument("--threads", type=int, help="worker threads for replications")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="skewar", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate one AR trajectory with a truth sidecar")
    _add_common(p)
    p.add_argument("--out", required=True, help="measurement CSV to write")

    p = sub.add_parser("identify", help="run an identifier over a measurement CSV")
    _add_common(p)
    p.add_argument("data", help="measurement CSV with columns k, z_1..z_nz")
    p.add_argument("--method", choices=("skew", "gaussian"), default="skew")
    p.add_argument("--out", required=True, help="estimates CSV to write")
    p.add_argument("--truth", help="truth sidecar (default: <data stem>.truth.json if present)")
    p.add_argument("--resume", help="continue from a saved filter state; the data file holds the next measurements")
    p.add_argument("--save-state", help="write the final predictive state here")

    p = sub.add_parser("benchmark", help="Monte Carlo comparison of both identifiers")
    _add_common(p, replications=True, threads=True)
    p.add_argument("--out", help="output directory (default: config 'out' or ./skewar-benchmark)")
    p.add_argument("--quiet", action="store_true", help="no progress counter")
    return parser


def _load(args):
    over = {k: getattr(args, k, None) for k in ("seed", "steps", "gamma", "vb_iterations", "replications",
                                                 "threads")}
    return load_config(args.config, **over)


def cmd_simulate(args) -> int:
    cfg = _load(args)
    rng = replication_rng(cfg.seed, 0)
    coeffs = generate_stable_coefficients(rng, cfg.n_ar)
    zs = simulate_trajectory(rng, coeffs, cfg.truth(), cfg.steps)
    parent = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(parent, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k"] + [f"z_{i + 1}" for i in range(cfg.n_z)])
        for k, z in enumerate(zs, start=1):
            w.writerow([k] + [repr(float(v)) for v in z])
    truth = {
        "coefficients": coeffs.tolist(),
        "mu": cfg.truth_mu.tolist(),
        "R": cfg.truth_R.tolist(),
        "Delta": cfg.truth_Delta.tolist(),
        "seed": [cfg.seed, 0],
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
    }
    with open(truth_path_for(args.out), "w") as fh:
        json.dump(truth, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(zs)} measurements to {args.out}")
    return EXIT_OK


def read_measurements(path: str, n_z: int) -> np.ndarray:
    """Parse ``k, z_1..z_nz`` rows; errors name the offending line."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: empty data file")
    header = [h.strip() for h in rows[0]]
    expected = ["k"] + [f"z_{i + 1}" for i in range(n_z)]
    if header != expected:
        raise InputError(f"{path}:1: header {header} does not match {expected}")
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != n_z + 1:
            raise InputError(f"{path}:{lineno}: expected {n_z + 1} fields, got {len(row)}")
        try:
            k = int(row[0])
            z = [float(c) for c in row[1:]]
        except ValueError:
            raise InputError(f"{path}:{lineno}: non-numeric field in {row}") from None
        if k != len(data) + 1:
            raise InputError(f"{path}:{lineno}: step index {k} out of sequence")
        if not all(np.isfinite(z)):
            raise InputError(f"{path}:{lineno}: non-finite measurement")
        data.append(z)
    if not data:
        raise InputError(f"{path}: no measurements")
    return np.array(data, dtype=float)


def cmd_identify(args) -> int:
    cfg = _load(args)
    zs = read_measurements(args.data, cfg.n_z)
    truth_file = args.truth
    if truth_file is None and os.path.exists(truth_path_for(args.data)):
        truth_file = truth_path_for(args.data)
    coeffs = None
    if truth_file is not None:
        with open(truth_file) as fh:
            try:
                coeffs = np.asarray(json.load(fh)["coefficients"], dtype=float)
            except (ValueError, KeyError) as exc:
                raise InputError(f"{truth_file}: unreadable truth sidecar ({exc})") from None
        if coeffs.shape != (cfg.n_ar,):
            raise ConfigError(f"truth has {coeffs.size} coefficients but n_ar = {cfg.n_ar}")

    icfg = cfg.identifier_config()
    init_s, init_g = cfg.initial_states()
    history = None
    if args.resume:
        init, history = load_checkpoint(args.resume)
        expected = type(init_s if args.method == "skew" else init_g)
        if not isinstance(init, expected):
            raise ConfigError(f"{args.resume} holds a {type(init).__name__}, method needs {expected.__name__}")
    else:
        init = init_s if args.method == "skew" else init_g

    if args.method == "skew":
        tr = filter_skew(zs, init, icfg, history=history)
    else:
        tr = filter_gaussian(zs, init, icfg, history=history)
    m, n = cfg.n_z, cfg.n_ar
    ER = tr.expected_R
    header = ["k"] + [f"x_{i + 1}" for i in range(n)] + [f"P_{i + 1}{i + 1}" for i in range(n)]
    if args.method == "skew":
        header += [f"Delta_{i + 1}{j + 1}" for i in range(m) for j in range(m)]
    header += [f"R_{i + 1}{j + 1}" for i in range(m) for j in range(m)]
    eps = identification_error(tr.x, coeffs) if coeffs is not None else None
    if eps is not None:
        header.append("eps")
    parent = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(parent, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k in range(len(tr)):
            row = [k + 1, *tr.x[k], *tr.P_diag[k]]
            if args.method == "skew":
                row += list(tr.DeltaHat[k].ravel())
            row += list(ER[k].ravel())
            if eps is not None:
                row.append(eps[k])
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
    if args.save_state:
        recent = zs if history is None else np.concatenate([history, zs])
        save_state(tr.final, args.save_state, history=recent[-n:])
    msg = f"identified {len(tr)} steps with the {args.method} method"
    if eps is not None:
        msg += f"; final error {eps[-1]:.6g}"
    print(msg)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    cfg = _load(args)
    out = args.out or cfg.out or "skewar-benchmark"

    def progress(done, total):
        if not args.quiet:
            print(f"\r{done}/{total} replications", end="" if done < total else "\n", file=sys.stderr, flush=True)

    result = run_benchmark(cfg, progress=progress)
    paths = write_benchmark(result, out)
    fin = result.final
    print(f"replications completed: {len(result.records)}/{cfg.replications}")
    print(f"fraction with lower error (rho_K > 0): {fin['fraction_rho_positive']:.4f}")
    print(f"fraction with >= 25% lower error (rho_K > 0.25): {fin['fraction_rho_above_0.25']:.4f}")
    print(f"median rho_K: {fin['percentiles']['p50']:.4f}")
    print(f"summary: {paths['summary']}")
    return EXIT_OK


_COMMANDS = {"simulate": cmd_simulate, "identify": cmd_identify, "benchmark": cmd_benchmark}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (NumericalDegeneracyError, DivergenceError, BenchmarkAbortedError) as exc:
        print(f"skewar: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ParameterError as exc:
        print(f"skewar: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"skewar: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
