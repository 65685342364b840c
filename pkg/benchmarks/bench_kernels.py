"""Time the compiled kernels against the pure-numpy fallback.

Each backend runs in its own interpreter because the choice is made at
import time (``SKEWAR_DISABLE_NUMBA``). The numba timing excludes
compilation: one short warm-up run happens first.

    python3 benchmarks/bench_kernels.py --steps 2000 --repeat 3
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from skewar import _accel
from skewar.harness import ExperimentConfig, replication_rng
from skewar.identifier import filter_skew
from skewar.baseline import filter_gaussian
from skewar.simulate import generate_stable_coefficients, simulate_trajectory

steps, repeat = int(sys.argv[1]), int(sys.argv[2])
cfg = ExperimentConfig(steps=steps, replications=1)
rng = replication_rng(0, 0)
a = generate_stable_coefficients(rng, cfg.n_ar)
zs = simulate_trajectory(rng, a, cfg.truth(), steps)
icfg = cfg.identifier_config()
s0, g0 = cfg.initial_states()
filter_skew(zs[:5], s0, icfg)
filter_gaussian(zs[:5], g0, icfg)
out = {"numba": _accel.USE_NUMBA}
for name, fn, init in (("skew", filter_skew, s0), ("gaussian", filter_gaussian, g0)):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        tr = fn(zs, init, icfg)
        best = min(best, time.perf_counter() - t)
    out[name] = {"seconds": best, "us_per_step": 1e6 * best / steps, "x_final": tr.x[-1].tolist()}
print(json.dumps(out))
"""


def run(disable, steps, repeat):
    env = dict(os.environ)
    env["SKEWAR_DISABLE_NUMBA"] = "1" if disable else "0"
    res = subprocess.run([sys.executable, "-c", WORKER, str(steps), str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    fast = run(False, args.steps, args.repeat)
    slow = run(True, args.steps, args.repeat)
    print(f"{'method':<10}{'numba us/step':>16}{'numpy us/step':>16}{'speedup':>10}{'max |dx|':>12}")
    for name in ("skew", "gaussian"):
        f, s = fast[name], slow[name]
        dx = max(abs(a - b) for a, b in zip(f["x_final"], s["x_final"]))
        print(f"{name:<10}{f['us_per_step']:>16.1f}{s['us_per_step']:>16.1f}"
              f"{s['seconds'] / f['seconds']:>10.1f}{dx:>12.2e}")
    if not fast["numba"]:
        print("note: numba is unavailable, both columns used the numpy path")


if __name__ == "__main__":
    main()
