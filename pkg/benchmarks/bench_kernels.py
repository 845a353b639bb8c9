"""Benchmark the compiled kernels against their numpy fallbacks.

Kernel selection happens at import time via SWARMPLAN_NUMBA, so each mode
runs in a subprocess. Usage: python3 benchmarks/bench_kernels.py
"""
import json
import os
import subprocess
import sys

WORKER = r"""
import json
import time

import numpy as np

from swarmplan import _kernels

rng = np.random.default_rng(7)
n = 400
pos = rng.uniform(0, 10, (n, 2))
m = 24
means = rng.uniform(0, 10, (m, 2))
invs = np.tile(np.eye(2) / 0.5, (m, 1, 1))
norms = np.full(m, 1.0 / (2 * np.pi * 0.5))
weights = np.full(m, 1.0 / m)
cells = rng.uniform(0, 10, (5000, 2))
logits = np.full((100, 80), -2.0)
occ = rng.random((100, 80)) < 0.1


def bench(fn, *args, reps=20):
    fn(*args)  # warm up (and trigger compilation when numba is on)
    t0 = time.perf_counter()
    for _ in range(reps):
        fn(*args)
    return (time.perf_counter() - t0) / reps


results = {
    "numba_enabled": _kernels.NUMBA_ENABLED,
    "mixture_grad": bench(_kernels.mixture_grad, pos, means, invs, norms, weights),
    "kde_pair_grad": bench(_kernels.kde_pair_grad, pos, 1.0 / 0.18, 0.88),
    "robot_repulsion": bench(_kernels.robot_repulsion, pos, 0.1, 1e4),
    "gauss_mass": bench(
        _kernels.gauss_mass,
        np.ascontiguousarray(cells[:, 0]), np.ascontiguousarray(cells[:, 1]),
        5.0, 4.0, 2.0, 0.0, 2.0, 0.3,
    ),
    "fov_reveal": bench(
        _kernels.fov_reveal, logits, occ, pos[:100], 1.0, 0.1, 0.1, -10.0, 10.0
    ),
}
print(json.dumps(results))
"""


def run_mode(flag):
    env = dict(os.environ, SWARMPLAN_NUMBA=flag)
    out = subprocess.run(
        [sys.executable, "-c", WORKER], env=env, capture_output=True, text=True
    )
    if out.returncode != 0:
        raise RuntimeError(out.stderr)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    numpy_res = run_mode("0")
    numba_res = run_mode("1")
    print(f"{'kernel':<16} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for key in numpy_res:
        if key == "numba_enabled":
            continue
        a, b = numpy_res[key], numba_res[key]
        print(f"{key:<16} {a * 1e3:>8.3f}ms {b * 1e3:>8.3f}ms {a / b:>7.1f}x")


if __name__ == "__main__":
    main()
