"""Compare the compiled and numpy RK4 Lyapunov kernels.

Usage::

    python3 benchmarks/bench_lyapunov.py [--steps 1600] [--repeat 5] [--protocol]

The kernel timings call both implementations directly in one process.  With
``--protocol`` a full two-pulse run is also timed in two subprocesses, one
with ``PULSEDOPTO_DISABLE_NUMBA=1``.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from pulsedopto import _accel


def problem(d, steps, seed=0):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(d, d)) - 2.0 * np.eye(d)
    B = rng.normal(size=(d, d))
    A_half = np.broadcast_to(A, (2 * steps + 1, d, d)).copy()
    D_half = np.broadcast_to(B @ B.T, (2 * steps + 1, d, d)).copy()
    return np.eye(d), A_half, D_half


def bench_kernels(steps, repeat):
    rows = []
    for d in (4, 6, 8):
        V0, A, D = problem(d, steps)
        h = 8.0 / steps
        t_np = min(timeit.repeat(lambda: _accel.rk4_lyapunov_numpy(V0, A, D, h, 1), number=1, repeat=repeat))
        if _accel.HAVE_NUMBA:
            _accel.rk4_lyapunov_numba(V0, A, D, h, 1)  # compile outside the timing
            t_nb = min(
                timeit.repeat(lambda: _accel.rk4_lyapunov_numba(V0, A, D, h, 1), number=1, repeat=repeat)
            )
        else:
            t_nb = float("nan")
        rows.append((d, t_np, t_nb))
    return rows


PROBE = (
    "import time; from pulsedopto import run_full, SystemParams, _accel;"
    "run_full(SystemParams());"
    "t = time.perf_counter(); run_full(SystemParams()); "
    "print(_accel.backend_name(), time.perf_counter() - t)"
)


def bench_protocol():
    out = []
    for disable in (False, True):
        env = dict(os.environ)
        env.pop("PULSEDOPTO_DISABLE_NUMBA", None)
        if disable:
            env["PULSEDOPTO_DISABLE_NUMBA"] = "1"
        r = subprocess.run([sys.executable, "-c", PROBE], env=env, capture_output=True, text=True, check=True)
        name, secs = r.stdout.split()
        out.append((name, float(secs)))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=1600, help="RK4 steps per run")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--protocol", action="store_true", help="also time a full two-pulse run")
    args = ap.parse_args(argv)

    print(f"kernel, {args.steps} steps (best of {args.repeat})")
    print(f"{'dim':>4} {'numpy [ms]':>12} {'numba [ms]':>12} {'speedup':>8}")
    for d, t_np, t_nb in bench_kernels(args.steps, args.repeat):
        print(f"{d:>4} {1e3 * t_np:12.2f} {1e3 * t_nb:12.3f} {t_np / t_nb:8.1f}")
    if args.protocol:
        print("\nrun_full at default parameters")
        for name, secs in bench_protocol():
            print(f"{name:>6}: {1e3 * secs:9.1f} ms")


if __name__ == "__main__":
    main()
