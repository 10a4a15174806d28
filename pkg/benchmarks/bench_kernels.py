"""Compare the jitted conv kernels against the pure-numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--reps 50]

The numpy path is selected at import time via TWINSYNC_NO_NUMBA, so this
script runs each variant in a subprocess and reports the timings side by
side along with the max absolute difference of their outputs.
"""

import argparse
import json
import os
import subprocess
import sys
import time

WORKER = """
import json, os, sys, time
import numpy as np
from twinsync import kernels

reps = int(sys.argv[1])
rng = np.random.default_rng(0)
x = rng.normal(size=(64, 32, 120))
w = rng.normal(size=(32, 32, 4))
b = rng.normal(size=32)

y = kernels.conv1d_forward(x, w, b)          # warm-up / jit compile
gy = rng.normal(size=y.shape)
kernels.conv1d_backward(x, w, gy)

t0 = time.perf_counter()
for _ in range(reps):
    y = kernels.conv1d_forward(x, w, b)
fwd = (time.perf_counter() - t0) / reps

t0 = time.perf_counter()
for _ in range(reps):
    gx, gw, gb = kernels.conv1d_backward(x, w, gy)
bwd = (time.perf_counter() - t0) / reps

print(json.dumps({
    "numba": kernels.USE_NUMBA,
    "fwd_ms": fwd * 1e3,
    "bwd_ms": bwd * 1e3,
    "fwd_sum": float(y.sum()),
    "bwd_sum": float(gx.sum() + gw.sum() + gb.sum()),
}))
"""


def run_variant(no_numba: bool, reps: int) -> dict:
    env = dict(os.environ)
    if no_numba:
        env["TWINSYNC_NO_NUMBA"] = "1"
    else:
        env.pop("TWINSYNC_NO_NUMBA", None)
    out = subprocess.run([sys.executable, "-c", WORKER, str(reps)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=50)
    args = ap.parse_args()

    t0 = time.time()
    nb = run_variant(no_numba=False, reps=args.reps)
    np_ = run_variant(no_numba=True, reps=args.reps)
    assert nb["numba"] and not np_["numba"]

    print(f"conv1d benchmark  (batch 64, 32->32 ch, len 120, k=4, "
          f"{args.reps} reps, {time.time() - t0:.1f}s total)")
    print(f"{'path':<10}{'forward ms':>12}{'backward ms':>13}")
    print(f"{'numba':<10}{nb['fwd_ms']:>12.3f}{nb['bwd_ms']:>13.3f}")
    print(f"{'numpy':<10}{np_['fwd_ms']:>12.3f}{np_['bwd_ms']:>13.3f}")
    print(f"speedup   {np_['fwd_ms'] / nb['fwd_ms']:>11.1f}x"
          f"{np_['bwd_ms'] / nb['bwd_ms']:>12.1f}x")
    dfwd = abs(nb["fwd_sum"] - np_["fwd_sum"])
    dbwd = abs(nb["bwd_sum"] - np_["bwd_sum"])
    print(f"checksum delta: fwd {dfwd:.2e}, bwd {dbwd:.2e}")


if __name__ == "__main__":
    main()
