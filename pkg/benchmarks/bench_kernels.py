"""Compiled core against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--json out.json]

Each backend runs in its own interpreter because the choice is made at import.
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, timeit
import numpy as np
from fracinv import kernels
from fracinv.multiml import FractionalOrders, ml_eval_many
from fracinv.fracode import SourceTimeProfile, mode_solve, caputo_l1_residual

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)
zs2 = (-rng.uniform(0, 3, size=(20, 2))).astype(complex)
zs3 = (-rng.uniform(0, 1.5, size=(5, 3))).astype(complex)
n = 4096
W = rng.normal(size=n) + 1j * rng.normal(size=n)
S = 3 + rng.normal(size=n) + 1j * rng.normal(size=n)
P = rng.normal(size=(1, n)) + 1j * rng.normal(size=(1, n))
zc = -rng.uniform(0, 1, size=(64, 2)) + 0j
u = np.sin(np.linspace(0, 1, 4097))
orders = FractionalOrders((0.7, 0.4), (1.0, 0.5))
z1 = -np.logspace(-1, 5, 60)
zr = np.full((60, 1), -0.5)
g = SourceTimeProfile.polynomial([1.0, 1.0])
t = np.linspace(0, 1, 129)

cases = {
    "series_batch M=2 x20": lambda: kernels.series_batch(zs2, np.array([0.7, 0.3]), 1.3, 1e-17, 4000),
    "series_batch M=3 x5": lambda: kernels.series_batch(zs3, np.array([0.8, 0.3, 0.6]), 1.3, 1e-17, 4000),
    "contour_sum 4096 nodes x64": lambda: kernels.contour_sum(W, S, P, zc),
    "l1_caputo 4096 steps": lambda: kernels.l1_caputo(u, 1 / 4096, 0.7),
    "ml_eval_many 60 points": lambda: ml_eval_many(orders, 1.3, z1, zr),
    "mode_solve + L1 residual 128": lambda: caputo_l1_residual(
        orders, mode_solve(orders, 4.0, 1.0, 1.0, g, t), g),
}
out = {}
for name, fn in cases.items():
    fn()
    out[name] = min(timeit.repeat(fn, number=1, repeat=repeat))
print(json.dumps({"backend": kernels.BACKEND, "seconds": out}))
"""


def run(pure: bool, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("FRACINV_PURE_PYTHON", None)
    if pure:
        env["FRACINV_PURE_PYTHON"] = "1"
    res = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="write raw timings here")
    args = ap.parse_args(argv)
    fast, slow = run(False, args.repeat), run(True, args.repeat)
    if fast["backend"] != "compiled":
        print("warning: compiled core not available; both columns use the fallback", file=sys.stderr)
    width = max(len(k) for k in fast["seconds"])
    print(f"{'case':<{width}}  {fast['backend']:>10}  {slow['backend']:>10}  speedup")
    for name, a in fast["seconds"].items():
        b = slow["seconds"][name]
        print(f"{name:<{width}}  {a * 1e3:8.2f}ms  {b * 1e3:8.2f}ms  {b / a:6.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"compiled": fast, "python": slow}, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
