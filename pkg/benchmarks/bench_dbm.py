"""Benchmark the compiled DBM kernels against the pure-Python fallback.

Two workloads:
  * raw closure/incremental-closure calls on randomized matrices (the
    kernels the extension accelerates), and
  * an end-to-end exploration of the commitment scheme against the
    adversarial committer, timed under each backend.

Run as:  python benchmarks/bench_dbm.py [--cases 3000]

The backend swap uses TACV_PURE=1 in a subprocess for the end-to-end
row, since the backend is chosen at import time.
"""

import argparse
import json
import os
import random
import subprocess
import sys
import time

from tacv import _dbm_py
from tacv.zones import INF, ZERO, pack

try:
    from tacv import _dbm_c
except ImportError:
    _dbm_c = None


def random_matrix(rng, dim):
    m = [INF] * (dim * dim)
    for i in range(dim):
        m[i * dim + i] = ZERO
        m[i] = ZERO
    for _ in range(2 * dim):
        i, j = rng.randrange(dim), rng.randrange(dim)
        m[i * dim + j] = pack(rng.randint(-10, 20), rng.random() < 0.8)
    return m


def bench_kernels(core, cases, dims=(4, 6, 8, 12)):
    rng = random.Random(1)
    matrices = [
        (dim, random_matrix(rng, dim)) for dim in dims for _ in range(cases)
    ]
    t0 = time.perf_counter()
    nonempty = 0
    for dim, m in matrices:
        work = list(m)
        if core.closure(work, dim):
            nonempty += 1
            work[dim + 0] = pack(3, True)
            core.close1(work, dim, 1, 0)
    dt = time.perf_counter() - t0
    return dt, nonempty


def bench_exploration():
    from tacv.contracts import build_cs_model, instantiate
    from tacv.kernel import explore
    from tacv.world import WorldConstants
    from tacv import zones

    model = build_cs_model(WorldConstants(10, 100))
    net, _ctx = instantiate(model, adversary="ALICE")
    t0 = time.perf_counter()
    res = explore(net, check=None)
    dt = time.perf_counter() - t0
    return {"backend": zones.BACKEND, "states": res.states,
            "transitions": res.transitions, "seconds": round(dt, 3)}


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--cases", type=int, default=3000,
                        help="closure calls per dimension")
    parser.add_argument("--explore-only", action="store_true",
                        help="(internal) print one exploration row as JSON")
    args = parser.parse_args()

    if args.explore_only:
        print(json.dumps(bench_exploration()))
        return

    print("DBM closure kernels (%d matrices per dimension 4/6/8/12):" % args.cases)
    t_pure, n1 = bench_kernels(_dbm_py, args.cases)
    print("  pure python : %7.3fs  (%d nonempty)" % (t_pure, n1))
    if _dbm_c is not None:
        t_c, n2 = bench_kernels(_dbm_c, args.cases)
        assert n1 == n2, "backends disagree"
        print("  compiled    : %7.3fs  (speedup %.1fx)" % (t_c, t_pure / t_c))
    else:
        print("  compiled    : extension not built (python setup.py build_ext --inplace)")

    print("\nfull exploration, commitment scheme vs adversarial committer (10,100):")
    for env_val, label in (("0", "selected"), ("1", "pure")):
        env = dict(os.environ, TACV_PURE=env_val)
        out = subprocess.run(
            [sys.executable, __file__, "--explore-only"],
            env=env, capture_output=True, text=True, check=True,
        )
        row = json.loads(out.stdout)
        print("  %-8s backend=%-8s states=%-6d %.3fs"
              % (label, row["backend"], row["states"], row["seconds"]))


if __name__ == "__main__":
    main()
