#!/usr/bin/env python3
"""Compare the compiled DTW kernels against the pure-python fallback.

Runs the same workload through both backends in subprocesses (backend
choice is fixed at import time) and prints a table of timings.

    python3 benchmarks/bench_dtw.py
    python3 benchmarks/bench_dtw.py --lengths 50,200,800 --pairs 40
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from impletkit.tsdist import BACKEND_NAME, dtw_distance, dba_centroid

spec = json.loads(sys.argv[1])
rng = np.random.default_rng(0)
results = {"backend": BACKEND_NAME, "rows": []}

for T in spec["lengths"]:
    pairs = [(rng.normal(0, 1, (T, 2)), rng.normal(0, 1, (T, 2)))
             for _ in range(spec["pairs"])]
    t0 = time.perf_counter()
    acc = 0.0
    for a, b in pairs:
        acc += dtw_distance(a, b)
    pair_time = time.perf_counter() - t0

    members = [rng.normal(0, 1, (T, 2)) for _ in range(8)]
    t0 = time.perf_counter()
    dba_centroid(members, members[0], max_iter=3)
    dba_time = time.perf_counter() - t0

    results["rows"].append({"T": T, "pair_s": pair_time, "dba_s": dba_time,
                            "checksum": acc})

print(json.dumps(results))
"""


def run_backend(name: str, spec: dict) -> dict:
    env = dict(os.environ, IMPLET_DTW_BACKEND=name)
    out = subprocess.run([sys.executable, "-c", WORKER, json.dumps(spec)],
                         capture_output=True, text=True, env=env)
    if out.returncode != 0:
        sys.exit(f"{name} backend failed:\n{out.stderr}")
    return json.loads(out.stdout)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--lengths", default="50,200,800",
                        help="comma-separated series lengths")
    parser.add_argument("--pairs", type=int, default=40,
                        help="distance pairs per length")
    args = parser.parse_args()
    spec = {"lengths": [int(t) for t in args.lengths.split(",")],
            "pairs": args.pairs}

    compiled = run_backend("compiled", spec)
    python = run_backend("python", spec)

    print(f"{'T':>6} {'pairs':>6} | {'compiled':>10} {'python':>10} "
          f"{'speedup':>8} | {'DBA comp.':>10} {'DBA py':>10} {'speedup':>8}")
    for c_row, p_row in zip(compiled["rows"], python["rows"]):
        drift = abs(c_row["checksum"] - p_row["checksum"])
        assert drift < 1e-6 * max(1.0, abs(c_row["checksum"])), (
            f"backends disagree at T={c_row['T']}: drift {drift}")
        print(f"{c_row['T']:>6} {spec['pairs']:>6} | "
              f"{c_row['pair_s']:>9.3f}s {p_row['pair_s']:>9.3f}s "
              f"{p_row['pair_s'] / c_row['pair_s']:>7.1f}x | "
              f"{c_row['dba_s']:>9.3f}s {p_row['dba_s']:>9.3f}s "
              f"{p_row['dba_s'] / c_row['dba_s']:>7.1f}x")
    print("(checksums agree across backends)")


if __name__ == "__main__":
    main()
