"""Wall-clock comparison of the two integration engines.

Runs the built-in third-order benchmark plant with softened gains so the
closed loop survives long enough to time (the shipped scenario violates
its loop-3 tube within a fraction of a millisecond, which is honest but
useless for benchmarking).  Both engines step the same kernel math in
the same operand order, so the logged arrays must agree bitwise; the
script fails loudly if they do not.

Usage: python benchmarks/compare_engines.py [--dt DT] [--t-final T]
"""
import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from blfsim.scenario import build_config, load_scenario
from blfsim.simulator import run

SCENARIO = Path(__file__).resolve().parent.parent / "scenarios" / "benchmark3.scenario"


def timing_config(dt: float, t_final: float):
    doc = load_scenario(str(SCENARIO))
    # soft gains: the Nussbaum arguments climb at ~0.9/s instead of ~163/s,
    # buying tens of thousands of steps before the loop-3 tube is lost
    doc["controller"]["k"] = [1.0, 1.0, 1.0]
    doc["controller"]["k_eps"] = [1.0, 1.0, 1.0]
    doc["network"]["lambda"] = [1.0, 1.0, 1.0]
    doc["integration"]["dt"] = dt
    doc["integration"]["t_final"] = t_final
    config, _, _ = build_config(doc)
    return config


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dt", type=float, default=1e-5)
    ap.add_argument("--t-final", type=float, default=1.2)
    ap.add_argument("--repeat", type=int, default=3, help="timed repetitions per engine")
    opts = ap.parse_args(argv)

    config = timing_config(opts.dt, opts.t_final)
    results = {}
    for engine in ("python", "compiled"):
        cfg = replace(config, engine=engine)
        best = float("inf")
        traj = None
        for _ in range(max(1, opts.repeat)):
            t0 = time.perf_counter()
            traj = run(cfg)
            best = min(best, time.perf_counter() - t0)
        results[engine] = (best, traj)
        rate = traj.steps_done / best
        print(f"{engine:9s}  {traj.steps_done:7d} steps  {best:8.3f} s  "
              f"{rate:12.0f} steps/s  end={traj.status}")

    (tp, a), (tc, b) = results["python"], results["compiled"]
    same = (np.array_equal(a.data, b.data) and np.array_equal(a.theta, b.theta)
            and a.status == b.status and a.steps_done == b.steps_done)
    print(f"speedup: {tp / tc:.1f}x")
    print(f"bitwise agreement: {same}")
    if not same:
        diff = np.abs(a.data - b.data).max() if a.data.shape == b.data.shape else float("nan")
        print(f"max |data difference|: {diff:g}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
