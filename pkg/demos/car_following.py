"""Car-following platoon behind an autonomous leader (reduced size).

Trains the power hybrid on Nc followers and compares with the degree-3
power-series expansion. Each realization takes a few minutes at Nc = 3.

    python3 demos/car_following.py [--cars 3] [--runs 2]
"""

import argparse
import time

from hybrid_im import (LmConfig, SchemeSpec, build_test_set, car_following, check_assumptions, error_report,
                       pse_solve, train_ensemble)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cars", type=int, default=3)
    ap.add_argument("--runs", type=int, default=2)
    args = ap.parse_args()

    sys = car_following(args.cars)
    print(f"N = {sys.N}, M = {sys.M}, assumptions pass: {check_assumptions(sys).passed}")
    tset = build_test_set(sys, 10_000, 0)
    pse = error_report(pse_solve(sys, 3), tset).component_mean["l2"]
    print(f"PSE h=3: mean component L2 {pse:.2e}")

    t0 = time.perf_counter()
    runs = train_ensemble(SchemeSpec("hybrid", "power", 3, 20, (1.0, 1.0)), sys, args.runs, LmConfig(), seed=1)
    for i, (m, r) in enumerate(runs):
        l2 = error_report(m, tset).component_mean["l2"]
        print(f"run {i}: loss {r.final_loss:.2e} ({r.stop_reason}), L2 {l2:.2e}, ratio to PSE {l2 / pse:.3f}")
    print(f"{time.perf_counter() - t0:.0f} s")


if __name__ == "__main__":
    main()
