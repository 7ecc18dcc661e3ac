"""Enzymatic bioreactor: power-series expansion vs trained hybrid schemes.

    python3 demos/bioreactor.py [--runs 5]
"""

import argparse

from hybrid_im import (LmConfig, SchemeSpec, bioreactor, build_test_set, check_assumptions, default_collocation,
                       error_report, ensemble_stats, pse_solve, train_ensemble)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--runs", type=int, default=5)
    args = ap.parse_args()

    sys = bioreactor()
    print("assumptions pass:", check_assumptions(sys).passed)
    tset = build_test_set(sys, 10_000, 0)
    rep = error_report(pse_solve(sys, 10), tset)
    print(f"PSE h=10: L1 {rep.l1[0]:.2e} L2 {rep.l2[0]:.2e} Linf {rep.linf[0]:.2e}")

    for r in (0.5, 1.0, 2.0, 4.0):
        spec = SchemeSpec("hybrid", "power", 10, 10, (r,))
        runs = train_ensemble(spec, sys, args.runs, LmConfig(), seed=1, cset=default_collocation(spec, sys, 1))
        ok = [m for m, _ in runs if m is not None]
        stats = ensemble_stats([error_report(m, tset) for m in ok])
        print(f"power hybrid r={r}: mean L2 {stats.mean['l2']:.2e} "
              f"[{stats.p5['l2']:.2e}, {stats.p95['l2']:.2e}] over {len(ok)} runs")


if __name__ == "__main__":
    main()
