"""Driven map with the known manifold x = ln(1 + y).

Compares the analytic power, Legendre and Chebyshev expansions at h = 20
(which blow up away from y = 0) with a trained Legendre hybrid and a
standalone network.

    python3 demos/ln_example.py [--runs 3]
"""

import argparse

import numpy as np

from hybrid_im import (LmConfig, SchemeSpec, build_test_set, error_report, ensemble_stats, ln_example,
                       ln_series_model, train_ensemble)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--runs", type=int, default=3)
    args = ap.parse_args()

    sys = ln_example()
    tset = build_test_set(sys, 10_000, 0)
    for family in ("power", "legendre", "chebyshev2"):
        for h in (10, 20):
            rep = error_report(ln_series_model(family, h), tset)
            print(f"{family:>10} series h={h:2d}: L2 {rep.l2[0]:.2e}")

    for label, spec in [("Legendre hybrid h=20 L=10 r=1", SchemeSpec("hybrid", "legendre", 20, 10, (1.0,))),
                        ("network L=10", SchemeSpec("nn", L=10))]:
        runs = train_ensemble(spec, sys, args.runs, LmConfig(), seed=1)
        stats = ensemble_stats([error_report(m, tset) for m, _ in runs if m is not None])
        losses = [r.final_loss for _, r in runs]
        print(f"{label}: mean L2 {stats.mean['l2']:.2e} [{stats.p5['l2']:.2e}, {stats.p95['l2']:.2e}], "
              f"median loss {np.median(losses):.1e}")


if __name__ == "__main__":
    main()
