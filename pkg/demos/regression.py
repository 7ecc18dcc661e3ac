"""Polynomial fit of 1 - exp(-10 x^2) on [-0.3, 0.3]: pseudo-inverse vs LM.

High degrees expose the round-off that the iterative solver accumulates.

    python3 demos/regression.py
"""

from hybrid_im import gaussian_regression_demo


def main():
    for h in (2, 6, 10, 14, 20):
        res = gaussian_regression_demo(h)
        print(f"h={h:2d}: pinv max err {res['mp_max_err']:.2e}, LM max err {res['lm_max_err']:.2e} "
              f"({res['lm_report'].stop_reason})")


if __name__ == "__main__":
    main()
