"""Manufactured-solution convergence table for the field discretization."""
import argparse

from axon_backstepping.verification import mms_error, observed_orders


def table(label, values, errors):
    orders = [float("nan")] + list(observed_orders(errors))
    print(label)
    for v, e, p in zip(values, errors, orders):
        print(f"  {v:>10g}  error {e:.4e}  order {p:.3f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--levels", type=int, default=4)
    args = ap.parse_args()
    grids = [21 * 2 ** k - 2 ** k + 1 for k in range(args.levels)]
    table("space (theta = 0.5, dt = 1e-4, t = 0.2)", grids, [mms_error(n, 1e-4, 0.2, 0.5) for n in grids])
    steps = [0.1 / 2 ** k for k in range(args.levels)]
    for theta in (0.5, 1.0):
        table(f"time (theta = {theta}, n = 801, t = 1)", steps, [mms_error(801, dt, 1.0, theta) for dt in steps])


if __name__ == "__main__":
    main()
