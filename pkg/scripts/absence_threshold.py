"""Bot profitability around the break-even absence probability f/T."""

import argparse
import csv
import sys

from solomonic.agents import absence_break_even, absence_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--payment", type=int, default=100)
    ap.add_argument("--fee", type=int, default=5)
    ap.add_argument("--runs", type=int, default=100_000)
    ap.add_argument("--step", type=float, default=0.01)
    ap.add_argument("--max-p", type=float, default=0.2)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    n = int(round(args.max_p / args.step))
    grid = [round(i * args.step, 6) for i in range(n + 1)]
    rows = absence_sweep(grid, args.payment, args.fee, args.runs, args.seed)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["p_absent", "analytic_profit", "simulated_profit", "sole_claimant_rate"])
    for r in rows:
        w.writerow([r.p_absent, float(r.analytic), round(r.simulated, 4), r.sole_claimant_rate])
    cross = next((r.p_absent for r in rows if r.simulated > 0), None)
    print(f"# break-even f/T = {float(absence_break_even(args.payment, args.fee))}, "
          f"first profitable grid point = {cross}", file=sys.stderr)


if __name__ == "__main__":
    main()
