"""Print the exact game-theoretic certificates: truthful Solomon outcome,
single-claimant claim game and the fee-auction collapse."""

import argparse
import time
from fractions import Fraction

from solomonic.agents import fee_auction_equilibrium
from solomonic.clause import certify_single_claimant
from solomonic.solomon import verify_proposition1


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--payment", type=int, default=100)
    ap.add_argument("--cost", type=int, default=10)
    ap.add_argument("--fine", type=Fraction, action="append",
                    help="fine grid for the Solomon check (repeatable)")
    ap.add_argument("--levels", type=int, default=21, help="fee grid size for the auction")
    args = ap.parse_args()
    fines = args.fine or [Fraction(1, 100), Fraction(1, 2), 1, 2, 5, 10]

    t0 = time.perf_counter()
    report = verify_proposition1(fines)
    print(f"solomon: {len(report.verdicts)} cases, {len(report.violations)} violations "
          f"({time.perf_counter() - t0:.2f}s)")

    for theta, cf, pre in ((1, 0, False), (5, 1, False), (0, 0, True)):
        cert = certify_single_claimant(args.payment, args.cost, 1, theta, cf, pre)
        print(f"claim game theta={theta} challenge_fee={cf} precommit={pre}: "
              f"ok={cert.ok} outcome={cert.outcome} performer_net={cert.performer_net}")

    T = args.payment
    grid = [Fraction(T * i, args.levels - 1) for i in range(args.levels)]
    res = fee_auction_equilibrium(T, args.cost, grid)
    eqs = ", ".join(f"({a}, {b})" for a, b, *_ in res.equilibria)
    print(f"fee auction on {len(grid)} levels: equilibria {eqs}; performer values "
          f"{[str(v) for v in sorted(res.performer_values)]}; both-bid-T equilibrium={res.both_max_is_equilibrium}; "
          f"perform={res.decide_perform}")


if __name__ == "__main__":
    main()
