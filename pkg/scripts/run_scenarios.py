"""Simulate every bundled scenario and print one summary row each."""

import argparse

from solomonic import data
from solomonic.scenario import load_scenario, simulate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, help="override repetitions")
    ap.add_argument("--seed", type=int)
    args = ap.parse_args()
    print(f"{'scenario':24} {'runs':>6} {'legit':>7} {'bot':>7} {'burned':>7} {'none':>6}  mean payoffs")
    for name in data.names("scenarios"):
        sc = load_scenario(data.path("scenarios", name), seed=args.seed, repetitions=args.reps)
        agg = simulate(sc, keep_trace=False).to_json()["aggregate"]
        c = agg["counts"]
        pay = ", ".join(f"{k}={v}" for k, v in agg["mean_payoff"].items())
        print(f"{name:24} {agg['runs']:>6} {c['paid_legitimate']:>7} {c['paid_illegitimate']:>7} "
              f"{c['burned']:>7} {c['none']:>6}  {pay}")


if __name__ == "__main__":
    main()
