"""Regenerate the game files shipped in solomonic/data/games."""

import argparse
import json
from pathlib import Path

from solomonic import data
from solomonic.clause import build_claim_game, claim_game_preferences
from solomonic.game import Decision, OrdinalPreference, Outcome, Terminal, game_to_json
from solomonic.solomon import SolomonConfig, build_solomon_game, build_solomon_preferences


def counterexample():
    # b is indifferent between Y and Z, so both of b's choices are best responses
    # and a's choice flips with them: two equilibrium outcomes.
    X, Y, Z = Outcome("X"), Outcome("Y"), Outcome("Z")
    game = Decision("a", (("L", Terminal(X)),
                          ("R", Decision("b", (("y", Terminal(Y)), ("z", Terminal(Z)))))))
    prefs = {"a": OrdinalPreference("a", [[Y], [X], [Z]]),
             "b": OrdinalPreference("b", [[Y, Z], [X]])}
    return game, prefs


def bundled():
    cfg = SolomonConfig("alpha", 1, "random")
    yield "solomon_alpha", build_solomon_game(cfg), build_solomon_preferences("alpha", 1)
    claim = build_claim_game(fee=1, challenge_fee=0)
    yield "frontrun_claim_game", claim, claim_game_preferences(claim, payment=100, cost=10, theta=1)
    yield ("counterexample", *counterexample())


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=data.ROOT / "games")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for name, game, prefs in bundled():
        doc = game_to_json(game, prefs, name)
        (args.out / f"{name}.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
        print(f"wrote {args.out / name}.json")


if __name__ == "__main__":
    main()
