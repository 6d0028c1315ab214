"""Helpers shared by the test modules: random games and challenge-path enumeration."""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

from solomonic.clause import (
    Challenge,
    ConfirmedClaim,
    Settled,
    open_challenge,
    resolve_round,
    round_size,
)
from solomonic.game import Chance, Decision, OrdinalPreference, Outcome, Terminal, count_profiles

PLAYERS = ("p1", "p2")


def random_preferences(rng: random.Random, outcomes) -> dict[str, OrdinalPreference]:
    """Random total preorders; ties are frequent on purpose."""
    prefs = {}
    for p in PLAYERS:
        k = rng.randint(1, len(outcomes))
        buckets: list[list[Outcome]] = [[] for _ in range(k)]
        for o in outcomes:
            buckets[rng.randrange(k)].append(o)
        prefs[p] = OrdinalPreference(p, buckets)
    return prefs


def random_tree(rng: random.Random, depth: int, pool, max_branch: int = 3, level: int = 0) -> object:
    # the top two levels are always decisions so that no game is trivial
    if depth == 0 or (level >= 2 and rng.random() < 0.25):
        return Terminal(rng.choice(pool))
    k = rng.randint(2, max_branch)
    player = rng.choice(PLAYERS)
    return Decision(player, tuple(
        (f"m{i}", random_tree(rng, depth - 1, pool, max_branch, level + 1)) for i in range(k)))


def random_game(seed: int, max_depth: int = 4, max_branch: int = 3, pool_size: int = 4,
                root_chance: bool | None = None, profile_cap: int = 4096):
    """A random two-player game with optional root chance node and its preferences.

    Trees whose profile count exceeds ``profile_cap`` are regenerated so the
    brute-force oracle stays cheap.
    """
    rng = random.Random(seed)
    pool = [Outcome(f"o{i}") for i in range(pool_size)]
    if root_chance is None:
        root_chance = rng.random() < 0.3
    while True:
        if root_chance:
            k = rng.randint(2, max_branch)
            weights = [rng.randint(1, 4) for _ in range(k)]
            total = sum(weights)
            game = Chance(tuple(
                (f"c{i}", Fraction(w, total), random_tree(rng, max_depth - 1, pool, max_branch))
                for i, w in enumerate(weights)))
        else:
            game = random_tree(rng, max_depth, pool, max_branch)
        if count_profiles(game) <= profile_cap:
            break
    return game, random_preferences(rng, pool)


def claims(addresses) -> tuple[ConfirmedClaim, ...]:
    return tuple(ConfirmedClaim(a, a, 1, i) for i, a in enumerate(addresses))


def explore_challenge(addresses, honest: str, burn: str = "burn"):
    """Every settlement reachable in a multi-claimant challenge.

    Enumerates all selections of each round and every assert/withdraw
    combination for the selected non-honest claimants; ``honest`` always
    asserts. Yields ``(settled_state, rounds_used)`` per leaf.
    """
    start = open_challenge(claims(addresses), ())

    def rec(ch: Challenge):
        pool = [c.address for c in ch.pool]
        k = round_size(len(pool))
        for sel in itertools.combinations(sorted(pool), k):
            others = [a for a in sel if a != honest]
            for acts in itertools.product(("assert", "withdraw"), repeat=len(others)):
                actions = dict(zip(others, acts))
                if honest in sel:
                    actions[honest] = "assert"
                nxt = resolve_round(Challenge(ch.pool, sel, ch.round, ch.variant), actions, burn)
                if isinstance(nxt, Settled):
                    yield nxt, ch.round
                else:
                    yield from rec(nxt)

    yield from rec(start)
