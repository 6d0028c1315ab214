"""Finite perfect-information games with ordinal preferences.

Outcomes are ranked by each player through a total preorder. Chance nodes
produce lotteries over outcomes with exact rational probabilities; lotteries
are compared by first-order stochastic dominance over the acting player's
ranks. Two solvers are provided: backward induction (:func:`solve_spe`) and an
exhaustive strategy-profile enumeration (:func:`brute_force_spe`) that serves
as its oracle.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable, Iterator, Mapping, Sequence, Union

THIRD_PARTY = "<third-party>"

DEFAULT_PROFILE_CAP = 10**6


class GameError(Exception):
    """Base class for solver errors."""


class IncomparableLottery(GameError):
    """Two continuation lotteries at a decision node are not dominance-ranked."""

    def __init__(self, path: tuple[str, ...], player: str, first: "Lottery", second: "Lottery"):
        self.path = path
        self.player = player
        self.first = first
        self.second = second
        super().__init__(
            f"player {player!r} cannot rank continuations at node {'/'.join(path) or '<root>'}: "
            f"{first.describe()} vs {second.describe()}"
        )


class ProfileCapExceeded(GameError):
    def __init__(self, count: int, cap: int):
        self.count = count
        self.cap = cap
        super().__init__(f"{count} pure strategy profiles exceed the cap of {cap}")


class UnrankedOutcome(GameError, KeyError):
    pass


def _amount(x: Any) -> Fraction:
    f = Fraction(x)
    if f < 0:
        raise ValueError(f"amounts must be non-negative, got {x}")
    return f


@dataclass(frozen=True, order=True)
class Outcome:
    """An allocation target plus per-agent fines.

    ``allocation`` is an agent id or :data:`THIRD_PARTY`. Zero fines are
    dropped so that structural equality ignores them.
    """

    allocation: str
    fines: tuple[tuple[str, Fraction], ...] = ()

    def __post_init__(self):
        merged: dict[str, Fraction] = {}
        for agent, amount in self.fines:
            merged[agent] = merged.get(agent, Fraction(0)) + _amount(amount)
        norm = tuple(sorted((a, f) for a, f in merged.items() if f != 0))
        object.__setattr__(self, "fines", norm)

    @classmethod
    def of(cls, allocation: str, fines: Mapping[str, Any] | None = None) -> "Outcome":
        return cls(allocation, tuple((fines or {}).items()))

    def fine(self, agent: str) -> Fraction:
        return dict(self.fines).get(agent, Fraction(0))

    def with_fine(self, agent: str, amount: Any) -> "Outcome":
        return Outcome(self.allocation, self.fines + ((agent, _amount(amount)),))

    def without_fines(self) -> "Outcome":
        return Outcome(self.allocation)

    def __str__(self) -> str:
        target = "third party" if self.allocation == THIRD_PARTY else self.allocation
        if not self.fines:
            return f"allocate {target}"
        fines = ", ".join(f"{a}:-{f}" for a, f in self.fines)
        return f"allocate {target} [{fines}]"


@dataclass(frozen=True, eq=False)
class Lottery:
    """A finite distribution over outcomes, canonically sorted."""

    items: tuple[tuple[Outcome, Fraction], ...]
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        merged: dict[Outcome, Fraction] = {}
        for outcome, p in self.items:
            merged[outcome] = merged.get(outcome, Fraction(0)) + Fraction(p)
        if any(p < 0 for p in merged.values()) or sum(merged.values()) != 1:
            raise ValueError("lottery probabilities must be non-negative and sum to 1")
        object.__setattr__(self, "items", tuple(sorted((o, p) for o, p in merged.items() if p)))
        object.__setattr__(self, "_hash", hash(self.items))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Lottery) and self._hash == other._hash and self.items == other.items

    def __hash__(self) -> int:
        return self._hash

    @classmethod
    def sure(cls, outcome: Outcome) -> "Lottery":
        return cls(((outcome, Fraction(1)),))

    @classmethod
    def mix(cls, parts: Iterable[tuple[Fraction, "Lottery"]]) -> "Lottery":
        return cls(tuple((o, p * q) for p, lot in parts for o, q in lot.items))

    @property
    def is_degenerate(self) -> bool:
        return len(self.items) == 1

    @property
    def support(self) -> tuple[Outcome, ...]:
        return tuple(o for o, _ in self.items)

    def describe(self) -> str:
        if self.is_degenerate:
            return str(self.items[0][0])
        return " + ".join(f"{p}*({o})" for o, p in self.items)


class OrdinalPreference:
    """A total preorder over outcomes, stored as ordered indifference classes.

    Rank 0 is the best class. Outcomes outside the ranking raise
    :class:`UnrankedOutcome` on lookup.
    """

    def __init__(self, agent: str, classes: Sequence[Iterable[Outcome]]):
        self.agent = agent
        self.classes: tuple[frozenset[Outcome], ...] = tuple(
            frozenset(c) for c in classes if c
        )
        self._rank: dict[Outcome, int] = {}
        for i, cls in enumerate(self.classes):
            for o in cls:
                if o in self._rank:
                    raise ValueError(f"{o} appears in two indifference classes")
                self._rank[o] = i

    @classmethod
    def from_key(cls, agent: str, outcomes: Iterable[Outcome], key: Callable[[Outcome], Any],
                 descending: bool = False) -> "OrdinalPreference":
        """Group outcomes by ``key``; smaller keys rank better unless ``descending``."""
        groups: dict[Any, set[Outcome]] = {}
        for o in outcomes:
            groups.setdefault(key(o), set()).add(o)
        order = sorted(groups, reverse=descending)
        return cls(agent, [groups[k] for k in order])

    @classmethod
    def from_utility(cls, agent: str, outcomes: Iterable[Outcome],
                     utility: Callable[[Outcome], Any]) -> "OrdinalPreference":
        """Rank by a utility index. Only the induced order is retained."""
        return cls.from_key(agent, outcomes, utility, descending=True)

    def rank(self, outcome: Outcome) -> int:
        try:
            return self._rank[outcome]
        except KeyError:
            raise UnrankedOutcome(f"{self.agent} has no rank for {outcome}") from None

    def ranks(self, outcome: Outcome) -> bool:
        return outcome in self._rank

    @property
    def outcomes(self) -> frozenset[Outcome]:
        return frozenset(self._rank)

    def prefers(self, x: Outcome, y: Outcome) -> bool:
        return self.rank(x) < self.rank(y)

    def indifferent(self, x: Outcome, y: Outcome) -> bool:
        return self.rank(x) == self.rank(y)

    def fine_monotonicity_violations(self) -> list[tuple[Outcome, Outcome]]:
        """Pairs (X, X with an extra own fine) where the fined one is not strictly worse."""
        bad = []
        for x in self._rank:
            for y in self._rank:
                if (
                    x.allocation == y.allocation
                    and y.fine(self.agent) > x.fine(self.agent)
                    and all(y.fine(a) == x.fine(a) for a, _ in x.fines + y.fines if a != self.agent)
                    and not self.prefers(x, y)
                ):
                    bad.append((x, y))
        return sorted(bad)

    def relabel(self, mapping: Mapping[str, str]) -> "OrdinalPreference":
        return OrdinalPreference(
            mapping.get(self.agent, self.agent),
            [{relabel_outcome(o, mapping) for o in c} for c in self.classes],
        )

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, OrdinalPreference)
            and self.agent == other.agent
            and self.classes == other.classes
        )

    def __hash__(self) -> int:
        return hash((self.agent, self.classes))

    def __repr__(self) -> str:
        body = " > ".join(
            "{" + ", ".join(str(o) for o in sorted(c)) + "}" for c in self.classes
        )
        return f"OrdinalPreference({self.agent}: {body})"


def relabel_outcome(o: Outcome, mapping: Mapping[str, str]) -> Outcome:
    return Outcome(
        mapping.get(o.allocation, o.allocation),
        tuple((mapping.get(a, a), f) for a, f in o.fines),
    )


class Verdict(str, enum.Enum):
    FIRST = "first"
    SECOND = "second"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"


def _rank_cdf(lottery: Lottery, pref: OrdinalPreference) -> list[Fraction]:
    mass = [Fraction(0)] * len(pref.classes)
    for o, p in lottery.items:
        mass[pref.rank(o)] += p
    return list(itertools.accumulate(mass))


def dominance_compare(first: Lottery, second: Lottery, pref: OrdinalPreference) -> Verdict:
    """First-order stochastic dominance with respect to ``pref``'s ranks.

    ``first`` dominates when, for every rank threshold k, it puts at least as
    much probability on the k best classes as ``second`` does.
    """
    c1 = _rank_cdf(first, pref)
    c2 = _rank_cdf(second, pref)
    ge = all(a >= b for a, b in zip(c1, c2))
    le = all(a <= b for a, b in zip(c1, c2))
    if ge and le:
        return Verdict.EQUAL
    if ge:
        return Verdict.FIRST
    if le:
        return Verdict.SECOND
    return Verdict.INCOMPARABLE


# --- game trees -------------------------------------------------------------


@dataclass(frozen=True)
class Terminal:
    outcome: Outcome


@dataclass(frozen=True)
class Decision:
    player: str
    actions: tuple[tuple[str, "Node"], ...]

    def __post_init__(self):
        acts = tuple(self.actions.items()) if isinstance(self.actions, Mapping) else tuple(self.actions)
        labels = [a for a, _ in acts]
        if not acts:
            raise ValueError("decision node needs at least one action")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate action labels at {self.player}'s node: {labels}")
        object.__setattr__(self, "actions", acts)

    def child(self, action: str) -> "Node":
        return dict(self.actions)[action]


@dataclass(frozen=True)
class Chance:
    """Branches are ``(label, probability, child)`` triples."""

    branches: tuple[tuple[str, Fraction, "Node"], ...]

    def __post_init__(self):
        br = tuple((str(lbl), Fraction(p), c) for lbl, p, c in self.branches)
        if not br:
            raise ValueError("chance node needs at least one branch")
        if any(not (0 < p <= 1) for _, p, _ in br):
            raise ValueError("chance probabilities must lie in (0, 1]")
        if sum(p for _, p, _ in br) != 1:
            raise ValueError("chance probabilities must sum to 1")
        labels = [lbl for lbl, _, _ in br]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate chance labels: {labels}")
        object.__setattr__(self, "branches", br)


Node = Union[Terminal, Decision, Chance]


def children(node: Node) -> Iterator[tuple[str, Node]]:
    if isinstance(node, Decision):
        yield from node.actions
    elif isinstance(node, Chance):
        for lbl, _, c in node.branches:
            yield lbl, c


def walk(node: Node, path: tuple[str, ...] = ()) -> Iterator[tuple[tuple[str, ...], Node]]:
    """Pre-order traversal yielding ``(path, node)``."""
    yield path, node
    for lbl, c in children(node):
        yield from walk(c, path + (lbl,))


def subgame(node: Node, path: Sequence[str]) -> Node:
    for step in path:
        node = dict(children(node))[step]
    return node


def terminal_outcomes(node: Node) -> set[Outcome]:
    return {n.outcome for _, n in walk(node) if isinstance(n, Terminal)}


def players(node: Node) -> set[str]:
    return {n.player for _, n in walk(node) if isinstance(n, Decision)}


def count_profiles(node: Node) -> int:
    total = 1
    for _, n in walk(node):
        if isinstance(n, Decision):
            total *= len(n.actions)
    return total


def check_preferences(node: Node, prefs: Mapping[str, OrdinalPreference]) -> None:
    outs = terminal_outcomes(node)
    for p in sorted(players(node)):
        if p not in prefs:
            raise UnrankedOutcome(f"no preference supplied for player {p!r}")
        missing = [o for o in outs if not prefs[p].ranks(o)]
        if missing:
            raise UnrankedOutcome(f"{p} has no rank for {sorted(missing)[0]}")


# --- solutions --------------------------------------------------------------


@dataclass(frozen=True)
class SpeSolution:
    """Subgame-perfect equilibrium outcomes of a game.

    ``best_responses`` maps each decision-node path to the actions chosen at
    that node by some SPE profile; ``subgame_outcomes`` maps every node path
    to its SPE outcome set.
    """

    outcome_set: frozenset[Lottery]
    profile_count: int
    best_responses: Mapping[tuple[str, ...], tuple[str, ...]] = field(default_factory=dict)
    subgame_outcomes: Mapping[tuple[str, ...], frozenset[Lottery]] = field(default_factory=dict)

    def sorted_outcomes(self) -> list[Lottery]:
        return sorted(self.outcome_set, key=lambda lot: lot.items)


def _ordered(lotteries: Iterable[Lottery]) -> list[Lottery]:
    return sorted(lotteries, key=lambda lot: lot.items)


def _weakly_prefers(x: Lottery, y: Lottery, pref: OrdinalPreference, path, cache) -> bool:
    key = (x, y, pref.agent)
    v = cache.get(key)
    if v is None:
        v = dominance_compare(x, y, pref)
        cache[key] = v
    if v is Verdict.INCOMPARABLE:
        raise IncomparableLottery(path, pref.agent, x, y)
    return v in (Verdict.FIRST, Verdict.EQUAL)


def solve_spe(game: Node, prefs: Mapping[str, OrdinalPreference]) -> SpeSolution:
    """Backward induction keeping every weakly-best action.

    For each node the map ``lottery -> number of SPE sub-profiles inducing
    it`` is built bottom-up. At a decision node, action ``a`` with
    continuation ``L`` survives iff each other action ``b`` has some SPE
    continuation that ``L`` weakly dominates; the sub-profile count for that
    choice multiplies the counts of those compatible continuations.
    """
    check_preferences(game, prefs)
    best: dict[tuple[str, ...], tuple[str, ...]] = {}
    sets: dict[tuple[str, ...], frozenset[Lottery]] = {}
    cache: dict = {}

    def rec(node: Node, path: tuple[str, ...]) -> dict[Lottery, int]:
        if isinstance(node, Terminal):
            res = {Lottery.sure(node.outcome): 1}
        elif isinstance(node, Chance):
            subs = [(p, rec(c, path + (lbl,))) for lbl, p, c in node.branches]
            res = {}
            for combo in itertools.product(*(_ordered(s) for _, s in subs)):
                lot = Lottery.mix((p, l) for (p, _), l in zip(subs, combo))
                n = 1
                for (_, s), l in zip(subs, combo):
                    n *= s[l]
                res[lot] = res.get(lot, 0) + n
        else:
            pref = prefs[node.player]
            subs = {a: rec(c, path + (a,)) for a, c in node.actions}
            # every cross-action pair must be comparable before anything is chosen
            labels = sorted(subs)
            for i, a in enumerate(labels):
                for b in labels[i + 1:]:
                    for la in _ordered(subs[a]):
                        for lb in _ordered(subs[b]):
                            _weakly_prefers(la, lb, pref, path, cache)
            res = {}
            chosen = set()
            for a in labels:
                for la, na in subs[a].items():
                    n = na
                    for b in labels:
                        if b == a:
                            continue
                        n *= sum(nb for lb, nb in subs[b].items()
                                 if _weakly_prefers(la, lb, pref, path, cache))
                        if n == 0:
                            break
                    if n:
                        chosen.add(a)
                        res[la] = res.get(la, 0) + n
            best[path] = tuple(sorted(chosen))
        sets[path] = frozenset(res)
        return res

    root = rec(game, ())
    return SpeSolution(frozenset(root), sum(root.values()), best, sets)


def brute_force_spe(game: Node, prefs: Mapping[str, OrdinalPreference],
                    cap: int = DEFAULT_PROFILE_CAP) -> SpeSolution:
    """Enumerate every pure strategy profile and keep the subgame-perfect ones.

    A profile is kept when, at every decision node (reached or not), no
    single-node deviation yields a continuation the mover strictly prefers
    (one-shot deviation principle for finite games). Nodes are checked
    deepest-first and a profile is abandoned at its first failing node.
    """
    check_preferences(game, prefs)
    total = count_profiles(game)
    if total > cap:
        raise ProfileCapExceeded(total, cap)

    nodes = list(walk(game))
    decisions = [(path, n) for path, n in nodes if isinstance(n, Decision)]
    post = sorted(nodes, key=lambda pn: -len(pn[0]))
    cache: dict = {}

    sure = {path: Lottery.sure(n.outcome) for path, n in nodes if isinstance(n, Terminal)}
    mixes: dict[tuple, Lottery] = {}

    kept: dict[Lottery, int] = {}
    best: dict[tuple[str, ...], set[str]] = {path: set() for path, _ in decisions}
    sets: dict[tuple[str, ...], set[Lottery]] = {path: set() for path, _ in nodes}

    for choice in itertools.product(*(tuple(a for a, _ in n.actions) for _, n in decisions)):
        strategy = {path: a for (path, _), a in zip(decisions, choice)}
        value: dict[tuple[str, ...], Lottery] = {}
        ok = True
        for path, node in post:
            if isinstance(node, Terminal):
                value[path] = sure[path]
            elif isinstance(node, Chance):
                parts = tuple((p, value[path + (lbl,)]) for lbl, p, _ in node.branches)
                if parts not in mixes:
                    mixes[parts] = Lottery.mix(parts)
                value[path] = mixes[parts]
            else:
                pref = prefs[node.player]
                mine = value[path + (strategy[path],)]
                for a, _ in node.actions:
                    if a != strategy[path] and not _weakly_prefers(mine, value[path + (a,)], pref, path, cache):
                        ok = False
                if not ok:
                    break
                value[path] = mine
        if not ok:
            continue
        kept[value[()]] = kept.get(value[()], 0) + 1
        for path, _ in decisions:
            best[path].add(strategy[path])
        for path, _ in nodes:
            sets[path].add(value[path])

    # subgame sets computed from full-game SPE profiles coincide with each
    # subgame's own SPE set because every SPE sub-profile extends to a full one
    return SpeSolution(
        frozenset(kept),
        sum(kept.values()),
        {p: tuple(sorted(s)) for p, s in best.items()},
        {p: frozenset(s) for p, s in sets.items()},
    )


@dataclass(frozen=True)
class Uniqueness:
    unique: bool
    outcome: Lottery | None = None
    witnesses: tuple[Lottery, ...] = ()

    def __bool__(self) -> bool:
        return self.unique


def is_unique_outcome(solution: SpeSolution) -> Uniqueness:
    outs = solution.sorted_outcomes()
    if len(outs) == 1:
        return Uniqueness(True, outs[0], (outs[0],))
    return Uniqueness(False, None, tuple(outs[:2]))


# --- JSON -------------------------------------------------------------------

SCHEMA_VERSION = 1


def _rational_to_json(x: Fraction) -> Any:
    x = Fraction(x)
    return x.numerator if x.denominator == 1 else {"num": x.numerator, "den": x.denominator}


def _rational_from_json(v: Any) -> Fraction:
    if isinstance(v, dict):
        return Fraction(int(v["num"]), int(v["den"]))
    if isinstance(v, bool) or not isinstance(v, (int, str)):
        raise ValueError(f"expected an integer or {{num, den}}, got {v!r}")
    return Fraction(v)


def outcome_to_json(o: Outcome) -> dict:
    return {
        "allocate": None if o.allocation == THIRD_PARTY else o.allocation,
        "fines": {a: _rational_to_json(f) for a, f in o.fines},
    }


def outcome_from_json(d: Mapping) -> Outcome:
    alloc = d.get("allocate")
    fines = {a: _rational_from_json(f) for a, f in (d.get("fines") or {}).items()}
    return Outcome.of(THIRD_PARTY if alloc is None else str(alloc), fines)


def lottery_to_json(lot: Lottery) -> list:
    return [{"prob": {"num": p.numerator, "den": p.denominator}, "outcome": outcome_to_json(o)}
            for o, p in lot.items]


def node_to_json(node: Node) -> dict:
    if isinstance(node, Terminal):
        return {"kind": "terminal", "outcome": outcome_to_json(node.outcome)}
    if isinstance(node, Decision):
        return {"kind": "decision", "player": node.player,
                "actions": {a: node_to_json(c) for a, c in node.actions}}
    return {"kind": "chance", "branches": [
        {"label": lbl, "prob": {"num": p.numerator, "den": p.denominator}, "child": node_to_json(c)}
        for lbl, p, c in node.branches]}


def node_from_json(d: Mapping, path: str = "root") -> Node:
    kind = d.get("kind")
    if kind == "terminal":
        return Terminal(outcome_from_json(d["outcome"]))
    if kind == "decision":
        return Decision(str(d["player"]), tuple(
            (str(a), node_from_json(c, f"{path}/{a}")) for a, c in d["actions"].items()))
    if kind == "chance":
        return Chance(tuple(
            (str(b.get("label", i)), _rational_from_json(b["prob"]),
             node_from_json(b["child"], f"{path}/{b.get('label', i)}"))
            for i, b in enumerate(d["branches"])))
    raise ValueError(f"{path}: unknown node kind {kind!r}")


def game_to_json(game: Node, prefs: Mapping[str, OrdinalPreference], name: str = "") -> dict:
    doc: dict[str, Any] = {"schema_version": SCHEMA_VERSION}
    if name:
        doc["name"] = name
    doc["root"] = node_to_json(game)
    doc["preferences"] = {
        agent: [[outcome_to_json(o) for o in sorted(c)] for c in prefs[agent].classes]
        for agent in sorted(prefs)
    }
    return doc


def game_from_json(doc: Mapping) -> tuple[Node, dict[str, OrdinalPreference]]:
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported game schema_version {doc.get('schema_version')!r}")
    game = node_from_json(doc["root"])
    prefs = {
        agent: OrdinalPreference(agent, [[outcome_from_json(o) for o in c] for c in classes])
        for agent, classes in doc["preferences"].items()
    }
    return game, prefs
