"""The simultaneous-report mechanism for Solomon's dilemma.

Two claimants ``a`` and ``b`` each know which of them is the true mother.
One is drawn as proposer, the other responds; disagreement fines both and
lets the proposer revise. The game is solved for every proposer draw and
both stage-1 move orders (the reports are simultaneous, so the result must
not depend on which report is modelled as coming first).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from .game import (
    THIRD_PARTY,
    Chance,
    Decision,
    Lottery,
    Node,
    OrdinalPreference,
    Outcome,
    Terminal,
    brute_force_spe,
    is_unique_outcome,
    solve_spe,
)

AGENTS = ("a", "b")
STATES = ("alpha", "beta")
SELECTIONS = ("a", "b", "random")
ORDERS = ("proposer_first", "responder_first")
REGIMES = ("small", "malice", "large")


class InvalidFineRegime(ValueError):
    """The preference profile breaks one of the small-fine rankings."""


class SolomonState(str, enum.Enum):
    ALPHA = "alpha"
    BETA = "beta"

    @property
    def mother(self) -> str:
        return "a" if self is SolomonState.ALPHA else "b"

    @property
    def other(self) -> str:
        return "b" if self is SolomonState.ALPHA else "a"


def allocation_for(claim: str) -> str:
    """Agreement on ``alpha`` allocates to a, on ``beta`` to b."""
    return "a" if claim == "alpha" else "b"


@dataclass(frozen=True)
class SolomonConfig:
    state: SolomonState
    fine: Fraction = Fraction(1)
    proposer_selection: str = "random"
    order: str = "proposer_first"

    def __post_init__(self):
        object.__setattr__(self, "state", SolomonState(self.state))
        object.__setattr__(self, "fine", Fraction(self.fine))
        if self.fine <= 0:
            raise ValueError("fine must be positive")
        if self.proposer_selection not in SELECTIONS:
            raise ValueError(f"proposer_selection must be one of {SELECTIONS}")
        if self.order not in ORDERS:
            raise ValueError(f"order must be one of {ORDERS}")


@dataclass(frozen=True)
class SolomonMessage:
    sender: str  # "proposer" or "responder"
    claim: str
    stage: str = "report"

    def __post_init__(self):
        if self.claim not in STATES:
            raise ValueError(f"claim must be one of {STATES}")
        if self.stage == "challenge" and self.sender != "proposer":
            raise ValueError("only the proposer sends a challenge message")


def mechanism_outcome(proposer: str, m_p: str, m_r: str, m_c: str | None, fine: Fraction) -> Outcome:
    """Outcome rule of the mechanism for one play."""
    responder = "b" if proposer == "a" else "a"
    if m_p == m_r:
        return Outcome(allocation_for(m_r))
    if m_c is None:
        raise ValueError("disagreement requires a challenge message")
    if m_c == m_r:
        # responder refunded, proposer's fine stays
        return Outcome.of(allocation_for(m_r), {proposer: fine})
    return Outcome.of(THIRD_PARTY, {proposer: fine, responder: fine})


def _fixed_proposer_tree(proposer: str, fine: Fraction, order: str) -> Node:
    responder = "b" if proposer == "a" else "a"

    def after_reports(m_p: str, m_r: str) -> Node:
        if m_p == m_r:
            return Terminal(mechanism_outcome(proposer, m_p, m_r, None, fine))
        return Decision(proposer, tuple(
            (f"challenge={c}", Terminal(mechanism_outcome(proposer, m_p, m_r, c, fine)))
            for c in STATES))

    if order == "proposer_first":
        return Decision(proposer, tuple(
            (f"report={mp}", Decision(responder, tuple(
                (f"report={mr}", after_reports(mp, mr)) for mr in STATES)))
            for mp in STATES))
    return Decision(responder, tuple(
        (f"report={mr}", Decision(proposer, tuple(
            (f"report={mp}", after_reports(mp, mr)) for mp in STATES)))
        for mr in STATES))


def build_solomon_game(config: SolomonConfig) -> Node:
    """Game tree of the mechanism; a random proposer draw is a root chance node."""
    if config.proposer_selection == "random":
        half = Fraction(1, 2)
        return Chance(tuple(
            (f"proposer={p}", half, _fixed_proposer_tree(p, config.fine, config.order))
            for p in AGENTS))
    return _fixed_proposer_tree(config.proposer_selection, config.fine, config.order)


def solomon_outcomes(fine: Fraction) -> list[Outcome]:
    """All twelve allocation/fine combinations."""
    fine = Fraction(fine)
    patterns = [{}, {"a": fine}, {"b": fine}, {"a": fine, "b": fine}]
    return [Outcome.of(alloc, f) for alloc in ("a", "b", THIRD_PARTY) for f in patterns]


def _allocation_rank(agent: str, state: SolomonState, regime: str) -> dict[str, int]:
    if agent == state.mother:
        return {agent: 0, THIRD_PARTY: 1, state.other: 2}
    if regime == "malice":
        return {agent: 0, THIRD_PARTY: 1, state.mother: 2}
    return {agent: 0, THIRD_PARTY: 1, state.mother: 1}


def build_solomon_preferences(state: SolomonState | str, fine: Any = 1, *,
                              regime: str = "small",
                              check: bool = True) -> dict[str, OrdinalPreference]:
    """Preference profile over the twelve outcomes.

    Each agent only cares about the allocation and her own fine. Under the
    ``small`` regime the fine is ranked below any allocation difference
    (lexicographic: allocation first, own fine second). ``large`` puts the
    fine first for the true mother; ``malice`` makes the other woman strictly
    prefer the third party to the true mother. Both break a ranking the
    truthful equilibrium relies on and raise :class:`InvalidFineRegime`
    unless ``check`` is false.
    """
    state = SolomonState(state)
    fine = Fraction(fine)
    if fine <= 0:
        raise InvalidFineRegime("fine must be positive")
    if regime not in REGIMES:
        raise ValueError(f"regime must be one of {REGIMES}")
    outcomes = solomon_outcomes(fine)
    prefs = {}
    for agent in AGENTS:
        alloc = _allocation_rank(agent, state, regime)

        def key(o: Outcome, agent=agent, alloc=alloc):
            fined = int(o.fine(agent) > 0)
            if regime == "large" and agent == state.mother:
                return (fined, alloc[o.allocation])
            return (alloc[o.allocation], fined)

        prefs[agent] = OrdinalPreference.from_key(agent, outcomes, key)
    if check:
        problems = fine_regime_problems(state, fine, prefs)
        if problems:
            raise InvalidFineRegime("; ".join(problems))
    return prefs


def fine_regime_problems(state: SolomonState, fine: Fraction,
                         prefs: dict[str, OrdinalPreference]) -> list[str]:
    """The two strict rankings needed for truthful revelation, checked on ``prefs``."""
    m, o = state.mother, state.other
    problems = []
    fined_c = Outcome.of(THIRD_PARTY, {m: fine, o: fine})
    if not prefs[m].prefers(fined_c, Outcome(o)):
        problems.append(f"true mother {m} must prefer (C, -F) to the rival allocation")
    if not prefs[o].prefers(Outcome(m), fined_c):
        problems.append(f"{o} must prefer allocation to {m} over (C, -F)")
    for agent, pref in prefs.items():
        if pref.fine_monotonicity_violations():
            problems.append(f"{agent}'s preference is not strictly decreasing in own fines")
    return problems


@dataclass
class Verdict:
    state: str
    proposer: str
    fine: Fraction
    order: str
    outcomes: list[Lottery]
    unique: bool
    truthful: bool
    fines_on_path: dict[str, Fraction]
    profile_count: int
    oracle_agrees: bool | None = None
    path: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.unique and self.truthful and self.oracle_agrees is not False

    def to_json(self) -> dict:
        from .game import lottery_to_json

        return {
            "state": self.state,
            "proposer": self.proposer,
            "fine": str(self.fine),
            "order": self.order,
            "outcome": [lottery_to_json(l) for l in self.outcomes],
            "unique": self.unique,
            "truthful": self.truthful,
            "fines_on_path": {a: str(f) for a, f in sorted(self.fines_on_path.items())},
            "profile_count": self.profile_count,
            "oracle_agrees": self.oracle_agrees,
            "path": self.path,
            "ok": self.ok,
        }


def equilibrium_path(game: Node, solution) -> list[str]:
    """One SPE path from the root (first best response, chance nodes expanded)."""
    steps: list[str] = []

    def rec(node: Node, path: tuple[str, ...]):
        if isinstance(node, Terminal):
            steps.append(f"{'/'.join(path)} -> {node.outcome}")
        elif isinstance(node, Chance):
            for lbl, _, c in node.branches:
                rec(c, path + (lbl,))
        else:
            a = solution.best_responses[path][0]
            rec(node.child(a), path + (a,))

    rec(game, ())
    return steps


def solve_solomon(config: SolomonConfig, *, regime: str = "small",
                  cross_check: bool = True) -> Verdict:
    game = build_solomon_game(config)
    prefs = build_solomon_preferences(config.state, config.fine, regime=regime,
                                      check=regime == "small")
    sol = solve_spe(game, prefs)
    uniq = is_unique_outcome(sol)
    target = Lottery.sure(Outcome(config.state.mother))
    fines: dict[str, Fraction] = {}
    for lot in sol.outcome_set:
        for o, _ in lot.items:
            for a, f in o.fines:
                fines[a] = max(fines.get(a, Fraction(0)), f)
    agrees = None
    if cross_check:
        oracle = brute_force_spe(game, prefs)
        agrees = oracle.outcome_set == sol.outcome_set and oracle.profile_count == sol.profile_count
    return Verdict(
        state=config.state.value,
        proposer=config.proposer_selection,
        fine=config.fine,
        order=config.order,
        outcomes=sol.sorted_outcomes(),
        unique=uniq.unique,
        truthful=sol.outcome_set == {target},
        fines_on_path=fines,
        profile_count=sol.profile_count,
        oracle_agrees=agrees,
        path=equilibrium_path(game, sol),
    )


@dataclass
class Proposition1Report:
    verdicts: list[Verdict]

    @property
    def violations(self) -> list[Verdict]:
        return [v for v in self.verdicts if not v.ok]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {"ok": self.ok, "verdicts": [v.to_json() for v in self.verdicts],
                "violations": len(self.violations)}


def verify_proposition1(fine_grid, *, states=STATES, selections=SELECTIONS,
                        regime: str = "small", cross_check: bool = True) -> Proposition1Report:
    """Solve every (state, proposer draw, fine, stage-1 order) combination.

    Each verdict must show a unique SPE outcome allocating to the true mother
    with no fines; the report's ``violations`` lists the ones that do not.
    """
    verdicts = []
    for state in states:
        for sel in selections:
            for fine in fine_grid:
                per_order = []
                for order in ORDERS:
                    cfg = SolomonConfig(SolomonState(state), Fraction(fine), sel, order)
                    per_order.append(solve_solomon(cfg, regime=regime, cross_check=cross_check))
                if len({frozenset(v.outcomes) for v in per_order}) != 1:
                    for v in per_order:
                        v.unique = False
                verdicts.extend(per_order)
    return Proposition1Report(verdicts)
