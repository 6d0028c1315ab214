"""Claimant strategies and closed-form payoff analysis.

Strategy names used in scenario files: ``legitimate``, ``frontrunner``,
``coalition``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .chain import ChainView, ClaimMessage, Simulation, substream
from .clause import ChallengeResponse, ClauseConfig, SolomonicClause

CHALLENGE_POLICIES = ("rational", "always_assert", "always_withdraw", "indifferent_random",
                      "precommit_assert", "precommit_withdraw")
FEE_POLICIES = ("fixed", "match", "outbid")
STRATEGIES = ("legitimate", "frontrunner", "coalition")


@dataclass(frozen=True)
class AgentProfile:
    """Static description of one agent.

    ``cost`` and ``theta`` only matter for a legitimate performer; ``theta``
    is the disutility of seeing the payment go to an illegitimate claimant.
    For bots, ``fee`` is the fixed fee or, under ``outbid``, the increment.
    """

    address: str
    legitimate: bool = False
    cost: int = 0
    theta: int = 0
    fee: int = 1
    fee_policy: str = "fixed"
    challenge_policy: str = "rational"
    strategy: str = "frontrunner"
    mode: str = "best_response"
    clause_belief: float | None = None
    absence_belief: float = 0.0
    p_absent: float = 0.0
    absent_delay: int = 1000
    perform_at: int = 0
    expected_bots: int = 0
    bot_fee_model: str = "none"
    wallets: int = 1

    def __post_init__(self):
        if self.fee < 0:
            raise ValueError("fee must be non-negative")
        if self.theta < 0 or self.cost < 0:
            raise ValueError("theta and cost must be non-negative")
        if self.fee_policy not in FEE_POLICIES:
            raise ValueError(f"fee_policy must be one of {FEE_POLICIES}")
        if self.challenge_policy not in CHALLENGE_POLICIES:
            raise ValueError(f"challenge_policy must be one of {CHALLENGE_POLICIES}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.mode not in ("best_response", "always", "never"):
            raise ValueError("mode must be best_response, always or never")
        if self.bot_fee_model not in ("none", "equal", "auction"):
            raise ValueError("bot_fee_model must be none, equal or auction")
        if not 0 <= self.p_absent <= 1 or not 0 <= self.absence_belief <= 1:
            raise ValueError("probabilities must lie in [0, 1]")
        if self.strategy == "legitimate" and not self.legitimate:
            raise ValueError("the legitimate strategy needs legitimate=True")
        if self.wallets < 1:
            raise ValueError("wallets must be >= 1")


@dataclass
class PayoffRecord:
    agent: str
    received: Fraction = Fraction(0)
    cost: Fraction = Fraction(0)
    fees: Fraction = Fraction(0)
    theta_penalty: Fraction = Fraction(0)

    @property
    def net(self) -> Fraction:
        return self.received - self.cost - self.fees - self.theta_penalty

    def to_json(self) -> dict:
        def num(x):
            x = Fraction(x)
            return x.numerator if x.denominator == 1 else float(x)

        return {"received": num(self.received), "cost": num(self.cost), "fees": num(self.fees),
                "theta": num(self.theta_penalty), "net": num(self.net)}


# --- analytic baseline ------------------------------------------------------


def no_clause_payoffs(payment, cost, fee_performer, fee_bot, n_bots: int = 1) -> dict[str, PayoffRecord]:
    """Expected payoffs without a clause when every claim is confirmed.

    Priority goes to the highest fee; ties are split uniformly. Every sender
    pays its fee whether or not it wins. Keys are ``performer`` and
    ``bot1`` ... ``botN``.
    """
    T, c = Fraction(payment), Fraction(cost)
    fa, fb = Fraction(fee_performer), Fraction(fee_bot)
    if fa > fb or n_bots == 0:
        share_a, share_b = Fraction(1), Fraction(0)
    elif fb > fa:
        share_a, share_b = Fraction(0), Fraction(1, n_bots)
    else:
        share_a = share_b = Fraction(1, n_bots + 1)
    out = {"performer": PayoffRecord("performer", share_a * T, c, fa)}
    for i in range(1, n_bots + 1):
        out[f"bot{i}"] = PayoffRecord(f"bot{i}", share_b * T, Fraction(0), fb)
    return out


class GridTooCoarse(ValueError):
    pass


ABSTAIN = "abstain"


def _auction_payoffs(a, b, T: Fraction, c: Fraction) -> tuple[Fraction, Fraction]:
    """(performer, bot) payoffs; the performer has already sunk ``c``."""
    if a == ABSTAIN:
        return -c, Fraction(0)
    if b == ABSTAIN:
        return T - a - c, Fraction(0)
    if a > b:
        return T - a - c, -b
    if b > a:
        return -a - c, T - b
    return T / 2 - a - c, T / 2 - b


@dataclass
class FeeAuctionResult:
    equilibria: list[tuple]
    both_max_is_equilibrium: bool
    performer_values: set
    decide_perform: bool
    profiles_checked: int


def is_auction_equilibrium(a, b, T, c, grid: Sequence) -> bool:
    """Unilateral-deviation check over the full grid plus abstention."""
    T, c = Fraction(T), Fraction(c)
    ua, ub = _auction_payoffs(a, b, T, c)
    actions = [ABSTAIN, *grid]
    return (all(_auction_payoffs(x, b, T, c)[0] <= ua for x in actions)
            and all(_auction_payoffs(a, y, T, c)[1] <= ub for y in actions))


def fee_auction_equilibrium(payment, cost, fee_grid: Iterable) -> FeeAuctionResult:
    """Pure equilibria of the all-pay priority auction between performer and one bot.

    Each side either abstains or sends a claim with a fee from the grid. The
    bot can only copy a claim that was sent, so if the performer abstains the
    bot gets nothing. The performer's values are net of the sunk cost.
    """
    T, c = Fraction(payment), Fraction(cost)
    grid = sorted({Fraction(g) for g in fee_grid})
    if not grid or grid[0] != 0 or grid[-1] != T:
        raise GridTooCoarse("fee grid must contain 0 and the payment")
    actions = [ABSTAIN, *grid]
    eq = []
    for a in actions:
        for b in actions:
            if is_auction_equilibrium(a, b, T, c, grid):
                eq.append((a, b, *_auction_payoffs(a, b, T, c)))
    values = {e[2] for e in eq}
    # perform only if some equilibrium continuation beats not performing (0)
    decide = any(v > 0 for v in values)
    return FeeAuctionResult(eq, is_auction_equilibrium(T, T, T, c, grid), values, decide,
                            len(actions) ** 2)


# --- absence ---------------------------------------------------------------


@dataclass
class AbsenceRow:
    p_absent: float
    analytic: Fraction
    simulated: float
    runs: int
    sole_claimant_rate: float

    @property
    def analytic_profitable(self) -> bool:
        return self.analytic > 0

    @property
    def simulated_profitable(self) -> bool:
        return self.simulated > 0


def absence_break_even(payment, fee) -> Fraction:
    return Fraction(fee) / Fraction(payment)


def absence_sweep(p_grid: Iterable[float], payment: int, fee: int, runs: int = 100_000,
                  seed: int = 0, challenge_fee: int = 0) -> list[AbsenceRow]:
    """Bot profit from always claiming under the clause, analytic and simulated.

    The analytic value is ``p * T - f``. The simulated value runs the clause
    machine once per draw: the bot's claim is always confirmed, the
    legitimate claim only when the performer is present, and the performer
    asserts whenever selected.
    """
    cfg = ClauseConfig(payment=payment, window=1, challenge_fee=challenge_fee)
    bot = ClaimMessage("bot", "bot", fee, 0)
    legit = ClaimMessage("legit", "legit", fee, 0)
    rows = []
    for p in p_grid:
        rng = substream(seed, "absence", repr(float(p)))
        sel = substream(seed, "absence-selection", repr(float(p)))
        total = 0
        sole = 0
        for _ in range(runs):
            clause = SolomonicClause(cfg, sel)
            clause.on_claim_confirmed(bot, 1, 0)
            absent = rng.random() < p
            if not absent:
                clause.on_claim_confirmed(legit, 1, 1)
            clause.close_window(2)
            if clause.pending:
                st = clause.state
                resp = [ChallengeResponse("legit", "assert")] if "legit" in st.selected else []
                clause.run_challenge_two(resp)
            t = clause.settle()
            won = t.destination == "bot"
            sole += absent
            total += (payment if won else 0) - fee
        rows.append(AbsenceRow(float(p), Fraction(p).limit_denominator(10**9) * payment - fee,
                               total / runs, runs, sole / runs))
    return rows


# --- strategies --------------------------------------------------------------


def _has_clause(contract) -> bool:
    return isinstance(contract, SolomonicClause)


def asserts_when_selected(profile: AgentProfile, challenge_fee: int, rng: random.Random) -> bool:
    pol = profile.challenge_policy
    if pol in ("always_assert", "precommit_assert"):
        return True
    if pol in ("always_withdraw", "precommit_withdraw"):
        return False
    if pol == "indifferent_random":
        return rng.random() < 0.5
    # rational: a legitimate claimant asserts when the payment reaching an
    # illegitimate claimant hurts more than the challenge fee; a bot gains
    # nothing by asserting
    return profile.legitimate and profile.theta > challenge_fee


def performer_expected_payoff(profile: AgentProfile, payment: int, contract) -> Fraction:
    T, c, f = Fraction(payment), Fraction(profile.cost), Fraction(profile.fee)
    if _has_clause(contract):
        fee = contract.config.challenge_fee
        asserts = (profile.challenge_policy in ("always_assert", "precommit_assert")
                   or (profile.challenge_policy == "rational" and profile.theta > fee))
        if asserts:
            return T - c - f
    if profile.expected_bots == 0 or profile.bot_fee_model == "none":
        return T - c - f
    if profile.bot_fee_model == "equal":
        return no_clause_payoffs(T, c, f, f, profile.expected_bots)["performer"].net
    return -c


def legitimate_strategy(profile: AgentProfile, payment: int, contract, view: ChainView,
                        state: dict, rng: random.Random) -> list[ClaimMessage]:
    """Perform and claim once if worthwhile; answer challenge solicitations."""
    out: list[ClaimMessage] = []
    cid = contract.contract_id
    if view.now == profile.perform_at and not state.get("decided"):
        state["decided"] = True
        if profile.mode == "always":
            go = True
        elif profile.mode == "never":
            go = False
        else:
            go = performer_expected_payoff(profile, payment, contract) > 0
        state["performed"] = go
        if go:
            absent = rng.random() < profile.p_absent
            state["absent"] = absent
            pre = None
            if _has_clause(contract) and contract.config.hardcoded_responses:
                pre = "assert" if asserts_when_selected(
                    profile, contract.config.challenge_fee, rng) else "withdraw"
            out.append(ClaimMessage(
                profile.address, profile.address, profile.fee, view.now, contract=cid,
                precommit=pre, not_before=view.now + profile.absent_delay if absent else 0))
    out.extend(_responses(profile, [profile.address], view, state, rng))
    return out


def _responses(profile: AgentProfile, wallets: Sequence[str], view: ChainView, state: dict,
               rng: random.Random) -> list[ClaimMessage]:
    out = []
    answered = state.setdefault("answered", set())
    for sol in view.solicitations:
        contract = view.contracts[sol.contract]
        fee = contract.config.challenge_fee
        for w in wallets:
            key = (sol.contract, sol.round, w)
            if w in sol.selected and key not in answered:
                answered.add(key)
                if asserts_when_selected(profile, fee, rng):
                    out.append(ClaimMessage(profile.address, w, fee, view.now, contract=sol.contract,
                                            kind="response", action="assert", round=sol.round))
                elif profile.challenge_policy == "always_withdraw":
                    out.append(ClaimMessage(profile.address, w, fee, view.now, contract=sol.contract,
                                            kind="response", action="withdraw", round=sol.round))
                # otherwise withdraw by staying silent
    return out


def claim_value(profile: AgentProfile, payment: int, contract, observed_fee: int,
                wallets: int = 1) -> Fraction:
    """Expected value of front-running one observed claim."""
    T = Fraction(payment)
    fee = front_run_fee(profile, observed_fee)
    if contract.signal:
        q = Fraction(1) if _has_clause(contract) else Fraction(0)
    elif profile.clause_belief is None:
        q = Fraction(1) if _has_clause(contract) else Fraction(0)
    else:
        q = Fraction(profile.clause_belief).limit_denominator(10**6)
    pa = Fraction(profile.absence_belief).limit_denominator(10**6)
    # with a clause the copy pays off only if the performer never makes the
    # pool; several wallets of one controller cannot win a multi-round challenge
    with_clause = (pa * T if wallets <= 2 else 0) - wallets * fee
    if fee > observed_fee:
        without = T - wallets * fee
    elif fee == observed_fee:
        without = T * wallets / (wallets + 1) - wallets * fee
    else:
        without = -wallets * Fraction(fee)
    return q * with_clause + (1 - q) * without


def front_run_fee(profile: AgentProfile, observed_fee: int) -> int:
    if profile.fee_policy == "match":
        return observed_fee
    if profile.fee_policy == "outbid":
        return observed_fee + profile.fee
    return profile.fee


def frontrunner_strategy(profile: AgentProfile, payment: int, view: ChainView, state: dict,
                         rng: random.Random, wallets: Sequence[str] | None = None) -> list[ClaimMessage]:
    """Copy visible claims with own payee wallets when that pays; stay silent when challenged."""
    wallets = list(wallets or [profile.address])
    out = []
    targeted = state.setdefault("targeted", set())
    for msg in view.visible:
        if msg.kind != "claim" or msg.sender == profile.address or msg.contract in targeted:
            continue
        contract = view.contracts.get(msg.contract)
        if contract is None or contract.settled:
            continue
        targeted.add(msg.contract)
        if profile.mode == "never":
            continue
        if profile.mode == "best_response" and claim_value(
                profile, payment, contract, msg.fee, len(wallets)) <= 0:
            state.setdefault("abstained", []).append(msg.contract)
            continue
        fee = front_run_fee(profile, msg.fee)
        pre = None
        if _has_clause(contract) and contract.config.hardcoded_responses:
            pre = "assert" if asserts_when_selected(profile, contract.config.challenge_fee, rng) else "withdraw"
        for w in wallets:
            out.append(ClaimMessage(profile.address, w, fee, view.now, evidence=msg.evidence,
                                    contract=msg.contract, precommit=pre))
    out.extend(_responses(profile, wallets, view, state, rng))
    return out


def coalition_wallets(controller: str, k: int) -> list[str]:
    return [f"{controller}#{i}" for i in range(k)]


def coalition_strategy(profile: AgentProfile, payment: int, view: ChainView, state: dict,
                       rng: random.Random) -> list[ClaimMessage]:
    """One controller claiming through ``profile.wallets`` distinct wallets."""
    if profile.wallets < 2:
        raise ValueError("a coalition needs at least two wallets")
    return frontrunner_strategy(profile, payment, view, state, rng,
                                coalition_wallets(profile.address, profile.wallets))


class StrategyAgent:
    """Adapter exposing a strategy function through the simulation's agent interface."""

    def __init__(self, profile: AgentProfile, payment: int, contract, rng: random.Random):
        self.profile = profile
        self.agent_id = profile.address
        self.payment = payment
        self.contract = contract
        self.rng = rng
        self.state: dict = {}

    @property
    def wallets(self) -> list[str]:
        if self.profile.strategy == "coalition":
            return coalition_wallets(self.profile.address, self.profile.wallets)
        return [self.profile.address]

    @property
    def performed(self) -> bool:
        return bool(self.state.get("performed"))

    def act(self, view: ChainView) -> list[ClaimMessage]:
        p = self.profile
        if p.strategy == "legitimate":
            return legitimate_strategy(p, self.payment, self.contract, view, self.state, self.rng)
        if p.strategy == "coalition":
            return coalition_strategy(p, self.payment, view, self.state, self.rng)
        return frontrunner_strategy(p, self.payment, view, self.state, self.rng)


def compute_payoffs(sim: Simulation, agents: Sequence[StrategyAgent]) -> dict[str, PayoffRecord]:
    """Per-agent payoffs from the chain's included fees and the contracts' transfers."""
    owner = {w: a.agent_id for a in agents for w in a.wallets}
    legit_wallets = {w for a in agents if a.profile.legitimate for w in a.wallets}
    recs = {a.agent_id: PayoffRecord(a.agent_id) for a in agents}
    for block in sim.chain.blocks:
        for m in block.transactions:
            if m.sender in recs:
                recs[m.sender].fees += m.fee
    transfers = [t for c in sim.contracts.values() for t in c.ledger.transfers]
    for t in transfers:
        if t.destination in owner:
            recs[owner[t.destination]].received += t.amount
    for a in agents:
        if a.profile.legitimate and a.performed:
            recs[a.agent_id].cost += a.profile.cost
            if any(t.kind == "paid" and t.destination not in legit_wallets for t in transfers):
                recs[a.agent_id].theta_penalty += a.profile.theta
    return recs
