"""Settlement state machine for a contract carrying a Solomonic clause.

The first confirmed claim opens a collection window of ``window`` blocks
(inclusive of the closing block). A lone claimant is paid when the window
closes. Otherwise a challenge runs: with two claimants one is selected and
either withdraws (the other is paid) or asserts (the payment is burned);
with three or more, rounds select ``max(1, m // 2)`` of the ``m`` remaining
claimants, any assertion burns, and a round where everyone withdraws removes
them from the pool.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence, Union

from .chain import Block, ClaimMessage, Solicitation
from .game import (
    THIRD_PARTY,
    Chance,
    Decision,
    Node,
    OrdinalPreference,
    Outcome,
    Terminal,
    is_unique_outcome,
    solve_spe,
    terminal_outcomes,
)

NULL_ADDRESS = "0x0000000000000000000000000000000000000000"
CHARITY_ADDRESS = "charity"
BURN_DESTINATIONS = {"null": NULL_ADDRESS, "charity": CHARITY_ADDRESS}
SELECTION_POLICIES = ("uniform_random", "latest_timestamp")
ACTIONS = ("assert", "withdraw")


class ClauseError(Exception):
    pass


class WindowClosed(ClauseError):
    pass


class DuplicateAddress(ClauseError):
    pass


class PayorClaim(ClauseError):
    pass


class InvalidEvidence(ClauseError):
    pass


class UnsolicitedResponse(ClauseError):
    pass


class DuplicateResponse(UnsolicitedResponse):
    pass


class MissingResponse(ClauseError):
    pass


class InvalidTransition(ClauseError):
    pass


class AlreadySettled(ClauseError):
    pass


@dataclass(frozen=True)
class ClauseConfig:
    payment: int = 100
    window: int = 4
    selection_policy: str = "uniform_random"
    burn_destination: str = "null"
    challenge_fee: int = 0
    hardcoded_responses: bool = False
    response_deadline: int = 1
    missing_response: str = "withdraw"
    payor: str = "payor"
    signal: bool = False

    def __post_init__(self):
        if self.payment <= 0:
            raise ValueError("payment must be positive")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.selection_policy not in SELECTION_POLICIES:
            raise ValueError(f"selection_policy must be one of {SELECTION_POLICIES}")
        if self.burn_destination not in BURN_DESTINATIONS:
            raise ValueError(f"burn_destination must be one of {sorted(BURN_DESTINATIONS)}")
        if self.burn_address == self.payor:
            raise ValueError("the payor cannot be the burn destination")
        if self.challenge_fee < 0:
            raise ValueError("challenge_fee must be non-negative")
        if self.response_deadline < 1:
            raise ValueError("response_deadline must be >= 1 block")
        if self.missing_response not in ("withdraw", "error"):
            raise ValueError("missing_response must be 'withdraw' or 'error'")

    @property
    def burn_address(self) -> str:
        return BURN_DESTINATIONS[self.burn_destination]


# --- states -----------------------------------------------------------------


@dataclass(frozen=True)
class ConfirmedClaim:
    address: str
    sender: str
    height: int
    position: int = 0
    precommit: str | None = None

    @property
    def timestamp(self) -> tuple[int, int]:
        return (self.height, self.position)


@dataclass(frozen=True)
class Idle:
    pass


@dataclass(frozen=True)
class Collecting:
    window_end: int
    claims: tuple[ConfirmedClaim, ...]


@dataclass(frozen=True)
class Challenge:
    pool: tuple[ConfirmedClaim, ...]
    selected: tuple[str, ...]
    round: int
    variant: str  # "two" or "multi"
    started_at: int = 0

    @property
    def addresses(self) -> tuple[str, ...]:
        return tuple(c.address for c in self.pool)


@dataclass(frozen=True)
class Settled:
    kind: str  # "paid" or "burned"
    destination: str


ClauseState = Union[Idle, Collecting, Challenge, Settled]


@dataclass(frozen=True)
class ChallengeResponse:
    address: str
    action: str
    fee: int | None = None

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise ValueError(f"action must be one of {ACTIONS}")


# --- pure transition rules --------------------------------------------------


def round_size(m: int) -> int:
    return max(1, m // 2)


def max_rounds(n: int) -> int:
    """Upper bound on challenge rounds for an initial pool of ``n``."""
    if n <= 2:
        return 1
    return math.ceil(math.log2(n)) + 1


def select_challengers(pool: Sequence[ConfirmedClaim], k: int, policy: str,
                       rng: random.Random | None) -> tuple[str, ...]:
    """Pick ``k`` addresses; uniform without replacement or the most recent."""
    if policy == "latest_timestamp":
        latest = sorted(pool, key=lambda c: c.timestamp, reverse=True)[:k]
        return tuple(sorted(c.address for c in latest))
    if rng is None:
        raise ValueError("uniform selection needs a random stream")
    return tuple(sorted(rng.sample(sorted(c.address for c in pool), k)))


def open_challenge(claims: Sequence[ConfirmedClaim], selected: Sequence[str],
                   height: int = 0) -> Challenge:
    variant = "two" if len(claims) == 2 else "multi"
    return Challenge(tuple(claims), tuple(sorted(selected)), 1, variant, height)


def resolve_round(ch: Challenge, actions: Mapping[str, str], burn_address: str,
                  missing: str = "withdraw") -> Union[Challenge, Settled]:
    """Apply one round's responses.

    The returned :class:`Challenge` (if any) has an empty ``selected`` set;
    the caller picks the next round's challengers.
    """
    acts = {}
    for a in ch.selected:
        act = actions.get(a)
        if act is None:
            if missing == "error":
                raise MissingResponse(f"{a} did not respond in round {ch.round}")
            act = "withdraw"
        acts[a] = act
    if any(v == "assert" for v in acts.values()):
        return Settled("burned", burn_address)
    remaining = tuple(c for c in ch.pool if c.address not in acts)
    if ch.variant == "two":
        return Settled("paid", remaining[0].address)
    if not remaining:
        # every claimant withdrew; nobody is left to pay
        return Settled("burned", burn_address)
    return Challenge(remaining, (), ch.round + 1, ch.variant, ch.started_at)


# --- ledger -----------------------------------------------------------------


@dataclass(frozen=True)
class Transfer:
    source: str
    destination: str
    amount: int
    kind: str


class Ledger:
    def __init__(self, escrow: str = "escrow"):
        self.escrow = escrow
        self.balances: dict[str, int] = {}
        self.transfers: list[Transfer] = []

    def credit(self, address: str, amount: int) -> None:
        self.balances[address] = self.balances.get(address, 0) + amount

    def transfer(self, src: str, dst: str, amount: int, kind: str) -> Transfer:
        if self.balances.get(src, 0) < amount:
            raise ClauseError(f"{src} holds {self.balances.get(src, 0)}, cannot send {amount}")
        self.balances[src] -= amount
        self.credit(dst, amount)
        t = Transfer(src, dst, amount, kind)
        self.transfers.append(t)
        return t


# --- the contract -----------------------------------------------------------


class SolomonicClause:
    """One contract's settlement machine.

    The methods follow the lifecycle; :meth:`process_block` wires them to a
    :class:`~solomonic.chain.Simulation`.
    """

    def __init__(self, config: ClauseConfig, rng: random.Random | None = None,
                 contract_id: str = "contract-0", ledger: Ledger | None = None):
        self.config = config
        self.rng = rng or random.Random(0)
        self.contract_id = contract_id
        self.signal = config.signal
        self.state: ClauseState = Idle()
        self.history: list[ClauseState] = [self.state]
        self.rounds = 0
        self.fees_charged: dict[str, int] = {}
        self.withdrawn: set[str] = set()
        self.responses: dict[str, str] = {}
        self.ledger = ledger or Ledger()
        self.ledger.credit(self.ledger.escrow, config.payment)
        self.transfer: Transfer | None = None
        self.opened_at: int | None = None
        self.settled_at: int | None = None

    # state helpers
    @property
    def pending(self) -> bool:
        return isinstance(self.state, (Collecting, Challenge))

    @property
    def settled(self) -> bool:
        return isinstance(self.state, Settled)

    def _move(self, new: ClauseState) -> ClauseState:
        old = self.state
        ok = (
            (isinstance(old, Idle) and isinstance(new, Collecting))
            or (isinstance(old, Collecting) and isinstance(new, (Collecting, Challenge, Settled)))
            or (isinstance(old, Challenge) and isinstance(new, Settled))
            or (isinstance(old, Challenge) and isinstance(new, Challenge)
                and (len(new.pool) < len(old.pool) or (new.pool == old.pool and new.round == old.round)))
        )
        if not ok:
            raise InvalidTransition(f"{type(old).__name__} -> {type(new).__name__}")
        self.state = new
        self.history.append(new)
        return new

    # lifecycle
    def on_claim_confirmed(self, claim: ClaimMessage, height: int, position: int = 0) -> ClauseState:
        st = self.state
        if isinstance(st, (Challenge, Settled)):
            raise WindowClosed(f"claim by {claim.payee} arrived after the window closed")
        if claim.payee == self.config.payor:
            raise PayorClaim("the payor cannot claim its own payment")
        if not claim.evidence:
            raise InvalidEvidence(f"claim by {claim.payee} carries no valid evidence")
        entry = ConfirmedClaim(claim.payee, claim.sender, height, position, claim.precommit)
        if isinstance(st, Idle):
            self.opened_at = height
            return self._move(Collecting(height + self.config.window, (entry,)))
        if height > st.window_end:
            raise WindowClosed(f"block {height} is past window end {st.window_end}")
        if any(c.address == claim.payee for c in st.claims):
            raise DuplicateAddress(f"{claim.payee} already has a claim")
        return self._move(Collecting(st.window_end, st.claims + (entry,)))

    def close_window(self, height: int) -> ClauseState:
        st = self.state
        if not isinstance(st, Collecting):
            raise InvalidTransition("no window is open")
        if height < st.window_end:
            raise InvalidTransition(f"window runs until block {st.window_end}")
        if len(st.claims) == 1:
            return self._move(Settled("paid", st.claims[0].address))
        k = 1 if len(st.claims) == 2 else round_size(len(st.claims))
        sel = select_challengers(st.claims, k, self.config.selection_policy, self.rng)
        self.rounds = 1
        return self._move(open_challenge(st.claims, sel, height))

    def _next_round(self, height: int) -> ClauseState:
        st = self.state
        if isinstance(st, Challenge) and not st.selected:
            sel = select_challengers(st.pool, round_size(len(st.pool)),
                                     self.config.selection_policy, self.rng)
            self.rounds = st.round
            return self._move(replace(st, selected=sel, started_at=height))
        return st

    def record_response(self, resp: ChallengeResponse) -> None:
        st = self.state
        if not isinstance(st, Challenge) or resp.address not in st.selected:
            raise UnsolicitedResponse(f"{resp.address} was not asked to respond")
        if resp.address in self.responses:
            raise DuplicateResponse(f"{resp.address} already responded this round")
        self.responses[resp.address] = resp.action
        fee = self.config.challenge_fee if resp.fee is None else resp.fee
        self.fees_charged[resp.address] = self.fees_charged.get(resp.address, 0) + fee

    def resolve(self, height: int | None = None) -> ClauseState:
        st = self.state
        if not isinstance(st, Challenge):
            raise InvalidTransition("no challenge round to resolve")
        acts = dict(self.responses)
        self.responses = {}
        self.withdrawn.update(a for a in st.selected if acts.get(a, "withdraw") == "withdraw")
        new = resolve_round(st, acts, self.config.burn_address, self.config.missing_response)
        self._move(new)
        return self._next_round(st.started_at if height is None else height)

    def run_challenge_two(self, responses: Iterable[ChallengeResponse]) -> ClauseState:
        st = self.state
        if not isinstance(st, Challenge) or st.variant != "two":
            raise InvalidTransition("two-claimant challenge requires exactly two claims")
        for r in responses:
            self.record_response(r)
        return self.resolve()

    def run_challenge_multi(
        self, respond: Union[Callable[[int, tuple[str, ...]], Iterable[ChallengeResponse]],
                             Sequence[Iterable[ChallengeResponse]]],
    ) -> ClauseState:
        """Run rounds until settlement.

        ``respond`` is either a list of per-round response batches or a
        callable ``(round, selected) -> responses``.
        """
        st = self.state
        if not isinstance(st, Challenge) or st.variant != "multi":
            raise InvalidTransition("multi-claimant challenge requires three or more claims")
        batches = None if callable(respond) else list(respond)
        while isinstance(self.state, Challenge):
            st = self.state
            if batches is None:
                resps = respond(st.round, st.selected)
            else:
                resps = batches[st.round - 1] if st.round - 1 < len(batches) else ()
            for r in resps:
                self.record_response(r)
            self.resolve()
        return self.state

    def resolve_precommitted(self, height: int | None = None) -> ClauseState:
        """Hard-coded responses: every round resolves from the claims' precommits."""
        while isinstance(self.state, Challenge):
            st = self.state
            for c in st.pool:
                if c.address in st.selected and c.precommit is not None:
                    self.record_response(ChallengeResponse(c.address, c.precommit, 0))
            self.resolve(height)
        return self.state

    def settle(self) -> Transfer:
        st = self.state
        if not isinstance(st, Settled):
            raise InvalidTransition("contract is not settled")
        if self.transfer is not None:
            raise AlreadySettled("payment was already released")
        self.transfer = self.ledger.transfer(self.ledger.escrow, st.destination,
                                             self.config.payment, st.kind)
        return self.transfer

    # simulation hooks
    def solicitation(self) -> Solicitation | None:
        st = self.state
        if isinstance(st, Challenge) and st.selected and not self.config.hardcoded_responses:
            return Solicitation(self.contract_id, st.round, st.selected,
                                st.started_at + self.config.response_deadline)
        return None

    def _settlement_event(self, height: int) -> dict:
        self.settled_at = height
        t = self.settle()
        return {"type": "settlement", "contract": self.contract_id, "height": height,
                "outcome": t.kind, "to": t.destination, "amount": t.amount,
                "rounds": self.rounds}

    def _after_challenge_step(self, height: int, events: list[dict]) -> None:
        st = self.state
        if isinstance(st, Settled):
            events.append(self._settlement_event(height))
        elif isinstance(st, Challenge):
            events.append({"type": "challenge_round", "contract": self.contract_id,
                           "height": height, "round": st.round, "selected": list(st.selected),
                           "pool": list(st.addresses)})

    def process_block(self, block: Block) -> list[dict]:
        events: list[dict] = []
        h = block.height
        for pos, msg in enumerate(block.transactions):
            if msg.contract != self.contract_id:
                continue
            if msg.kind == "claim":
                try:
                    self.on_claim_confirmed(msg, h, pos)
                    events.append({"type": "claim_confirmed", "contract": self.contract_id,
                                   "height": h, "payee": msg.payee})
                except ClauseError as e:
                    events.append({"type": "claim_rejected", "contract": self.contract_id,
                                   "height": h, "payee": msg.payee, "reason": type(e).__name__})
            else:
                st = self.state
                if not isinstance(st, Challenge) or msg.round != st.round:
                    events.append({"type": "response_rejected", "contract": self.contract_id,
                                   "height": h, "payee": msg.payee, "reason": "StaleResponse"})
                    continue
                try:
                    self.record_response(ChallengeResponse(msg.payee, msg.action, msg.fee))
                    events.append({"type": "response", "contract": self.contract_id, "height": h,
                                   "payee": msg.payee, "action": msg.action, "round": msg.round})
                except ClauseError as e:
                    events.append({"type": "response_rejected", "contract": self.contract_id,
                                   "height": h, "payee": msg.payee, "reason": type(e).__name__})
        st = self.state
        if isinstance(st, Collecting) and h >= st.window_end:
            self.close_window(h)
            events.append({"type": "window_closed", "contract": self.contract_id, "height": h,
                           "claims": [c.address for c in st.claims]})
            if self.config.hardcoded_responses and isinstance(self.state, Challenge):
                self._after_challenge_step(h, events)
                self.resolve_precommitted(h)
            self._after_challenge_step(h, events)
        elif isinstance(st, Challenge) and h >= st.started_at + self.config.response_deadline:
            self.resolve(h)
            self._after_challenge_step(h, events)
        return events


class FirstClaimContract:
    """Baseline without a clause: the first confirmed claim is paid at once."""

    pending = False

    def __init__(self, payment: int, contract_id: str = "contract-0", payor: str = "payor",
                 ledger: Ledger | None = None):
        self.payment = payment
        self.contract_id = contract_id
        self.payor = payor
        self.signal = False
        self.state: ClauseState = Idle()
        self.ledger = ledger or Ledger()
        self.ledger.credit(self.ledger.escrow, payment)
        self.transfer: Transfer | None = None
        self.rounds = 0
        self.opened_at: int | None = None
        self.settled_at: int | None = None
        self.withdrawn: set[str] = set()

    @property
    def settled(self) -> bool:
        return isinstance(self.state, Settled)

    def solicitation(self) -> None:
        return None

    def process_block(self, block: Block) -> list[dict]:
        events = []
        for msg in block.transactions:
            if msg.contract != self.contract_id or msg.kind != "claim":
                continue
            if self.settled or not msg.evidence or msg.payee == self.payor:
                events.append({"type": "claim_rejected", "contract": self.contract_id,
                               "height": block.height, "payee": msg.payee,
                               "reason": "AlreadyPaid" if self.settled else "InvalidClaim"})
                continue
            self.state = Settled("paid", msg.payee)
            self.opened_at = self.settled_at = block.height
            self.transfer = self.ledger.transfer(self.ledger.escrow, msg.payee, self.payment, "paid")
            events.append({"type": "claim_confirmed", "contract": self.contract_id,
                           "height": block.height, "payee": msg.payee})
            events.append({"type": "settlement", "contract": self.contract_id,
                           "height": block.height, "outcome": "paid", "to": msg.payee,
                           "amount": self.payment, "rounds": 0})
        return events


# --- the claim game ---------------------------------------------------------

PAYOR = "payor"


def build_claim_game(fee: int = 1, challenge_fee: int = 0, *, performer: str = "A",
                     bot: str = "B", precommit: bool = False) -> Node:
    """Extensive form of the clause with one performer and one would-be front-runner.

    The performer first decides whether to perform and claim; the bot then
    decides whether to copy the claim. Two claims trigger a uniformly drawn
    challenger. Asserting costs ``challenge_fee``; withdrawing is silence and
    free. With ``precommit`` the performer's challenge response is fixed to
    assert when the claim is sent.
    """
    f, cf = Fraction(fee), Fraction(challenge_fee)
    both = {performer: f, bot: f}

    def fined(extra: dict) -> dict:
        out = dict(both)
        for k, v in extra.items():
            out[k] = out[k] + v
        return out

    if precommit:
        performer_picked: Node = Terminal(Outcome.of(THIRD_PARTY, both))
    else:
        performer_picked = Decision(performer, (
            ("assert", Terminal(Outcome.of(THIRD_PARTY, fined({performer: cf})))),
            ("withdraw", Terminal(Outcome.of(bot, both))),
        ))
    bot_picked = Decision(bot, (
        ("assert", Terminal(Outcome.of(THIRD_PARTY, fined({bot: cf})))),
        ("withdraw", Terminal(Outcome.of(performer, both))),
    ))
    half = Fraction(1, 2)
    challenge = Chance(((f"select={performer}", half, performer_picked),
                        (f"select={bot}", half, bot_picked)))
    return Decision(performer, (
        ("claim", Decision(bot, (
            ("claim", challenge),
            ("abstain", Terminal(Outcome.of(performer, {performer: f}))),
        ))),
        ("abstain", Terminal(Outcome(PAYOR))),
    ))


def claim_game_utility(agent: str, outcome: Outcome, *, payment, cost, theta,
                       performer: str = "A") -> Fraction:
    """Cardinal bookkeeping used only to derive each agent's ranking."""
    u = -outcome.fine(agent)
    if outcome.allocation == agent:
        u += Fraction(payment)
    if agent == performer and outcome.allocation != PAYOR:
        u -= Fraction(cost)
        if outcome.allocation not in (performer, THIRD_PARTY):
            u -= Fraction(theta)
    return u


def claim_game_preferences(game: Node, *, payment=100, cost=10, theta=1,
                           performer: str = "A", bot: str = "B") -> dict[str, OrdinalPreference]:
    outs = terminal_outcomes(game)
    return {
        a: OrdinalPreference.from_utility(
            a, outs, lambda o, a=a: claim_game_utility(a, o, payment=payment, cost=cost,
                                                       theta=theta, performer=performer))
        for a in (performer, bot)
    }


@dataclass
class ClaimGameCertificate:
    unique: bool
    outcome: Outcome | None
    performer_net: Fraction | None
    expected_net: Fraction
    sole_claimant: bool
    outcomes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.unique and self.sole_claimant and self.performer_net == self.expected_net


def certify_single_claimant(payment=100, cost=10, fee=1, theta=1, challenge_fee=0,
                            precommit: bool = False) -> ClaimGameCertificate:
    """Solve the claim game and check that only the performer claims and is paid."""
    game = build_claim_game(fee, challenge_fee, precommit=precommit)
    prefs = claim_game_preferences(game, payment=payment, cost=cost, theta=theta)
    sol = solve_spe(game, prefs)
    u = is_unique_outcome(sol)
    expected = Fraction(payment) - Fraction(cost) - Fraction(fee)
    if not u.unique or not u.outcome.is_degenerate:
        return ClaimGameCertificate(False, None, None, expected, False, sol.sorted_outcomes())
    o = u.outcome.support[0]
    net = claim_game_utility("A", o, payment=payment, cost=cost, theta=theta)
    sole = o == Outcome.of("A", {"A": fee})
    return ClaimGameCertificate(True, o, net, expected, sole, sol.sorted_outcomes())
