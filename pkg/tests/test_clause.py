import itertools
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from solomonic.chain import ClaimMessage
from solomonic.clause import (
    NULL_ADDRESS,
    AlreadySettled,
    Challenge,
    ChallengeResponse,
    ClauseConfig,
    Collecting,
    DuplicateAddress,
    DuplicateResponse,
    Idle,
    InvalidEvidence,
    InvalidTransition,
    MissingResponse,
    PayorClaim,
    Settled,
    SolomonicClause,
    UnsolicitedResponse,
    WindowClosed,
    certify_single_claimant,
    max_rounds,
    round_size,
)
from solomonic.game import IncomparableLottery

from support import explore_challenge


def claim(payee, **kw):
    return ClaimMessage(payee, payee, kw.pop("fee", 1), 0, **kw)


def clause(seed=0, **kw):
    return SolomonicClause(ClauseConfig(**kw), random.Random(seed))


def test_window_examples():
    c = clause(window=3)
    assert isinstance(c.state, Idle)
    c.on_claim_confirmed(claim("x"), 5)
    assert c.state == Collecting(8, c.state.claims)
    c.on_claim_confirmed(claim("y"), 8)  # inclusive end
    with pytest.raises(WindowClosed):
        c.on_claim_confirmed(claim("z"), 9)
    with pytest.raises(InvalidTransition):
        c.close_window(7)
    assert isinstance(c.close_window(8), Challenge)


def test_single_claim_paid_at_window_end():
    c = clause(window=2)
    c.on_claim_confirmed(claim("x"), 1)
    assert c.close_window(3) == Settled("paid", "x")
    t = c.settle()
    assert (t.destination, t.amount, t.kind) == ("x", 100, "paid")
    assert c.ledger.balances == {"escrow": 0, "x": 100}
    with pytest.raises(AlreadySettled):
        c.settle()
    assert c.ledger.balances == {"escrow": 0, "x": 100}


def test_claim_validation():
    c = clause()
    with pytest.raises(PayorClaim):
        c.on_claim_confirmed(claim("payor"), 1)
    with pytest.raises(InvalidEvidence):
        c.on_claim_confirmed(claim("x", evidence=False), 1)
    c.on_claim_confirmed(claim("x"), 1)
    with pytest.raises(DuplicateAddress):
        c.on_claim_confirmed(claim("x"), 2)
    with pytest.raises(ValueError):
        ClauseConfig(payor=NULL_ADDRESS)


def _two(seed=0):
    c = clause(seed=seed)
    c.on_claim_confirmed(claim("legit"), 1)
    c.on_claim_confirmed(claim("bot"), 2)
    c.close_window(5)
    return c


def test_two_claimant_withdraw_pays_other():
    c = _two()
    sel = c.state.selected[0]
    other = ({"legit", "bot"} - {sel}).pop()
    assert c.run_challenge_two([ChallengeResponse(sel, "withdraw")]) == Settled("paid", other)


def test_two_claimant_assert_burns():
    c = _two()
    sel = c.state.selected[0]
    assert c.run_challenge_two([ChallengeResponse(sel, "assert")]) == Settled("burned", NULL_ADDRESS)
    assert c.settle().destination == NULL_ADDRESS


def test_silence_counts_as_withdraw_or_errors():
    c = _two()
    other = ({"legit", "bot"} - set(c.state.selected)).pop()
    assert c.run_challenge_two([]) == Settled("paid", other)
    strict = clause(missing_response="error")
    for p, h in (("x", 1), ("y", 1)):
        strict.on_claim_confirmed(claim(p), h)
    strict.close_window(5)
    with pytest.raises(MissingResponse):
        strict.run_challenge_two([])


def test_unsolicited_and_duplicate_responses():
    c = _two()
    sel = c.state.selected[0]
    other = ({"legit", "bot"} - {sel}).pop()
    with pytest.raises(UnsolicitedResponse):
        c.record_response(ChallengeResponse(other, "assert"))
    c.record_response(ChallengeResponse(sel, "withdraw"))
    with pytest.raises(DuplicateResponse):
        c.record_response(ChallengeResponse(sel, "assert"))


def test_latest_timestamp_selection():
    c = clause(selection_policy="latest_timestamp")
    c.on_claim_confirmed(claim("early"), 1, 0)
    c.on_claim_confirmed(claim("late"), 1, 3)
    c.close_window(5)
    assert c.state.selected == ("late",)


def test_charity_destination():
    c = clause(burn_destination="charity")
    c.on_claim_confirmed(claim("x"), 1)
    c.on_claim_confirmed(claim("y"), 1)
    c.close_window(5)
    assert c.run_challenge_two([ChallengeResponse(c.state.selected[0], "assert")]).destination == "charity"


def test_round_helpers():
    assert [round_size(m) for m in (1, 2, 3, 4, 5, 9)] == [1, 1, 1, 2, 2, 4]
    assert [max_rounds(n) for n in (2, 3, 4, 5, 8, 9)] == [1, 3, 3, 4, 4, 5]


def _multi(n, seed=0, **kw):
    c = clause(seed=seed, **kw)
    for i in range(n):
        c.on_claim_confirmed(claim(f"w{i}"), 1, i)
    c.close_window(5)
    return c


def test_multi_all_withdraw_until_one_remains():
    c = _multi(5)
    assert c.state.variant == "multi" and len(c.state.selected) == 2
    seen = []
    end = c.run_challenge_multi(lambda r, sel: seen.append(sel) or ())
    # the last remaining claimant is selected and stays silent: nobody left to pay
    assert end == Settled("burned", NULL_ADDRESS)
    assert [len(s) for s in seen] == [2, 1, 1, 1]
    assert c.rounds <= max_rounds(5)


def test_multi_assert_burns_immediately():
    c = _multi(4)
    end = c.run_challenge_multi([[ChallengeResponse(c.state.selected[0], "assert")]])
    assert end.kind == "burned" and c.rounds == 1


def test_precommitted_responses():
    c = clause(hardcoded_responses=True)
    c.on_claim_confirmed(claim("legit", precommit="assert"), 1)
    c.on_claim_confirmed(claim("bot", precommit="withdraw"), 1)
    c.close_window(5)
    sel = c.state.selected[0]
    end = c.resolve_precommitted()
    assert end == (Settled("burned", NULL_ADDRESS) if sel == "legit" else Settled("paid", "legit"))


@pytest.mark.parametrize("n", range(2, 7))
def test_exhaustive_never_pays_coalition_when_honest_asserts(n):
    addresses = ["legit"] + [f"w{i}" for i in range(n)]
    bound = math.ceil(math.log2(n + 1)) + 1
    leaves = 0
    for end, rounds in explore_challenge(addresses, "legit"):
        leaves += 1
        assert end.kind == "burned"
        assert rounds <= bound
    assert leaves > 0


@settings(max_examples=50, deadline=None)
@given(st.integers(3, 40), st.integers(0, 10**6))
def test_liveness_bound(n, seed):
    c = _multi(n, seed)
    rng = random.Random(seed)
    end = c.run_challenge_multi(lambda r, sel: [ChallengeResponse(a, rng.choice(["assert", "withdraw"]))
                                                for a in sel if rng.random() < 0.7])
    assert isinstance(end, Settled)
    assert c.rounds <= max_rounds(n)


def test_claim_game_certificate_default():
    cert = certify_single_claimant()
    assert cert.ok and cert.performer_net == 100 - 10 - 1


def test_claim_game_with_challenge_fee_and_precommit():
    assert certify_single_claimant(challenge_fee=1, theta=5).ok
    assert certify_single_claimant(theta=0, precommit=True).ok
    with pytest.raises(IncomparableLottery):
        certify_single_claimant(theta=0)


def test_hardcoded_matches_interactive():
    # the same responses given interactively or precommitted settle the same way
    for first, second in itertools.product(("assert", "withdraw"), repeat=2):
        live, pre = clause(seed=3), clause(seed=3, hardcoded_responses=True)
        live.on_claim_confirmed(claim("x"), 1)
        live.on_claim_confirmed(claim("y"), 1)
        pre.on_claim_confirmed(claim("x", precommit=first), 1)
        pre.on_claim_confirmed(claim("y", precommit=second), 1)
        live.close_window(5)
        pre.close_window(5)
        sel = live.state.selected[0]
        act = first if sel == "x" else second
        assert live.run_challenge_two([ChallengeResponse(sel, act)]) == pre.resolve_precommitted()
