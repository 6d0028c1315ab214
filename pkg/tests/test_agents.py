import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from solomonic.agents import (
    ABSTAIN,
    AgentProfile,
    GridTooCoarse,
    absence_break_even,
    absence_sweep,
    asserts_when_selected,
    claim_value,
    fee_auction_equilibrium,
    is_auction_equilibrium,
    no_clause_payoffs,
    performer_expected_payoff,
)
from solomonic.clause import ClauseConfig, FirstClaimContract, SolomonicClause


def test_no_clause_equal_fees():
    p = no_clause_payoffs(100, 10, 1, 1)
    assert p["performer"].net == Fraction(100, 2) - 10 - 1
    assert p["bot1"].net == Fraction(100, 2) - 1


def test_no_clause_outbid_and_many_bots():
    p = no_clause_payoffs(100, 10, 1, 2)
    assert p["performer"].net == -11 and p["bot1"].net == 98
    p = no_clause_payoffs(100, 10, 1, 1, n_bots=3)
    assert p["performer"].received == 25 and p["bot3"].received == 25


@given(st.integers(1, 1000), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50),
       st.integers(0, 5))
def test_no_clause_conserves_payment(T, c, fa, fb, n):
    p = no_clause_payoffs(T, c, fa, fb, n)
    assert sum(r.received for r in p.values()) == T


def test_fee_auction_collapse():
    grid = [5 * i for i in range(21)]
    res = fee_auction_equilibrium(100, 10, grid)
    assert {(e[0], e[1]) for e in res.equilibria} == {(ABSTAIN, 95), (ABSTAIN, 100)}
    assert res.performer_values == {Fraction(-10)}
    assert not res.both_max_is_equilibrium
    assert not res.decide_perform
    assert res.profiles_checked == 22 * 22


def test_fee_auction_grid_validation():
    with pytest.raises(GridTooCoarse):
        fee_auction_equilibrium(100, 10, [1, 2, 100])
    with pytest.raises(GridTooCoarse):
        fee_auction_equilibrium(100, 10, [0, 50])


def test_auction_deviation_from_both_max():
    grid = list(range(0, 101, 5))
    # at (T, T) each side loses T/2 and prefers to abstain
    assert not is_auction_equilibrium(100, 100, 100, 10, grid)


def test_absence_rows_small():
    rows = absence_sweep([0.0, 0.5], payment=100, fee=5, runs=2000, seed=1)
    assert rows[0].analytic == -5 and rows[0].simulated == -5
    assert rows[1].analytic == 45
    assert abs(rows[1].simulated - 45) < 5
    assert absence_break_even(100, 5) == Fraction(1, 20)


def test_assert_policies():
    rng = random.Random(0)
    legit = AgentProfile("a", legitimate=True, strategy="legitimate", theta=3)
    assert asserts_when_selected(legit, 2, rng)
    assert not asserts_when_selected(legit, 3, rng)
    bot = AgentProfile("b")
    assert not asserts_when_selected(bot, 0, rng)
    assert asserts_when_selected(AgentProfile("b", challenge_policy="always_assert"), 9, rng)


def test_bot_claim_value_with_and_without_clause():
    bot = AgentProfile("b", fee_policy="outbid", fee=1)
    clause = SolomonicClause(ClauseConfig())
    plain = FirstClaimContract(100)
    assert claim_value(bot, 100, clause, 1) == -2
    assert claim_value(bot, 100, plain, 1) == 98
    believer = AgentProfile("b", fee_policy="outbid", fee=1, clause_belief=0.5)
    assert claim_value(believer, 100, plain, 1) == Fraction(1, 2) * -2 + Fraction(1, 2) * 98
    absent = AgentProfile("b", fee_policy="fixed", fee=2, absence_belief=0.1)
    assert claim_value(absent, 100, clause, 1) == 8


def test_performer_decision():
    base = dict(legitimate=True, strategy="legitimate", cost=10, theta=5, fee=1)
    clause = SolomonicClause(ClauseConfig())
    plain = FirstClaimContract(100)
    assert performer_expected_payoff(AgentProfile("a", **base), 100, clause) == 89
    auction = AgentProfile("a", expected_bots=1, bot_fee_model="auction", **base)
    assert performer_expected_payoff(auction, 100, plain) == -10
    equal = AgentProfile("a", expected_bots=1, bot_fee_model="equal", **base)
    assert performer_expected_payoff(equal, 100, plain) == 39


def test_profile_validation():
    with pytest.raises(ValueError):
        AgentProfile("a", strategy="legitimate")
    with pytest.raises(ValueError):
        AgentProfile("a", p_absent=2)
    with pytest.raises(ValueError):
        AgentProfile("a", fee_policy="bribe")
