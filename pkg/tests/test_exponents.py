import dataclasses
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from boundlab.exponents import check_identities, critical_exponents, derive_context


def test_critical_exponents_hand_values():
    assert critical_exponents(3) == (Fraction(6), Fraction(4))
    assert critical_exponents(4) == (Fraction(4), Fraction(3))
    assert critical_exponents(6) == (Fraction(3), Fraction(5, 2))


def test_critical_exponents_rejects_low_dimension():
    with pytest.raises(ValueError):
        critical_exponents(2)
    with pytest.raises(TypeError):
        critical_exponents(3.0)


def test_worked_context_n3_p2():
    ctx = derive_context(3, 2)
    assert ctx.q == 3
    assert ctx.m == Fraction(9, 2)
    assert ctx.sigma == Fraction(3, 5)
    assert ctx.A == 2
    assert ctx.A_hat1 == Fraction(4, 3)
    assert ctx.A_hat2 == Fraction(2, 3)


def test_worked_context_n4():
    ctx = derive_context(4, Fraction(3, 2))
    assert ctx.q == 4
    assert ctx.m == Fraction(16, 3)
    assert ctx.sigma == Fraction(4, 5)
    assert (ctx.A, ctx.A_hat1, ctx.A_hat2) == (2, Fraction(3, 2), Fraction(1, 2))
    # the combination behind the weight identity collapses to N/(N-2)
    assert 1 / ctx.sigma + ctx.two_low_star / ctx.q == 2


def test_limit_toward_linear_growth():
    # A -> 1 as p -> 1+ for N=3; p = 1 itself is outside the open range
    for k in (10, 100, 1000):
        ctx = derive_context(3, 1 + Fraction(1, k))
        assert ctx.A == Fraction(2) / (3 - (1 + Fraction(1, k)))
    assert derive_context(3, Fraction(101, 100)).A < Fraction(102, 100)
    with pytest.raises(ValueError):
        derive_context(3, 1)


def test_rejects_out_of_range_p_and_q():
    with pytest.raises(ValueError):
        derive_context(3, 3)  # p = two_low_star - 1 excluded
    with pytest.raises(ValueError):
        derive_context(3, Fraction(1, 2))
    with pytest.raises(ValueError):
        derive_context(3, 2, q_override=2)  # q must exceed max(N-1, 2_low/p) = 2
    with pytest.raises(TypeError):
        derive_context(3, 1.5)  # floats rejected, rationals only


def test_identities_worked_example():
    checks = check_identities(derive_context(3, 2))
    assert [c.passed for c in checks] == [True] * 4


def test_identities_n5():
    ctx = derive_context(5, Fraction(6, 5), q_override=5)
    assert ctx.sigma == Fraction(15, 17)
    assert all(c.passed for c in check_identities(ctx))


def test_tampered_sigma_fails_weight_identity():
    ctx = derive_context(3, 2)
    bad = dataclasses.replace(ctx, sigma=Fraction(1, 2))
    by_name = {c.name: c for c in check_identities(bad)}
    assert not by_name["interpolation_weight_sum"].passed


@st.composite
def _dimension_and_power(draw):
    N = draw(st.integers(3, 10))
    _, two_low = critical_exponents(N)
    span = two_low - 2  # width of (1, two_low - 1)
    denominator = draw(st.integers(2, 50))
    k = draw(st.integers(1, denominator - 1))
    return N, 1 + span * Fraction(k, denominator)


@given(_dimension_and_power())
def test_identities_hold_on_random_rationals(params):
    N, p = params
    ctx = derive_context(N, p)
    assert all(c.passed for c in check_identities(ctx))
    # exponent comparisons used by the small-max branch, strict by the
    # denominator being strictly below one
    assert ctx.A_hat1 > ctx.two_low_star * ctx.sigma / ctx.q
    assert ctx.A_hat2 > 1 - ctx.sigma


@given(_dimension_and_power())
def test_default_q_satisfies_strict_bound(params):
    N, p = params
    ctx = derive_context(N, p)
    assert ctx.q > max(Fraction(N - 1), ctx.two_low_star / p)
    assert ctx.m == Fraction(N) * ctx.q / (N - 1)
    assert ctx.m > N
    assert 0 < ctx.sigma < 1


def test_main_exponent_monotone_in_p():
    for N in range(3, 11):
        _, two_low = critical_exponents(N)
        span = two_low - 2
        grid = [1 + span * Fraction(k, 21) for k in range(1, 21)]
        values = [derive_context(N, p).A for p in grid]
        assert all(b > a for a, b in zip(values, values[1:]))


def test_main_exponent_blows_up_at_critical_power():
    _, two_low = critical_exponents(3)
    for bound in (10, 1000, 10**6):
        p = (two_low - 1) - Fraction(two_low - 2, bound)
        assert derive_context(3, p).A == bound
