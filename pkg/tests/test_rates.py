import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from exclusim.rates import (
    BoundReport,
    ConstantRates,
    LampertiRates,
    NullRecurrentRates,
    RateError,
    TableRates,
    from_descriptor,
    null_rec_schedule,
    validate_bounded,
)

E = math.e


def test_constant_rate_at():
    seq = ConstantRates(1.0, 2.0)
    assert seq.rate_at(7) == (1.0, 2.0)
    assert seq.bound_B == 2.0


def test_lamperti_rate_at_k1():
    a, b = LampertiRates(0.1).rate_at(1)
    assert a == pytest.approx(0.4)
    assert b == pytest.approx(0.6)


def test_lamperti_rejects_bad_mu():
    with pytest.raises(RateError):
        LampertiRates(0.6)
    with pytest.raises(RateError):
        LampertiRates(0.0)
    with pytest.raises(RateError):
        LampertiRates(-0.1)


def test_rate_index_zero_rejected():
    with pytest.raises(RateError):
        ConstantRates(1, 1).rate_at(0)


def test_null_rec_schedule_small():
    assert null_rec_schedule(1) == (2, 3, 5)
    assert null_rec_schedule(2) == (128, 133, 261)
    w3, r3, h3 = null_rec_schedule(3)
    assert w3 == 2**49
    assert r3 == 261 + 2**49
    assert h3 == 261 + 2**50


def test_null_rec_schedule_identities():
    seq = NullRecurrentRates()
    for n in range(1, 6):
        w, r, h = seq.schedule(n)
        assert h == r + w
        if n >= 2:
            w_prev, _, h_prev = seq.schedule(n - 1)
            assert w == w_prev**7
            assert r == h_prev + w


def test_null_rec_rate_at():
    seq = NullRecurrentRates()
    # (1, e) on [1, 3], (e, 1) on [4, 5], (1, e) on [6, 133], ...
    assert seq.rate_at(1) == (1.0, E)
    assert seq.rate_at(3) == (1.0, E)
    assert seq.rate_at(4) == (E, 1.0)
    assert seq.rate_at(5) == (E, 1.0)
    assert seq.rate_at(6) == (1.0, E)
    assert seq.rate_at(133) == (1.0, E)
    assert seq.rate_at(134) == (E, 1.0)
    assert seq.rate_at(261) == (E, 1.0)
    assert seq.rate_at(262) == (1.0, E)


def test_null_rec_rates_upto_matches_scalar():
    seq = NullRecurrentRates()
    a, b = seq.rates_upto(300)
    for k in range(1, 301):
        ak, bk = seq.rate_at(k)
        assert a[k] == ak and b[k] == bk


def test_rates_upto_matches_scalar_all_families():
    for seq in [ConstantRates(2, 1), LampertiRates(0.3),
                TableRates(((1, 2), (3, 4)), "repeat_last")]:
        a, b = seq.rates_upto(50)
        for k in range(1, 51):
            assert (a[k], b[k]) == seq.rate_at(k)


def test_table_tail_rules():
    t1 = TableRates(((1, 2), (3, 4)), "repeat_last")
    assert t1.rate_at(10) == (3.0, 4.0)
    t2 = TableRates(((1, 2),), ("constant", (5, 6)))
    assert t2.rate_at(10) == (5.0, 6.0)
    with pytest.raises(RateError):
        TableRates((), "repeat_last")


def test_validate_bounded():
    assert validate_bounded(LampertiRates(0.1)).bound == pytest.approx(0.6)
    rep = validate_bounded(NullRecurrentRates())
    assert rep.ok and rep.bound == pytest.approx(E)
    bad = validate_bounded(TableRates(((1, 1), (2, 2), (0, 1)), "repeat_last"))
    assert not bad.ok
    assert bad.violation_index == 3


def test_descriptor_roundtrip():
    for seq in [ConstantRates(2, 1), LampertiRates(0.25), NullRecurrentRates(),
                TableRates(((1, 2),), ("constant", (3, 4)))]:
        again = from_descriptor(seq.descriptor())
        assert again.rate_at(5) == seq.rate_at(5)
        assert again.label() == seq.label()


@given(st.integers(min_value=1, max_value=10**6))
def test_lamperti_rates_sum_to_one(k):
    a, b = LampertiRates(0.2).rate_at(k)
    assert a + b == pytest.approx(1.0)


@given(st.integers(min_value=1, max_value=10**4))
def test_rate_at_is_pure(k):
    seq = NullRecurrentRates()
    assert seq.rate_at(k) == seq.rate_at(k)
