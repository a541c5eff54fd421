import math

import numpy as np
import pytest

from exclusim.rates import ConstantRates, LampertiRates, NullRecurrentRates
from exclusim.walk import (
    TauSample,
    WalkClass,
    classify,
    expected_tau_trunc,
    hit_prob_before_zero,
    max_displacement_tail,
    simulate_tau,
    survival_curve,
)


def survival_by_uniformization(seq, t, n_states=512):
    """Independent oracle: P[tau >= t] for the walk from 1.

    Truncated generator on states 1..n_states with 0 absorbing, evaluated
    by uniformization: sum_j e^{-Lt} (Lt)^j / j! * (P^j delta_1)(alive).
    """
    a, b = seq.rates_upto(n_states + 1)
    L = float(np.max(a[2 : n_states + 2]) + np.max(b[1 : n_states + 1])) + 1e-9
    p = np.zeros(n_states + 1)  # index = state, 0 absorbing
    p[1] = 1.0
    # uniformized one-step kernel acting on column of state masses
    out = 0.0
    log_w = -L * t  # log Poisson(L t) weight at j=0
    j = 0
    total = 0.0
    jmax = int(L * t + 12 * math.sqrt(L * t) + 50)
    while j <= jmax:
        w = math.exp(log_w + j * math.log(L * t) - math.lgamma(j + 1)) if t > 0 else (1.0 if j == 0 else 0.0)
        total += w * p[1:].sum()
        # advance one uniformized step
        q = np.zeros_like(p)
        ks = np.arange(1, n_states + 1)
        up = a[ks + 1] / L
        down = b[ks] / L
        stay = 1.0 - up - down
        q[1:] += stay * p[1:]
        q[2:] += up[:-1] * p[1:-1]
        q[0:n_states] += down * p[1:]
        q[0] = 0.0  # absorbed mass leaves the alive vector
        p = q
        j += 1
    return total


def test_classify_table():
    assert classify(ConstantRates(2, 1)).walk_class == WalkClass.TRANSIENT
    assert classify(ConstantRates(1, 1)).walk_class == WalkClass.NULL_RECURRENT
    assert classify(ConstantRates(1, 2)).walk_class == WalkClass.POSITIVE_RECURRENT
    assert classify(LampertiRates(0.1)).walk_class == WalkClass.NULL_RECURRENT
    assert classify(LampertiRates(0.4)).walk_class == WalkClass.POSITIVE_RECURRENT


def test_classify_null_rec_example():
    assert classify(NullRecurrentRates()).walk_class == WalkClass.NULL_RECURRENT


def test_classify_sums_never_both_converge():
    for seq in [ConstantRates(2, 1), ConstantRates(1, 2), LampertiRates(0.1),
                LampertiRates(0.4), NullRecurrentRates()]:
        c = classify(seq)
        assert not (c.sum_alpha.status == "converged"
                    and c.sum_escape.status == "converged")


def test_simulate_tau_reproducible():
    s1 = simulate_tau(ConstantRates(1, 2), 500, 100.0, seed=7)
    s2 = simulate_tau(ConstantRates(1, 2), 500, 100.0, seed=7)
    assert np.array_equal(s1.values, s2.values)
    assert np.array_equal(s1.censored, s2.censored)


def test_simulate_tau_censor_values_exact():
    s = simulate_tau(ConstantRates(2, 1), 2000, 5.0, seed=3)
    assert np.all(s.values[s.censored] == 5.0)
    assert np.all(s.values > 0)


def test_tau_positive_recurrent_mean_matches_oracle():
    # E[tau] for a/b walk: mean of min(tau, large cap) vs uniformization
    seq = ConstantRates(1, 2)
    s = simulate_tau(seq, 40_000, 200.0, seed=11)
    est, se = expected_tau_trunc(s, 200.0)
    grid = np.linspace(0, 200.0, 2001)
    # E[min(tau,t)] = int_0^t P[tau >= s] ds by quadrature on the oracle
    surv = [survival_by_uniformization(seq, float(t), n_states=64) for t in grid[:: 100]]
    # coarse oracle integration: survival decays fast, refine near zero
    fine = np.linspace(0, 30, 301)
    sv = np.array([survival_by_uniformization(seq, float(t), n_states=64) for t in fine])
    oracle = np.trapezoid(sv, fine)
    assert est == pytest.approx(oracle, abs=4 * se + 0.02)


def test_tau_symmetric_tail_slope():
    # null-recurrent symmetric walk: P[tau >= t] ~ t^{-1/2}
    seq = ConstantRates(0.5, 0.5)
    s = simulate_tau(seq, 100_000, 10_000.0, seed=5)
    ts = np.logspace(1, 3, 9)
    surv = survival_curve(s, ts)
    slope = np.polyfit(np.log(ts), np.log(surv), 1)[0]
    assert abs(slope + 0.5) < 0.1


def test_tau_symmetric_survival_matches_uniformization():
    seq = ConstantRates(0.5, 0.5)
    s = simulate_tau(seq, 100_000, 120.0, seed=9)
    for t in (5.0, 20.0, 80.0):
        emp = float(np.mean(np.minimum(s.values, 120.0) >= t))
        oracle = survival_by_uniformization(seq, t, n_states=256)
        assert emp == pytest.approx(oracle, abs=0.01)


def test_expected_tau_trunc_rejects_beyond_cap():
    s = TauSample(np.array([1.0, 3.0]), np.array([False, False]), 10.0, 0)
    with pytest.raises(ValueError):
        expected_tau_trunc(s, 11.0)


def test_expected_tau_trunc_small_cases():
    s = TauSample(np.array([1.0, 3.0]), np.array([False, False]), 10.0, 0)
    est, _ = expected_tau_trunc(s, 2.0)
    assert est == pytest.approx(1.5)
    allc = TauSample(np.array([4.0, 4.0]), np.array([True, True]), 4.0, 0)
    est, _ = expected_tau_trunc(allc, 4.0)
    assert est == pytest.approx(4.0)


def test_hit_prob_simple():
    assert hit_prob_before_zero(ConstantRates(2, 1), 1) == 1.0
    assert hit_prob_before_zero(ConstantRates(0.5, 0.5), 10) == pytest.approx(0.1)


def test_hit_prob_monotone():
    seq = LampertiRates(0.1)
    vals = [hit_prob_before_zero(seq, m) for m in range(1, 40)]
    assert all(x >= y for x, y in zip(vals, vals[1:]))


def test_hit_prob_lamperti_power():
    # f(x) ~ x^{1+4mu}: ratio of hit probabilities across a decade
    seq = LampertiRates(0.1)
    r = hit_prob_before_zero(seq, 1000) / hit_prob_before_zero(seq, 100)
    assert r == pytest.approx(10 ** (-1.4), rel=0.15)


def test_hit_prob_vs_monte_carlo():
    seq = LampertiRates(0.2)
    m = 12
    s = simulate_tau(seq, 60_000, 10_000.0, seed=13)
    emp = float(np.mean(s.max_state >= m))
    assert emp == pytest.approx(hit_prob_before_zero(seq, m), rel=0.05)


def test_max_displacement_tail_basics():
    assert max_displacement_tail(ConstantRates(0.5, 0.5), 1, 10.0) == 1.0
    b = max_displacement_tail(ConstantRates(0.5, 0.5), 500, 10.0)
    assert 0.0 <= b < 1e-12


def test_max_displacement_gaussian_regime():
    # k = 4 sqrt(t log t) at rate-1 symmetric walk: bound below t^{-4}
    t = 100.0
    k = int(4 * math.sqrt(t * math.log(t)))
    b = max_displacement_tail(ConstantRates(0.5, 0.5), k, t)
    assert b <= t ** (-4)


def test_max_displacement_monte_carlo_consistency():
    # bound must dominate the empirical exceedance probability
    seq = ConstantRates(0.5, 0.5)
    t, k = 100.0, 40
    s = simulate_tau(seq, 50_000, t, seed=21)
    emp = float(np.mean(s.max_state >= k))
    assert emp <= max_displacement_tail(seq, k, t)


def test_max_displacement_lamperti_never_reaches_far():
    # ~1e7 aggregate steps never reach state 1000; bound is sub-1e-6 there
    seq = LampertiRates(0.1)
    s = simulate_tau(seq, 20_000, 1000.0, seed=17)
    assert int(s.max_state.max()) < 1000
    assert max_displacement_tail(seq, 1000, 1000.0) < 1e-6
