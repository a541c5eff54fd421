import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from exclusim import traffic
from exclusim.rates import ConstantRates, LampertiRates, NullRecurrentRates


def test_alpha_constant_1_2():
    out = traffic.alpha_prefix(ConstantRates(1, 2), 3)
    assert np.allclose(out, [1, 0.5, 0.25, 0.125])


def test_alpha_constant_equal_rates():
    out = traffic.alpha_prefix(ConstantRates(1, 1), 20)
    assert np.allclose(out, 1.0)


def test_alpha_lamperti_quarter():
    out = traffic.alpha_prefix(LampertiRates(0.25), 2)
    assert out[1] == pytest.approx(1 / 3)
    assert out[2] == pytest.approx(0.2)


def test_beta_constant_1_2():
    out = traffic.beta_prefix(ConstantRates(1, 2), 2)
    assert np.allclose(out, [0, 0.5, 0.75])


def test_beta_k0_is_zero():
    assert traffic.beta_prefix(LampertiRates(0.3), 0).tolist() == [0.0]


def test_beta_symmetric_half():
    out = traffic.beta_prefix(ConstantRates(0.5, 0.5), 3)
    assert np.allclose(out, [0, 2, 4, 6])


def test_beta_matches_displayed_sum():
    # direct evaluation of 1/b_k + a_k/(b_k b_{k-1}) + ... + a_k...a_2/(b_k...b_1)
    seq = LampertiRates(0.3)
    K = 6
    a, b = seq.rates_upto(K)
    expect = np.zeros(K + 1)
    for k in range(1, K + 1):
        s = 0.0
        for j in range(1, k + 1):
            term = 1.0
            for i in range(j, k + 1):
                term /= b[i]
            for i in range(j + 1, k + 1):
                term *= a[i]
            s += term
        expect[k] = s
    assert np.allclose(traffic.beta_prefix(seq, K), expect)


def test_v0_constant_2_1():
    res = traffic.v0(ConstantRates(2, 1))
    assert res.status == "converged"
    assert res.value == pytest.approx(-1.0, abs=1e-9)


def test_v0_constant_1_2_divergent():
    res = traffic.v0(ConstantRates(1, 2))
    assert res.status == "divergent"
    assert res.value == 0.0


def test_v0_symmetric_divergent():
    res = traffic.v0(ConstantRates(0.5, 0.5))
    assert res.status == "divergent"
    assert res.value == 0.0


def test_v0_lamperti_recurrent():
    res = traffic.v0(LampertiRates(0.1))
    assert res.status == "divergent"
    assert res.value == 0.0


@pytest.mark.parametrize("a,b", [(2.0, 1.0), (3.0, 0.5), (1.5, 1.0)])
def test_v0_closed_form_geometric(a, b):
    res = traffic.v0(ConstantRates(a, b))
    assert res.value == pytest.approx(-(a - b), rel=1e-9)


def test_rho_v0_is_alpha():
    seq = LampertiRates(0.1)
    assert np.allclose(traffic.rho(seq, 0.0, 5), traffic.alpha_prefix(seq, 5))


def test_rho_constant_2_1_minimal_not_admissible():
    vals = traffic.rho(ConstantRates(2, 1), -1.0, 2)
    assert vals[1] == pytest.approx(1.0)
    verdict = traffic.is_admissible(ConstantRates(2, 1), -1.0, K=10)
    assert not verdict.admissible


def test_residual_of_any_rho_v_is_tiny():
    for seq in [ConstantRates(1, 2), LampertiRates(0.1), LampertiRates(0.3)]:
        for v in [0.0, 0.01, -0.05]:
            vals = traffic.rho(seq, v, 200)
            assert traffic.residual(seq, vals) < 1e-12


def test_residual_detects_perturbation():
    seq = LampertiRates(0.3)
    vals = traffic.rho(seq, 0.01, 50)
    vals[20] += 0.1
    assert traffic.residual(seq, vals) >= 0.01


def test_alpha_over_beta_strictly_decreasing():
    # strictly decreasing up to float saturation of the limit ratio
    for seq in [ConstantRates(2, 1), ConstantRates(1, 2), LampertiRates(0.2),
                NullRecurrentRates()]:
        la = traffic.log_alpha_prefix(seq, 400)
        lb = traffic.log_beta_prefix(seq, 400)
        diffs = np.diff(la[1:] - lb[1:])
        assert np.all(diffs <= 1e-12)
        assert np.all(diffs[:40] < 0)


def test_v0_within_range():
    for seq in [ConstantRates(2, 1), ConstantRates(1, 2), LampertiRates(0.3)]:
        res = traffic.v0(seq)
        a1 = seq.rate_at(1)[0]
        assert -a1 < res.value <= 0.0


def test_admissibility_lamperti_certified():
    verdict = traffic.is_admissible(LampertiRates(0.1), 0.0, K=100)
    assert verdict.admissible
    assert verdict.mode == "certified"


def test_admissibility_boundary_rejected():
    verdict = traffic.is_admissible(ConstantRates(1, 1), 0.0, K=10)
    assert not verdict.admissible


def test_admissibility_prefix_constant_1_2():
    verdict = traffic.is_admissible(ConstantRates(1, 2), 0.0, K=50)
    assert verdict.admissible
    assert verdict.mode == "certified"  # a < b termwise


def test_scale_function_symmetric():
    out = traffic.scale_function(ConstantRates(0.5, 0.5), 3)
    assert np.allclose(out, [0, 2, 4, 6])


def test_scale_function_constant_2_1():
    out = traffic.scale_function(ConstantRates(2, 1), 2)
    assert np.allclose(out, [0, 0.5, 0.75])


def test_scale_function_k0():
    assert traffic.scale_function(LampertiRates(0.4), 0).tolist() == [0.0]


def test_lamperti_alpha_log_slope():
    # alpha_n decays like n^{-4 mu}
    for mu in (0.1, 0.2):
        la = traffic.log_alpha_prefix(LampertiRates(mu), 10**4)
        slope = la[-1] / math.log(10**4)
        assert abs(slope + 4 * mu) < 0.1 * 4 * mu


def test_stationary_marginal():
    gm = traffic.stationary_marginal(0.5)
    assert gm.success_q == pytest.approx(0.5)
    assert gm.mean == pytest.approx(1.0)
    assert traffic.stationary_marginal(2 / 3).mean == pytest.approx(2.0)
    assert traffic.stationary_marginal(1e-9).mean == pytest.approx(0.0, abs=1e-8)
    with pytest.raises(ValueError):
        traffic.stationary_marginal(1.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=0.01, max_value=0.49),
       st.floats(min_value=-0.2, max_value=0.2))
def test_rho_solves_balance_for_every_v(mu, v):
    seq = LampertiRates(mu)
    vals = traffic.rho(seq, v, 60)
    assert traffic.residual(seq, vals) < 1e-10


def test_traffic_solution_bundle():
    sol = traffic.TrafficSolution.solve(ConstantRates(2, 1), K=10)
    assert sol.v0 == pytest.approx(-1.0, abs=1e-9)
    assert sol.v0_status == "converged"
    assert len(sol.alpha) == 11
