"""Traffic-equation algebra for the gap process.

The balance system

    (b_i + a_{i+1}) rho_i = a_i rho_{i-1} + b_{i+1} rho_{i+1},   rho_0 = 1

has the one-parameter solution family rho(v) = alpha + v*beta.  A solution
with every rho_k in (0,1) induces a product-geometric invariant measure for
the gaps, and the minimal admissible parameter v0 is the almost-sure speed
of every particle from finite initial configurations.

All products are carried in log space: alpha for the block-schedule family
spans e^{+-w_j}, far beyond float range.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._series import CONVERGED, DIVERGENT, INCONCLUSIVE, SeriesSum, sum_verdict
from .rates import (
    ConstantRates,
    LampertiRates,
    NullRecurrentRates,
    RateSequence,
    TableRates,
)

DEFAULT_TOL = 1e-12
DEFAULT_KMAX = 10**6

ADMISSIBLE_CERTIFIED = "certified"
ADMISSIBLE_PREFIX = "prefix-only"
NOT_ADMISSIBLE = "not-admissible"


def log_alpha_prefix(seq: RateSequence, K: int) -> np.ndarray:
    """log(alpha_k) for k = 0..K; alpha_k = (a_1...a_k)/(b_1...b_k)."""
    if K < 0:
        raise ValueError("K must be >= 0")
    a, b = seq.rates_upto(K)
    out = np.zeros(K + 1)
    if K >= 1:
        out[1:] = np.cumsum(np.log(a[1:]) - np.log(b[1:]))
    return out


def alpha_prefix(seq: RateSequence, K: int) -> np.ndarray:
    """alpha_0..alpha_K (may underflow to 0 for huge-dynamic-range families)."""
    return np.exp(log_alpha_prefix(seq, K))


def log_beta_prefix(seq: RateSequence, K: int) -> np.ndarray:
    """log(beta_k) for k = 0..K via beta_k = (1 + a_k beta_{k-1}) / b_k.

    The recursion telescopes to the displayed sum
    1/b_k + a_k/(b_k b_{k-1}) + ... and is evaluated with logaddexp so that
    exponentially growing beta stays representable.  beta_0 = 0 maps to -inf.
    """
    if K < 0:
        raise ValueError("K must be >= 0")
    a, b = seq.rates_upto(K)
    out = np.full(K + 1, -np.inf)
    log, log1p, exp = math.log, math.log1p, math.exp
    la = np.log(a[1:]) if K >= 1 else None
    lb_arr = np.log(b[1:]) if K >= 1 else None
    acc = -math.inf
    for k in range(K):
        x = la[k] + acc
        # logaddexp(0, x) without ufunc call overhead
        if x > 0:
            acc = x + log1p(exp(-x)) - lb_arr[k]
        elif x > -745.0:
            acc = log1p(exp(x)) - lb_arr[k]
        else:
            acc = -lb_arr[k]
        out[k + 1] = acc
    return out


def beta_prefix(seq: RateSequence, K: int) -> np.ndarray:
    """beta_0..beta_K (beta_0 = 0)."""
    out = np.exp(log_beta_prefix(seq, K))
    return out


def scale_function(seq: RateSequence, K: int) -> np.ndarray:
    """f(0)..f(K) with f(k) = sum_{j<=k} (b_1...b_{j-1})/(a_1...a_j).

    f is the increasing function making f(walk) a martingale up to the hit
    of 0; f(1)/f(m) is the probability of reaching m before 0 from 1.
    """
    if K < 0:
        raise ValueError("K must be >= 0")
    out = np.zeros(K + 1)
    if K >= 1:
        a, _ = seq.rates_upto(K)
        la = log_alpha_prefix(seq, K)
        # increment at j is 1/(a_j alpha_{j-1})
        log_inc = -np.log(a[1:]) - la[:-1]
        out[1:] = np.cumsum(np.exp(log_inc))
    return out


def _escape_log_terms(seq: RateSequence, cache: dict):
    """Chunked log-terms of sum_j 1/(a_j alpha_{j-1}), j >= 1.

    This is simultaneously the v0 series of eq-style
    1/a_1 + b_1/(a_1 a_2) + ... and, reindexed, the transience series
    sum_k 1/(a_{k+1} alpha_k).
    """

    def fn(k0: int, k1: int) -> np.ndarray:
        K = cache.get("K", 0)
        if k1 > K:
            newK = max(k1, 2 * K, 1 << 12)
            a, b = seq.rates_upto(newK)
            la = np.zeros(newK + 1)
            la[1:] = np.cumsum(np.log(a[1:]) - np.log(b[1:]))
            cache.update(K=newK, log_a=np.log(a), log_alpha=la)
        la = cache["log_alpha"]
        log_a = cache["log_a"]
        ks = np.arange(k0, k1 + 1)
        return -log_a[ks] - la[ks - 1]

    return fn


def _alpha_log_terms(seq: RateSequence, cache: dict):
    def fn(k0: int, k1: int) -> np.ndarray:
        K = cache.get("K", 0)
        if k1 > K:
            newK = max(k1, 2 * K, 1 << 12)
            a, b = seq.rates_upto(newK)
            la = np.zeros(newK + 1)
            la[1:] = np.cumsum(np.log(a[1:]) - np.log(b[1:]))
            cache.update(K=newK, log_alpha=la)
        return cache["log_alpha"][k0 : k1 + 1]

    return fn


def escape_series(seq: RateSequence, tol: float = DEFAULT_TOL, Kmax: int = DEFAULT_KMAX) -> SeriesSum:
    """Verdict on sum_k 1/(a_{k+1} alpha_k); finite iff the customer walk escapes."""
    return sum_verdict(_escape_log_terms(seq, {}), tol, Kmax)


def alpha_series(seq: RateSequence, tol: float = DEFAULT_TOL, Kmax: int = DEFAULT_KMAX) -> SeriesSum:
    """Verdict on sum_{k>=1} alpha_k (the reversible-mass series)."""
    return sum_verdict(_alpha_log_terms(seq, {}), tol, Kmax)


@dataclass(frozen=True)
class SpeedResult:
    value: float
    status: str
    series: SeriesSum


def v0(seq: RateSequence, tol: float = DEFAULT_TOL, Kmax: int = DEFAULT_KMAX) -> SpeedResult:
    """Minimal-solution speed v0 = -1 / (1/a_1 + b_1/(a_1 a_2) + ...).

    Divergence of the series is exactly the recurrent case and forces
    v0 = 0.  The verdict machinery is shared with the walk classifier.
    """
    s = escape_series(seq, tol, Kmax)
    if s.status == CONVERGED:
        return SpeedResult(-1.0 / s.value, CONVERGED, s)
    if s.status == DIVERGENT:
        return SpeedResult(0.0, DIVERGENT, s)
    return SpeedResult(-1.0 / s.value if s.value > 0 else 0.0, INCONCLUSIVE, s)


def rho(seq: RateSequence, v: float, K: int) -> np.ndarray:
    """rho(v)_k = alpha_k + v * beta_k for k = 0..K (rho_0 = 1)."""
    out = alpha_prefix(seq, K)
    if v != 0.0:
        out = out + v * beta_prefix(seq, K)
    out[0] = 1.0
    return out


def residual(seq: RateSequence, rho_vals: np.ndarray) -> float:
    """Max absolute defect of rho_vals against the balance system."""
    rho_vals = np.asarray(rho_vals, dtype=float)
    K = len(rho_vals) - 1
    if K < 2:
        raise ValueError("need rho_0..rho_K with K >= 2")
    if rho_vals[0] != 1.0:
        raise ValueError("rho_0 must be 1")
    a, b = seq.rates_upto(K + 1)
    i = np.arange(1, K)
    lhs = (b[i] + a[i + 1]) * rho_vals[i]
    rhs = a[i] * rho_vals[i - 1] + b[i + 1] * rho_vals[i + 1]
    return float(np.max(np.abs(lhs - rhs)))


@dataclass(frozen=True)
class AdmissibilityVerdict:
    admissible: bool
    mode: str  # certified | prefix-only | not-admissible
    checked_K: int
    detail: str = ""


def _dominated_everywhere(seq: RateSequence) -> bool:
    """True when a_k < b_k for every k, by family structure."""
    if isinstance(seq, ConstantRates):
        return seq.a < seq.b
    if isinstance(seq, LampertiRates):
        return True  # mu > 0
    if isinstance(seq, TableRates):
        ta, tb = seq._tail_pair()
        return all(a < b for a, b in seq.pairs) and ta < tb
    return False


def is_admissible(
    seq: RateSequence, v: float, K: int = 1000, tol: float = 1e-9
) -> AdmissibilityVerdict:
    """Check rho(v)_k in (tol, 1 - tol) on the prefix, certifying when possible.

    For v = 0 with a_k < b_k for all k, alpha_k < 1 holds for every k and the
    verdict upgrades to certified.  The block-schedule family has
    alpha_k <= 1/e by construction, also certified.  Otherwise only the
    prefix is vouched for.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if v == 0.0:
        # rho = alpha: test in log space so 2^{-k}-type decay never underflows
        la = log_alpha_prefix(seq, K)
        inside = la[1:] < math.log1p(-tol)
        if not np.all(inside):
            bad = int(np.argmax(~inside)) + 1
            return AdmissibilityVerdict(
                False, NOT_ADMISSIBLE, K,
                f"alpha_{bad} = {math.exp(min(la[bad], 700.0)):.6g} not below 1",
            )
    else:
        vals = rho(seq, v, K)
        inside = (vals[1:] > tol) & (vals[1:] < 1.0 - tol)
        if not np.all(inside):
            bad = int(np.argmax(~inside)) + 1
            return AdmissibilityVerdict(
                False, NOT_ADMISSIBLE, K, f"rho_{bad} = {vals[bad]:.6g} outside (0,1)"
            )
    if v == 0.0:
        if _dominated_everywhere(seq):
            return AdmissibilityVerdict(
                True, ADMISSIBLE_CERTIFIED, K, "a_k < b_k for all k forces alpha_k < 1"
            )
        if isinstance(seq, NullRecurrentRates):
            return AdmissibilityVerdict(
                True, ADMISSIBLE_CERTIFIED, K, "alpha_k <= 1/e for the block schedule"
            )
    return AdmissibilityVerdict(True, ADMISSIBLE_PREFIX, K, "prefix check only")


@dataclass(frozen=True)
class GeometricMarginal:
    """Stationary gap marginal: P[gap = n] = (1-q)^n q, mean (1-q)/q."""

    success_q: float
    mean: float


def stationary_marginal(rho_k: float) -> GeometricMarginal:
    if not (0.0 < rho_k < 1.0):
        raise ValueError(f"rho_k must lie in (0,1), got {rho_k}")
    q = 1.0 - rho_k
    return GeometricMarginal(q, rho_k / q)


@dataclass(frozen=True)
class TrafficSolution:
    """Bundle of computed prefixes and the speed, as the CLI reports them."""

    alpha: np.ndarray
    beta: np.ndarray
    v0: float
    v0_status: str
    admissible: AdmissibilityVerdict
    K: int = field(default=0)

    @classmethod
    def solve(cls, seq: RateSequence, K: int = 100,
              tol: float = DEFAULT_TOL, Kmax: int = DEFAULT_KMAX) -> "TrafficSolution":
        sp = v0(seq, tol, Kmax)
        adm = is_admissible(seq, sp.value, max(K, 1))
        return cls(alpha_prefix(seq, K), beta_prefix(seq, K), sp.value, sp.status, adm, K)
