"""The customer random walk on Z_+ and its classification.

The walk moves k -> k+1 at rate a_{k+1} and k -> k-1 at rate b_k; state 0
absorbs (entry to 0 is the customer leaving the system).  Its hitting time
tau of 0 from 1 is a customer's total sojourn under head-of-line service,
and its recurrence class drives the leftmost-particle phase diagram:

* transient        <=>  sum 1/(a_{k+1} alpha_k) < infinity
* positive rec.    <=>  sum alpha_k < infinity  (alpha is reversible)
* null recurrent   <=>  both sums diverge
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._series import CONVERGED, DIVERGENT, SeriesSum
from .rates import NullRecurrentRates, RateSequence
from .traffic import alpha_series, escape_series, scale_function

# 1e-8 keeps the relative-term rule from misfiring on divergent polynomial
# series within Kmax while still catching the convergent families fast
CLASSIFY_TOL = 1e-8
CLASSIFY_KMAX = 10**6


class WalkClass(str, Enum):
    TRANSIENT = "Transient"
    NULL_RECURRENT = "NullRecurrent"
    POSITIVE_RECURRENT = "PositiveRecurrent"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class WalkClassification:
    walk_class: WalkClass
    sum_alpha: SeriesSum
    sum_escape: SeriesSum


def classify(seq: RateSequence, tol: float = CLASSIFY_TOL,
             Kmax: int = CLASSIFY_KMAX) -> WalkClassification:
    """Recurrence classification from the two diagnostic series.

    Both series cannot converge under the bounded-rates hypothesis, so the
    cases are mutually exclusive; anything the stopping rules cannot settle
    by Kmax is reported Inconclusive rather than guessed.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if isinstance(seq, NullRecurrentRates):
        # no finite prefix can see the next mass spike (scale 3 sits at
        # k ~ 5.6e14), but alpha_{h_j} = 1/e recurs at every scale by
        # construction, so the alpha-sum diverges structurally
        s_escape = escape_series(seq, tol, Kmax)
        s_alpha_raw = alpha_series(seq, tol, Kmax)
        s_alpha = SeriesSum(
            s_alpha_raw.value, DIVERGENT, s_alpha_raw.n_terms, s_alpha_raw.last_term,
            {"rule": "structural-certificate",
             "detail": "alpha at every block top equals 1/e"},
        )
    else:
        s_alpha = alpha_series(seq, tol, Kmax)
        s_escape = escape_series(seq, tol, Kmax)
    if s_escape.status == CONVERGED:
        cls = WalkClass.TRANSIENT
    elif s_alpha.status == CONVERGED:
        cls = WalkClass.POSITIVE_RECURRENT
    elif s_alpha.status == DIVERGENT and s_escape.status == DIVERGENT:
        cls = WalkClass.NULL_RECURRENT
    else:
        cls = WalkClass.INCONCLUSIVE
    return WalkClassification(cls, s_alpha, s_escape)


@dataclass(frozen=True)
class TauSample:
    """Hitting times of 0 started from 1, censored at t_cap.

    ``values[i]`` equals t_cap exactly wherever ``censored[i]`` is set.
    ``max_state`` records the highest state each walk visited (used by the
    displacement-tail diagnostics).
    """

    values: np.ndarray
    censored: np.ndarray
    t_cap: float
    seed: int
    max_state: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def censor_fraction(self) -> float:
        return float(np.mean(self.censored))


def simulate_tau(seq: RateSequence, n: int, t_cap: float, seed: int,
                 start: int = 1) -> TauSample:
    """Sample n independent hitting times of 0, censored at t_cap.

    Embedded jump chain with exponential holding at rate a_{k+1} + b_k;
    all walkers advance in lockstep as numpy batches, finished ones are
    compacted away.  Deterministic given (seed, n, t_cap).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if t_cap <= 0:
        raise ValueError("t_cap must be positive")
    if start < 1:
        raise ValueError("start must be >= 1")
    rng = np.random.default_rng(seed)
    values = np.empty(n)
    censored = np.zeros(n, dtype=bool)
    max_state = np.full(n, start, dtype=np.int64)

    pos = np.full(n, start, dtype=np.int64)
    t = np.zeros(n)
    idx = np.arange(n)

    table_K = 1 << 10
    a, b = seq.rates_upto(table_K + 1)

    while idx.size:
        hi = int(pos.max())
        if hi + 1 > table_K:
            table_K = max(2 * table_K, hi + 1)
            a, b = seq.rates_upto(table_K + 1)
        up_rate = a[pos + 1]
        down_rate = b[pos]
        total = up_rate + down_rate
        t = t + rng.standard_exponential(idx.size) / total
        goes_up = rng.random(idx.size) * total < up_rate
        pos = pos + np.where(goes_up, 1, -1)
        max_state[idx] = np.maximum(max_state[idx], pos)

        timed_out = t >= t_cap
        absorbed = (pos == 0) & ~timed_out
        done = timed_out | absorbed
        if np.any(done):
            fin = idx[done]
            values[fin] = np.where(timed_out[done], t_cap, t[done])
            censored[fin] = timed_out[done]
            keep = ~done
            pos, t, idx = pos[keep], t[keep], idx[keep]

    return TauSample(values, censored, float(t_cap), seed, max_state)


def expected_tau_trunc(sample: TauSample, t: float) -> tuple[float, float]:
    """(estimate, standard error) of E[min(tau, t)] from a censored sample.

    Exactly computable for t <= t_cap: censored values only enter through
    min(value, t), which is t there.
    """
    if t > sample.t_cap:
        raise ValueError(f"t = {t} exceeds the sample cap {sample.t_cap}")
    clipped = np.minimum(sample.values, t)
    est = float(np.mean(clipped))
    se = float(np.std(clipped, ddof=1) / math.sqrt(len(clipped))) if len(clipped) > 1 else 0.0
    return est, se


def truncated_mean_curve(sample: TauSample, ts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """E[min(tau, t)] and standard errors on a grid of t values."""
    ts = np.asarray(ts, dtype=float)
    ests = np.empty(ts.shape)
    ses = np.empty(ts.shape)
    for i, t in enumerate(ts):
        ests[i], ses[i] = expected_tau_trunc(sample, float(t))
    return ests, ses


def survival_curve(sample: TauSample, ts: np.ndarray) -> np.ndarray:
    """Empirical P[tau >= t] on a grid (valid for t <= t_cap)."""
    ts = np.asarray(ts, dtype=float)
    if np.any(ts > sample.t_cap):
        raise ValueError("grid exceeds the sample cap")
    vals = np.sort(sample.values)
    nge = len(vals) - np.searchsorted(vals, ts, side="left")
    return nge / len(vals)


def hit_prob_before_zero(seq: RateSequence, m: int) -> float:
    """P[walk from 1 reaches m before 0] = f(1)/f(m) by optional stopping."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if m == 1:
        return 1.0
    f = scale_function(seq, m)
    return float(f[1] / f[m])


def max_displacement_tail(seq: RateSequence, k: int, t: float,
                          visits_factor: float = 2.0) -> float:
    """Upper bound on P[max_{s<=t} walk >= k] from 1, clamped to 1.

    Minimum of two bounds: (i) scale-function excursion bound f(1)/f(k)
    amplified by an expected-excursion count ceil(visits_factor*a_1*t)+1,
    and (ii) reflection plus a Poisson-Chernoff tail for the dominating
    rate-1/2 symmetric walk, valid when sup_k a_k <= 1/2.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if t <= 0:
        raise ValueError("t must be positive")
    if k == 1:
        return 1.0
    a1 = seq.a1
    excursions = math.ceil(visits_factor * a1 * t) + 1
    bound = excursions * hit_prob_before_zero(seq, k)

    a, _ = seq.rates_upto(min(1 << 14, max(k, 2)))
    if np.all(a[1:] <= 0.5 + 1e-12):
        # dominate by the symmetric walk with +-1 jumps at rate 1/2 each,
        # reflect, then Chernoff on the compensated Poisson difference
        m = k - 1  # displacement needed from the start state
        if m >= 1:
            theta = math.asinh(m / t)
            log_p = t * (math.cosh(theta) - 1.0) - theta * m + math.log(2.0)
            bound = min(bound, math.exp(min(log_p, 0.0)))
    return float(min(bound, 1.0))
