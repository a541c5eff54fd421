"""Partial-sum verdicts for the positive series the classifiers rely on.

A finite computation cannot prove convergence or divergence, so each sum
comes back with a status and the evidence that produced it:

* ``converged``   the running term fell below tol * partial_sum
* ``divergent``   the partial sum blew past 1/tol, or the final doubling
                  window [Kmax/2, Kmax] still carried a non-negligible
                  fraction of the whole sum
* ``inconclusive`` neither rule fired by Kmax
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CONVERGED = "converged"
DIVERGENT = "divergent"
INCONCLUSIVE = "inconclusive"

_CHUNK = 1 << 15


@dataclass(frozen=True)
class SeriesSum:
    value: float
    status: str
    n_terms: int
    last_term: float
    evidence: dict = field(default_factory=dict)


def sum_verdict(
    log_terms_fn,
    tol: float,
    Kmax: int,
    doubling_fraction: float = 0.05,
) -> SeriesSum:
    """Accumulate sum_{k=1..} exp(log_terms_fn(k0, k1)) until a rule fires.

    ``log_terms_fn(k0, k1)`` returns log-terms for indices k0..k1 inclusive.
    Log-space input keeps families with exp(+-w_j) dynamic range finite.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if Kmax < 1:
        raise ValueError("Kmax must be >= 1")
    cap = 1.0 / tol
    total = 0.0
    half_total = None
    half_at = max(Kmax // 2, 1)
    k = 1
    n = 0
    last = np.inf
    while k <= Kmax:
        hi = min(k + _CHUNK - 1, Kmax)
        with np.errstate(over="ignore"):
            # inf terms are fine: the magnitude cap fires on them
            terms = np.exp(log_terms_fn(k, hi))
            csum = total + np.cumsum(terms)
        conv = terms < tol * csum  # relative-term convergence test
        over = csum > cap
        j_conv = int(np.argmax(conv)) if np.any(conv) else -1
        j_over = int(np.argmax(over)) if np.any(over) else -1
        if j_conv >= 0 and (j_over < 0 or j_conv <= j_over):
            return SeriesSum(
                float(csum[j_conv]), CONVERGED, k + j_conv, float(terms[j_conv]),
                {"rule": "relative-term", "tol": tol},
            )
        if j_over >= 0:
            return SeriesSum(
                float(csum[j_over]), DIVERGENT, k + j_over, float(terms[j_over]),
                {"rule": "magnitude-cap", "cap": cap},
            )
        if half_total is None and hi >= half_at:
            half_total = float(total + np.sum(terms[: half_at - k + 1]))
        total = float(csum[-1])
        last = float(terms[-1])
        n = hi
        k = hi + 1
    # Kmax reached: the last doubling window still contributing a fixed
    # fraction of the sum is treated as divergence evidence
    if half_total is not None and total > 0:
        frac = (total - half_total) / total
        if frac > doubling_fraction:
            return SeriesSum(
                total, DIVERGENT, n, last,
                {"rule": "final-doubling", "tail_fraction": frac,
                 "threshold": doubling_fraction},
            )
        return SeriesSum(
            total, INCONCLUSIVE, n, last,
            {"rule": "none", "tail_fraction": frac},
        )
    return SeriesSum(total, INCONCLUSIVE, n, last, {"rule": "none"})
