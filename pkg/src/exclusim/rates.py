"""Jump-rate families for the semi-infinite particle system.

Every particle k >= 1 carries a leftward rate a_k and a rightward rate b_k.
All families here satisfy the uniform-bound hypothesis 0 < a_k, b_k <= B,
which is what makes the process well defined.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

E = math.e


class RateError(ValueError):
    """Invalid rate family parameters or rate-index queries."""


def _check_index(k: int) -> None:
    if k < 1:
        raise RateError(f"rate index must be >= 1, got {k}")


class RateSequence:
    """Base class for rate families.

    Instances are immutable and safe to share across concurrent replicas.
    Subclasses implement ``rate_at`` (scalar, exact) and ``rates_upto``
    (vectorized tables for the numerics).
    """

    def rate_at(self, k: int) -> tuple[float, float]:
        raise NotImplementedError

    def rates_upto(self, K: int) -> tuple[np.ndarray, np.ndarray]:
        """Arrays (a, b) of shape (K+1,); index 0 is unused padding."""
        raise NotImplementedError

    @property
    def bound_B(self) -> float:
        """Analytic least upper bound on all rates."""
        raise NotImplementedError

    @property
    def a1(self) -> float:
        return self.rate_at(1)[0]

    def label(self) -> str:
        raise NotImplementedError

    def descriptor(self) -> dict:
        """JSON-friendly family descriptor (round-trips through configs)."""
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantRates(RateSequence):
    a: float
    b: float

    def __post_init__(self):
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        if not (self.a > 0 and self.b > 0):
            raise RateError("constant rates must be positive")

    def rate_at(self, k: int) -> tuple[float, float]:
        _check_index(k)
        return self.a, self.b

    def rates_upto(self, K: int):
        a = np.full(K + 1, self.a)
        b = np.full(K + 1, self.b)
        a[0] = b[0] = np.nan
        return a, b

    @property
    def bound_B(self) -> float:
        return max(self.a, self.b)

    def label(self) -> str:
        return f"constant(a={self.a:g},b={self.b:g})"

    def descriptor(self) -> dict:
        return {"family": "constant", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class LampertiRates(RateSequence):
    """Near-symmetric rates a_k = 1/2 - mu/k, b_k = 1/2 + mu/k.

    Requires 0 < mu < 1/2 so that a_1 > 0.
    """

    mu: float

    def __post_init__(self):
        if not (0.0 < self.mu < 0.5):
            raise RateError(f"lamperti family needs 0 < mu < 1/2, got {self.mu}")

    def rate_at(self, k: int) -> tuple[float, float]:
        _check_index(k)
        return 0.5 - self.mu / k, 0.5 + self.mu / k

    def rates_upto(self, K: int):
        k = np.arange(K + 1, dtype=float)
        k[0] = np.nan
        return 0.5 - self.mu / k, 0.5 + self.mu / k

    @property
    def bound_B(self) -> float:
        return 0.5 + self.mu  # b_1 is the largest rate

    def label(self) -> str:
        return f"lamperti(mu={self.mu:g})"

    def descriptor(self) -> dict:
        return {"family": "lamperti", "mu": self.mu}


@dataclass(frozen=True)
class NullRecurrentRates(RateSequence):
    """Alternating (1,e)/(e,1) blocks on doubly-exponentially growing scales.

    Block boundaries come from w_1 = 2, w_{n+1} = w_n**7,
    r_n = 2*(w_1+...+w_{n-1}) + w_n + 1, h_n = r_n + w_n.  Rates are (1, e)
    on (h_{n-1}, r_n] and (e, 1) on (r_n, h_n], with h_0 = 0.
    """

    # boundaries are exact big ints: w_3 = 2**49 already overflows 32 bits
    _bounds: list = field(default_factory=list, repr=False, compare=False)

    def _extend_to(self, k: int) -> None:
        bounds = self._bounds
        if not bounds:
            bounds.append((2, 3, 5))  # (w_1, r_1, h_1)
        while bounds[-1][2] < k:
            w, r, h = bounds[-1]
            w_next = w**7
            bounds.append((w_next, h + w_next, h + 2 * w_next))

    def schedule(self, n: int) -> tuple[int, int, int]:
        """(w_n, r_n, h_n) as exact integers."""
        if n < 1:
            raise RateError(f"schedule index must be >= 1, got {n}")
        bounds = self._bounds
        if not bounds:
            bounds.append((2, 3, 5))
        while len(bounds) < n:
            w, r, h = bounds[-1]
            w_next = w**7
            bounds.append((w_next, h + w_next, h + 2 * w_next))
        return bounds[n - 1]

    def rate_at(self, k: int) -> tuple[float, float]:
        _check_index(k)
        self._extend_to(k)
        for _, r, h in self._bounds:
            if k <= r:
                return 1.0, E
            if k <= h:
                return E, 1.0
        raise AssertionError("schedule extension failed")

    def rates_upto(self, K: int):
        self._extend_to(K)
        a = np.full(K + 1, 1.0)
        b = np.full(K + 1, E)
        for _, r, h in self._bounds:
            if r >= K:
                break
            lo = r + 1
            hi = min(h, K)
            if lo <= hi:
                a[lo : hi + 1] = E
                b[lo : hi + 1] = 1.0
        a[0] = b[0] = np.nan
        return a, b

    @property
    def bound_B(self) -> float:
        return E

    def label(self) -> str:
        return "null-recurrent-example"

    def descriptor(self) -> dict:
        return {"family": "null_recurrent_example"}


TAIL_REPEAT_LAST = "repeat_last"
TAIL_CONSTANT = "constant"


@dataclass(frozen=True)
class TableRates(RateSequence):
    """Explicit (a_k, b_k) prefix plus a tail rule covering all larger k.

    tail is either ``repeat_last`` or ``("constant", (a, b))``; the process is
    semi-infinite, so every k must be defined.
    """

    pairs: tuple
    tail: object = TAIL_REPEAT_LAST

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple((float(a), float(b)) for a, b in self.pairs))
        if not self.pairs and self.tail == TAIL_REPEAT_LAST:
            raise RateError("repeat_last tail needs a non-empty prefix")
        if isinstance(self.tail, tuple):
            kind, pair = self.tail
            if kind != TAIL_CONSTANT:
                raise RateError(f"unknown tail rule {self.tail!r}")
            object.__setattr__(self, "tail", (TAIL_CONSTANT, (float(pair[0]), float(pair[1]))))
        elif self.tail != TAIL_REPEAT_LAST:
            raise RateError(f"unknown tail rule {self.tail!r}")

    def _tail_pair(self) -> tuple[float, float]:
        if self.tail == TAIL_REPEAT_LAST:
            return self.pairs[-1]
        return self.tail[1]

    def rate_at(self, k: int) -> tuple[float, float]:
        _check_index(k)
        if k <= len(self.pairs):
            return self.pairs[k - 1]
        return self._tail_pair()

    def rates_upto(self, K: int):
        ta, tb = self._tail_pair()
        a = np.full(K + 1, ta)
        b = np.full(K + 1, tb)
        n = min(len(self.pairs), K)
        if n:
            pa = np.array([p[0] for p in self.pairs[:n]])
            pb = np.array([p[1] for p in self.pairs[:n]])
            a[1 : n + 1] = pa
            b[1 : n + 1] = pb
        a[0] = b[0] = np.nan
        return a, b

    @property
    def bound_B(self) -> float:
        ta, tb = self._tail_pair()
        vals = [ta, tb] + [x for p in self.pairs for x in p]
        return max(vals)

    def label(self) -> str:
        return f"table({len(self.pairs)} pairs)"

    def descriptor(self) -> dict:
        d = {"family": "table", "pairs": [list(p) for p in self.pairs]}
        if self.tail == TAIL_REPEAT_LAST:
            d["tail"] = "repeat_last"
        else:
            d["tail"] = {"constant": list(self.tail[1])}
        return d


@dataclass(frozen=True)
class BoundReport:
    """Outcome of checking 0 < a_k, b_k <= B over a family."""

    ok: bool
    bound: float | None = None
    violation_index: int | None = None
    reason: str | None = None


def validate_bounded(seq: RateSequence, K: int = 1000) -> BoundReport:
    """Certify the uniform rate bound.

    Closed-form families get their analytic bound.  Table families are
    scanned over the prefix and the tail pair, so the certificate covers
    every k, not just k <= K.
    """
    if K < 1:
        raise RateError("K must be >= 1")
    if isinstance(seq, TableRates):
        for i, (a, b) in enumerate(seq.pairs, start=1):
            if not (a > 0 and b > 0):
                return BoundReport(False, None, i, f"non-positive rate at k={i}: ({a}, {b})")
            if not (math.isfinite(a) and math.isfinite(b)):
                return BoundReport(False, None, i, f"non-finite rate at k={i}")
        ta, tb = seq._tail_pair()
        if not (ta > 0 and tb > 0 and math.isfinite(ta) and math.isfinite(tb)):
            return BoundReport(False, None, len(seq.pairs) + 1, f"bad tail pair ({ta}, {tb})")
        return BoundReport(True, seq.bound_B)
    # closed-form families validate their parameters at construction
    a, b = seq.rates_upto(min(K, 10_000))
    if np.any(a[1:] <= 0) or np.any(b[1:] <= 0):
        idx = int(np.argmax((a[1:] <= 0) | (b[1:] <= 0))) + 1
        return BoundReport(False, None, idx, f"non-positive rate at k={idx}")
    return BoundReport(True, seq.bound_B)


def null_rec_schedule(n: int) -> tuple[int, int, int]:
    """(w_n, r_n, h_n) of the alternating-block construction, exact."""
    return NullRecurrentRates().schedule(n)


def from_descriptor(d: dict) -> RateSequence:
    """Build a rate family from its JSON descriptor."""
    fam = d.get("family")
    if fam == "constant":
        return ConstantRates(float(d["a"]), float(d["b"]))
    if fam == "lamperti":
        return LampertiRates(float(d["mu"]))
    if fam == "null_recurrent_example":
        return NullRecurrentRates()
    if fam == "table":
        tail = d.get("tail", "repeat_last")
        if isinstance(tail, dict):
            tail = (TAIL_CONSTANT, tuple(tail["constant"]))
        return TableRates(tuple(tuple(p) for p in d["pairs"]), tail)
    raise RateError(f"unknown rate family {fam!r}")
