"""Pathwise couplings of the queue process.

Two constructions, both exact almost-sure statements, both checked at every
event (any single violation raises):

* second-class coupling: initial customers are second class, served only
  when no first-class customer shares their queue; watching first-class
  customers alone gives the empty-start law, watching everyone gives the
  u-start law, and the first never exceeds the second componentwise.

* infinite-server coupling: every arriving customer carries a pre-sampled
  walk realization (moves plus per-step holdings).  In the M/G/infinity
  system it departs after its total walk lifetime; in the network it
  replays the same realization but accrues holding time only while at the
  head of its queue, so it stays at least as long, giving
  Y_t <= total(u) - X1(t) for all t.
"""
from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .rates import RateSequence


class _RateTable:
    """Doubling cache of (a, b) rate arrays."""

    def __init__(self, seq: RateSequence, K: int = 256):
        self.seq = seq
        self.K = K
        self.a, self.b = seq.rates_upto(K + 1)

    def ensure(self, k: int) -> None:
        if k + 1 > self.K:
            self.K = max(2 * self.K, k + 1)
            self.a, self.b = self.seq.rates_upto(self.K + 1)


@dataclass(frozen=True)
class CoupledPair:
    """Joint run of the empty-start and u-start systems on shared randomness."""

    times: np.ndarray
    x1_empty: np.ndarray
    x1_loaded: np.ndarray
    second_remaining: np.ndarray
    u_total: int
    event_count: int
    seed: int
    final_empty: dict
    final_loaded: dict


def simulate_coupled_second_class(seq: RateSequence, u, opts) -> CoupledPair:
    """One realization driving both the empty start and the start from u.

    Initial customers of the u-system are second class; service picks a
    first-class customer whenever one is present.  Componentwise dominance
    and the non-increase of the second-class count are asserted at every
    event.
    """
    from .queue_sim import CouplingViolation, GapConfig

    gaps = u.gaps if isinstance(u, GapConfig) else dict(u)
    rng = np.random.default_rng(opts.seed)
    rt = _RateTable(seq)
    horizon = float(opts.horizon)
    a1 = seq.a1

    f: dict[int, int] = {}
    s: dict[int, int] = {k: int(v) for k, v in gaps.items() if v > 0}
    for k in s:
        rt.ensure(k + 1)
    u_total = sum(s.values())
    second_left = u_total
    x1_f = 0
    x1_u = 0

    times = [0.0]
    p_f = [0]
    p_u = [0]
    p_s = [second_left]

    def occupied():
        ks = set(f) | set(s)
        return sorted(ks)

    t = 0.0
    n_events = 0
    while True:
        occ = occupied()
        weights = []
        for k in occ:
            rt.ensure(k + 1)
            weights.append(rt.a[k + 1] + rt.b[k])
        W = a1 + sum(weights)
        t_next = t + rng.standard_exponential() / W
        if t_next >= horizon:
            break
        t = t_next
        x = rng.random() * W
        if x < a1:
            # first-class arrival enters both systems
            f[1] = f.get(1, 0) + 1
            x1_f -= 1
            x1_u -= 1
        else:
            x -= a1
            idx = 0
            while idx < len(weights) - 1 and x >= weights[idx]:
                x -= weights[idx]
                idx += 1
            k = occ[idx]
            rt.ensure(k + 1)
            goes_right = x < rt.a[k + 1]
            first_class = f.get(k, 0) >= 1
            src = f if first_class else s
            src[k] -= 1
            if src[k] == 0:
                del src[k]
            if goes_right:
                dst = k + 1
                src2 = f if first_class else s
                src2[dst] = src2.get(dst, 0) + 1
            elif k >= 2:
                dst = k - 1
                src2 = f if first_class else s
                src2[dst] = src2.get(dst, 0) + 1
            else:
                # exit at queue 1
                x1_u += 1
                if first_class:
                    x1_f += 1
                else:
                    second_left -= 1
        n_events += 1
        # exact pathwise invariants: any violation is a bug
        if any(v < 0 for v in f.values()) or any(v < 0 for v in s.values()):
            raise CouplingViolation(f"negative class count at t={t}")
        s_now = sum(s.values())
        if s_now != second_left or not (0 <= second_left <= u_total):
            raise CouplingViolation(
                f"second-class count {s_now} inconsistent at t={t}"
            )
        if (x1_u - x1_f) != (u_total - second_left):
            # loaded system is right of the empty one by exactly the number
            # of second-class customers that have exited
            raise CouplingViolation(
                f"X1 offset {x1_u - x1_f} != exited second-class at t={t}"
            )
        times.append(t)
        p_f.append(x1_f)
        p_u.append(x1_u)
        p_s.append(second_left)

    return CoupledPair(
        np.array(times), np.array(p_f), np.array(p_u), np.array(p_s),
        u_total, n_events, opts.seed, dict(f),
        {k: f.get(k, 0) + s.get(k, 0) for k in sorted(set(f) | set(s))},
    )


@dataclass
class _Customer:
    cls: int  # 0 first, 1 second
    states: list
    holds: list
    ptr: int = 0
    remaining: float = math.inf
    queue: int = 0

    def departure_from(self, t_arr: float) -> float:
        """Undelayed completion clock: left-fold of holdings onto t_arr.

        The same accumulation order the head-of-line engine uses, so a
        never-delayed customer's network exit time is bit-identical to its
        infinite-server departure and the tie-break below stays exact.
        Horizon-censored skeletons never depart (inf).
        """
        if not (self.states and self.states[-1] == 0):
            return math.inf
        dep = t_arr
        for h in self.holds:
            dep += h
        return dep


def _sample_skeleton(rng, rt: _RateTable, k0: int, budget: float):
    """Walk realization from k0: (next states, per-step holdings), censored
    once cumulative holding exceeds budget."""
    states: list[int] = []
    holds: list[float] = []
    k = k0
    acc = 0.0
    while k > 0 and acc <= budget:
        rt.ensure(k + 1)
        up_rate = rt.a[k + 1]
        down_rate = rt.b[k]
        tot = up_rate + down_rate
        h = rng.standard_exponential() / tot
        up = rng.random() * tot < up_rate
        k = k + 1 if up else k - 1
        states.append(k)
        holds.append(h)
        acc += h
    return states, holds


@dataclass(frozen=True)
class MginfCoupling:
    """Network trajectory and the coupled infinite-server path."""

    times: np.ndarray
    x1: np.ndarray
    y: np.ndarray
    network_total: np.ndarray
    arrival_times: np.ndarray
    u_total: int
    min_slack: float
    event_count: int
    seed: int


def simulate_coupled_mginf(seq: RateSequence, u, opts) -> MginfCoupling:
    """Skeleton-replay coupling behind the infinite-server lower bound.

    Shared randomness: the arrival stream and each customer's walk
    realization.  The M/G/infinity side serves everyone immediately; the
    network side replays the same walk under head-of-line priority, so
    Y_t <= total(u) - X1(t) is asserted at every event.
    """
    from .queue_sim import CouplingViolation, GapConfig

    gaps = u.gaps if isinstance(u, GapConfig) else dict(u)
    rng = np.random.default_rng(opts.seed)
    rt = _RateTable(seq)
    horizon = float(opts.horizon)
    a1 = seq.a1

    first: dict[int, deque] = {}
    second: dict[int, deque] = {}
    version: dict[int, int] = {}
    anchor: dict[int, float] = {}
    head_heap: list = []

    def head_of(k: int):
        dq = first.get(k)
        if dq:
            return dq[0]
        dq = second.get(k)
        if dq:
            return dq[0]
        return None

    def set_head(k: int, now: float) -> None:
        version[k] = version.get(k, 0) + 1
        h = head_of(k)
        if h is not None and h.remaining < math.inf:
            anchor[k] = now
            heapq.heappush(head_heap, (now + h.remaining, k, version[k]))

    def pause_head(k: int, now: float) -> None:
        h = head_of(k)
        if h is not None and h.remaining < math.inf:
            h.remaining -= now - anchor.get(k, now)
            if h.remaining < 0.0:
                h.remaining = 0.0

    def push_customer(c: _Customer, k: int, now: float) -> None:
        c.queue = k
        if c.cls == 0:
            dq = first.setdefault(k, deque())
            preempting = not dq and head_of(k) is not None
            was_empty_all = head_of(k) is None
            if preempting:
                pause_head(k, now)
            dq.append(c)
            if preempting or was_empty_all:
                set_head(k, now)
        else:
            dq = second.setdefault(k, deque())
            was_head_free = head_of(k) is None
            dq.append(c)
            if was_head_free:
                set_head(k, now)

    # initial second-class customers with their own walk realizations
    total_net = 0
    for k in sorted(gaps):
        for _ in range(int(gaps[k])):
            states, holds = _sample_skeleton(rng, rt, k, horizon)
            c = _Customer(1, states, holds)
            c.remaining = holds[0] if holds else math.inf
            push_customer(c, k, 0.0)
            total_net += 1
    u_total = total_net

    mg_dep: list = []  # (departure time, serial)
    serial = 0
    Y = 0
    X1 = 0
    t = 0.0
    next_arrival = t + rng.standard_exponential() / a1

    times = [0.0]
    ys = [0]
    x1s = [0]
    totals = [total_net]
    arrivals = []
    min_slack = math.inf
    n_events = 0

    def record(now: float) -> None:
        nonlocal min_slack
        slack = (u_total - X1) - Y
        if slack < 0:
            raise CouplingViolation(
                f"Y={Y} exceeded total(u) - X1 = {u_total - X1} at t={now}"
            )
        min_slack = min(min_slack, slack)
        times.append(now)
        ys.append(Y)
        x1s.append(X1)
        totals.append(total_net)

    while True:
        # next valid head completion
        while head_heap and head_heap[0][2] != version.get(head_heap[0][1], 0):
            heapq.heappop(head_heap)
        t_head = head_heap[0][0] if head_heap else math.inf
        t_dep = mg_dep[0][0] if mg_dep else math.inf
        t_next = min(next_arrival, t_head, t_dep)
        if t_next >= horizon:
            break
        t = t_next
        n_events += 1
        # exact ties resolve infinite-server departures first: an undelayed
        # customer's network exit shares its departure clock bit-for-bit
        if t_next == t_dep:
            heapq.heappop(mg_dep)
            Y -= 1
        elif t_next == next_arrival:
            states, holds = _sample_skeleton(rng, rt, 1, horizon)
            c = _Customer(0, states, holds)
            c.remaining = holds[0] if holds else math.inf
            push_customer(c, 1, t)
            X1 -= 1
            total_net += 1
            Y += 1
            dep = c.departure_from(t)
            if dep < math.inf:
                serial += 1
                heapq.heappush(mg_dep, (dep, serial))
            arrivals.append(t)
            next_arrival = t + rng.standard_exponential() / a1
        else:
            _, k, _ = heapq.heappop(head_heap)
            c = head_of(k)
            dq = first[k] if (k in first and first[k] and first[k][0] is c) else second[k]
            dq.popleft()
            nxt = c.states[c.ptr]
            c.ptr += 1
            if c.ptr < len(c.states):
                c.remaining = c.holds[c.ptr]
            else:
                c.remaining = math.inf  # censored walk never finishes in-run
            set_head(k, t)
            if nxt == 0:
                if k != 1:
                    raise CouplingViolation(f"exit from queue {k} != 1 at t={t}")
                X1 += 1
                total_net -= 1
            else:
                push_customer(c, nxt, t)
        record(t)

    return MginfCoupling(
        np.array(times), np.array(x1s), np.array(ys), np.array(totals),
        np.array(arrivals), u_total, float(min_slack), n_events, opts.seed,
    )
