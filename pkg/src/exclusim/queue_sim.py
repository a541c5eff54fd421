"""Event-driven simulation of the gap process and the leftmost particle.

State lives in queue coordinates: gaps[k] counts the empty sites between
particles k and k+1, equivalently the customers at queue k of the infinite
network.  The leftmost particle moves left at rate a_1 (a customer enters
queue 1) and right at rate b_1 whenever queue 1 is occupied (a customer
exits), so for finite starts

    X1(0) - X1(t) = total(t) - total(0)

holds exactly at every event.  The hot loop is the kernel in ``_kernel``;
this module owns buffers, windows, seeding and trajectory assembly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernel as K
from .rates import RateSequence
from .traffic import alpha_prefix, beta_prefix, is_admissible
from ._kernel import rebuild_tree

DISCIPLINE = "head-of-line FIFO, first-class priority"

_RAND_BLOCK = 1 << 16
_X1_BLOCK = 1 << 15
_EV_BLOCK = 1 << 15

EVENT_KIND_NAMES = {K.EV_ARRIVE: "arrive", K.EV_EXIT: "exit",
                    K.EV_RIGHT: "move-right", K.EV_LEFT: "move-left"}


class WindowBreach(RuntimeError):
    """A customer reached the lazy-activation frontier.

    The run is invalid past this point; repeat with a larger window growth
    constant.
    """

    def __init__(self, t: float, k: int, window_K: int, margin: int):
        self.t, self.k, self.window_K, self.margin = t, k, window_K, margin
        super().__init__(
            f"customer reached queue {k} at t={t:.6g}, window K={window_K} "
            f"margin={margin}; rerun with larger window growth"
        )


class CouplingViolation(RuntimeError):
    """Pathwise dominance failed; these are exact a.s. statements, so any
    single violation is a bug."""


@dataclass(frozen=True)
class GapConfig:
    """Finite-support gap configuration {queue index k >= 1: count >= 1}."""

    gaps: dict

    def __post_init__(self):
        clean = {}
        for k, v in self.gaps.items():
            k, v = int(k), int(v)
            if k < 1:
                raise ValueError(f"queue index must be >= 1, got {k}")
            if v < 0:
                raise ValueError(f"gap count must be >= 0, got {v}")
            if v > 0:
                clean[k] = v
        object.__setattr__(self, "gaps", clean)

    @classmethod
    def empty(cls) -> "GapConfig":
        return cls({})

    @classmethod
    def from_pairs(cls, pairs) -> "GapConfig":
        d = {}
        for k, v in pairs:
            d[int(k)] = d.get(int(k), 0) + int(v)
        return cls(d)

    @property
    def total(self) -> int:
        return sum(self.gaps.values())

    @property
    def max_index(self) -> int:
        return max(self.gaps) if self.gaps else 0

    def as_sorted_pairs(self):
        return sorted(self.gaps.items())

    def __eq__(self, other):
        return isinstance(other, GapConfig) and self.gaps == other.gaps


@dataclass(frozen=True)
class SimOptions:
    """Run options; defaults suit finite starts.

    window_growth is the light-cone constant c_w (queues per unit time per
    unit B); None means 4*B.  Invariant: c_w >= 2B.
    """

    seed: int = 0
    horizon: float = 100.0
    log_events: bool = False
    snapshot_cadence: float | None = None
    window_K0: int = 64
    window_growth: float | None = None
    breach_margin: int = 16
    discipline: str = DISCIPLINE

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")


@dataclass(frozen=True)
class EventLog:
    t: np.ndarray
    kind: np.ndarray
    k: np.ndarray

    def __len__(self):
        return len(self.t)

    def kind_names(self):
        return [EVENT_KIND_NAMES[int(c)] for c in self.kind]


@dataclass(frozen=True)
class Trajectory:
    """Event-sparse record of one run.

    times/x1 hold X1 at t=0 plus every change; sample_times/sample_totals
    sample the window gap total at snapshot cadence (or segment ends).
    """

    times: np.ndarray
    x1: np.ndarray
    horizon: float
    seed: int
    family: str
    options: dict
    event_count: int
    initial_total: int
    final_total: int
    final_gaps: GapConfig
    sample_times: np.ndarray
    sample_totals: np.ndarray
    events: EventLog | None = None
    snapshots: list = field(default_factory=list)
    window_K: int | None = None
    kind: str = "finite"

    def x1_at(self, ts) -> np.ndarray:
        """Piecewise-constant path evaluated at times ts <= horizon."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        idx = np.searchsorted(self.times, ts, side="right") - 1
        return self.x1[np.clip(idx, 0, len(self.x1) - 1)]

    def exit_times(self) -> np.ndarray:
        d = np.diff(self.x1)
        return self.times[1:][d == 1]

    def arrival_times(self) -> np.ndarray:
        d = np.diff(self.x1)
        return self.times[1:][d == -1]


def _next_pow2(n: int) -> int:
    return 1 << max(int(n - 1).bit_length(), 1)


class _Engine:
    """Arrays + kernel dispatch for one trajectory."""

    def __init__(self, seq: RateSequence, cap: int, rng: np.random.Generator,
                 log_events: bool, use_jit: bool = True):
        self.seq = seq
        self.rng = rng
        self.cap = cap
        self.a, self.b = seq.rates_upto(cap + 1)
        self.u = np.zeros(cap + 1, dtype=np.int64)
        self.wq = np.zeros(cap + 1)
        self.tree = np.zeros(cap + 1)
        self.f64 = np.zeros(2)
        self.i64 = np.zeros(7, dtype=np.int64)
        self.kernel = K.kernel_jit if use_jit else K.kernel_py
        self.log_events = log_events
        self.eb = rng.standard_exponential(_RAND_BLOCK)
        self.ub = rng.random(_RAND_BLOCK)
        self.x1_t = np.empty(_X1_BLOCK)
        self.x1_v = np.empty(_X1_BLOCK, dtype=np.int64)
        self.ev_t = np.empty(_EV_BLOCK if log_events else 1)
        self.ev_kind = np.empty(_EV_BLOCK if log_events else 1, dtype=np.int64)
        self.ev_k = np.empty(_EV_BLOCK if log_events else 1, dtype=np.int64)
        self.x1_chunks: list = []
        self.ev_chunks: list = []

    def seed_gaps(self, gaps: dict) -> None:
        for k, v in gaps.items():
            if k > self.cap - 2:
                self.grow(_next_pow2(2 * k + 4))
        for k, v in gaps.items():
            self.u[k] = v
        self._reweight()
        self.i64[K.I_TOTAL] = int(self.u.sum())

    def _reweight(self) -> None:
        occ = self.u[1:] > 0
        self.wq[1:] = np.where(occ, self.a[2 : self.cap + 2] + self.b[1 : self.cap + 1], 0.0)
        self.f64[K.F_W] = rebuild_tree(self.wq, self.tree, self.cap)

    def grow(self, new_cap: int | None = None) -> None:
        new_cap = new_cap or 2 * self.cap
        if new_cap <= self.cap:
            return
        old_u = self.u
        self.cap = new_cap
        self.a, self.b = self.seq.rates_upto(new_cap + 1)
        self.u = np.zeros(new_cap + 1, dtype=np.int64)
        self.u[: len(old_u)] = old_u
        self.wq = np.zeros(new_cap + 1)
        self.tree = np.zeros(new_cap + 1)
        self._reweight()

    def fenwick_add(self, k: int, delta: float) -> None:
        i = k
        while i <= self.cap:
            self.tree[i] += delta
            i += i & (-i)

    def flush_x1(self) -> None:
        n = int(self.i64[K.I_X1LEN])
        if n:
            self.x1_chunks.append((self.x1_t[:n].copy(), self.x1_v[:n].copy()))
            self.i64[K.I_X1LEN] = 0

    def flush_events(self) -> None:
        n = int(self.i64[K.I_EVLEN])
        if n:
            self.ev_chunks.append(
                (self.ev_t[:n].copy(), self.ev_kind[:n].copy(), self.ev_k[:n].copy())
            )
            self.i64[K.I_EVLEN] = 0

    def run_segment(self, t_stop: float, k_limit_for=None, on_frontier=None) -> None:
        """Advance to t_stop, dispatching kernel exit reasons."""
        a1 = float(self.a[1])
        while True:
            # resync the scalar total against the tree root (O(1), exact)
            self.f64[K.F_W] = self.tree[self.cap]
            k_limit = self.cap - 2 if k_limit_for is None else min(k_limit_for(), self.cap - 2)
            reason = self.kernel(
                self.a, self.b, self.u, self.wq, self.tree, self.cap, a1,
                t_stop, k_limit, self.f64, self.i64, self.eb, self.ub,
                self.x1_t, self.x1_v, self.log_events,
                self.ev_t, self.ev_kind, self.ev_k,
            )
            if reason == K.DONE:
                return
            if reason == K.NEED_RANDOM:
                self.eb = self.rng.standard_exponential(_RAND_BLOCK)
                self.ub = self.rng.random(_RAND_BLOCK)
                self.i64[K.I_RI] = 0
            elif reason == K.XBUF_FULL:
                self.flush_x1()
            elif reason == K.EVBUF_FULL:
                self.flush_events()
            elif reason == K.RESYNC:
                self._reweight()
            elif reason == K.FRONTIER:
                if on_frontier is not None:
                    on_frontier(self)
                else:
                    self.grow()
            else:  # pragma: no cover
                raise AssertionError(f"unknown kernel exit {reason}")

    def x1_path(self):
        self.flush_x1()
        if self.x1_chunks:
            ts = np.concatenate([c[0] for c in self.x1_chunks])
            vs = np.concatenate([c[1] for c in self.x1_chunks])
        else:
            ts = np.empty(0)
            vs = np.empty(0, dtype=np.int64)
        return np.concatenate(([0.0], ts)), np.concatenate(([0], vs))

    def event_log(self) -> EventLog | None:
        if not self.log_events:
            return None
        self.flush_events()
        if self.ev_chunks:
            return EventLog(
                np.concatenate([c[0] for c in self.ev_chunks]),
                np.concatenate([c[1] for c in self.ev_chunks]),
                np.concatenate([c[2] for c in self.ev_chunks]),
            )
        return EventLog(np.empty(0), np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))

    def gap_config(self) -> GapConfig:
        nz = np.nonzero(self.u)[0]
        return GapConfig({int(k): int(self.u[k]) for k in nz})


def _segment_times(horizon: float, cadence: float | None) -> np.ndarray:
    if cadence is None or cadence >= horizon:
        return np.array([horizon])
    n = int(math.floor(horizon / cadence))
    ts = np.arange(1, n + 1) * cadence
    if ts[-1] < horizon:
        ts = np.append(ts, horizon)
    return ts


def simulate_finite(seq: RateSequence, eta0: GapConfig, opts: SimOptions,
                    use_jit: bool = True) -> Trajectory:
    """Exact-in-law trajectory from a finite initial configuration."""
    rng = np.random.default_rng(opts.seed)
    cap = _next_pow2(max(256, 2 * eta0.max_index + 32))
    eng = _Engine(seq, cap, rng, opts.log_events, use_jit)
    eng.seed_gaps(dict(eta0.gaps))
    if eta0.max_index:
        eng.i64[K.I_MAXK] = eta0.max_index

    snapshots = []
    sample_ts = _segment_times(opts.horizon, opts.snapshot_cadence)
    sample_totals = np.empty(len(sample_ts), dtype=np.int64)
    for i, t_stop in enumerate(sample_ts):
        eng.run_segment(float(t_stop))
        sample_totals[i] = eng.i64[K.I_TOTAL]
        if opts.snapshot_cadence is not None:
            snapshots.append((float(t_stop), eng.gap_config()))

    ts, vs = eng.x1_path()
    return Trajectory(
        times=ts, x1=vs, horizon=opts.horizon, seed=opts.seed,
        family=seq.label(), options=_opts_dict(opts),
        event_count=int(eng.i64[K.I_NEV]),
        initial_total=eta0.total, final_total=int(eng.i64[K.I_TOTAL]),
        final_gaps=eng.gap_config(),
        sample_times=sample_ts, sample_totals=sample_totals,
        events=eng.event_log(), snapshots=snapshots, kind="finite",
    )


def simulate_stationary(seq: RateSequence, v: float, opts: SimOptions,
                        use_jit: bool = True) -> Trajectory:
    """Trajectory started from the product-geometric stationary law for rho(v).

    Gaps are sampled lazily as the window K(t) = K0 + ceil(c_w * B * t)
    reaches them; a customer entering the frontier margin raises
    WindowBreach rather than silently biasing the run.
    """
    verdict = is_admissible(seq, v, K=256)
    if not verdict.admissible:
        raise ValueError(f"rho(v={v}) is not admissible: {verdict.detail}")
    B = seq.bound_B
    c_w = opts.window_growth if opts.window_growth is not None else 4.0 * B
    if c_w < 2.0 * B:
        raise ValueError(f"window growth c_w={c_w} below light-cone floor 2B={2*B}")
    speed = c_w * B  # queues activated per unit time
    K0 = max(opts.window_K0, opts.breach_margin * 2)
    K_final = K0 + int(math.ceil(speed * opts.horizon)) + 1
    cap = _next_pow2(K_final + opts.breach_margin + 4)

    rng = np.random.default_rng(opts.seed)
    eng = _Engine(seq, cap, rng, opts.log_events, use_jit)

    # rho prefix for the whole final window, computed once
    rho_vals = alpha_prefix(seq, K_final + 1)
    if v != 0.0:
        rho_vals = rho_vals + v * beta_prefix(seq, K_final + 1)

    window = {"K": 0}

    def activate(hi: int) -> None:
        lo = window["K"] + 1
        hi = min(hi, K_final)
        if lo > hi:
            return
        r = rho_vals[lo : hi + 1]
        us = rng.random(hi - lo + 1)
        with np.errstate(divide="ignore"):
            logr = np.log(np.where(r > 0, r, 0.5))
        draws = np.where(r > 0, np.floor(np.log(us) / logr), 0.0).astype(np.int64)
        ks = np.arange(lo, hi + 1)
        nz = draws > 0
        if np.any(nz):
            for k, d in zip(ks[nz], draws[nz]):
                k = int(k)
                if eng.u[k] == 0:
                    w = eng.a[k + 1] + eng.b[k]
                    eng.wq[k] = w
                    eng.fenwick_add(k, w)
                eng.u[k] += int(d)
            eng.i64[K.I_TOTAL] += int(draws[nz].sum())
        window["K"] = hi

    activate(K0)
    initial_total = int(eng.i64[K.I_TOTAL])

    margin = opts.breach_margin

    def k_limit_for() -> int:
        return window["K"] - margin

    def on_frontier(_eng) -> None:
        t = float(_eng.f64[K.F_T])
        raise WindowBreach(t, int(_eng.i64[K.I_MAXK] + 1), window["K"], margin)

    # extension boundaries: activate in blocks to amortize draws
    act_block = 1024
    ext_dt = act_block / speed
    boundaries = list(np.arange(ext_dt, opts.horizon, ext_dt)) + [opts.horizon]
    sample_ts = _segment_times(opts.horizon, opts.snapshot_cadence)
    sample_set = set(float(x) for x in sample_ts)
    stops = sorted(set(float(x) for x in boundaries) | sample_set)

    snapshots = []
    samples = []
    for t_stop in stops:
        eng.run_segment(t_stop, k_limit_for=k_limit_for, on_frontier=on_frontier)
        needed = K0 + int(math.ceil(speed * t_stop))
        activate(needed)
        if t_stop in sample_set:
            samples.append((t_stop, int(eng.i64[K.I_TOTAL])))
            if opts.snapshot_cadence is not None:
                snapshots.append((t_stop, eng.gap_config()))

    ts, vs = eng.x1_path()
    s_ts = np.array([s[0] for s in samples])
    s_tot = np.array([s[1] for s in samples], dtype=np.int64)
    return Trajectory(
        times=ts, x1=vs, horizon=opts.horizon, seed=opts.seed,
        family=seq.label(), options=_opts_dict(opts),
        event_count=int(eng.i64[K.I_NEV]),
        initial_total=initial_total, final_total=int(eng.i64[K.I_TOTAL]),
        final_gaps=eng.gap_config(),
        sample_times=s_ts, sample_totals=s_tot,
        events=eng.event_log(), snapshots=snapshots,
        window_K=window["K"], kind="stationary",
    )


def _opts_dict(opts: SimOptions) -> dict:
    return {
        "seed": opts.seed, "horizon": opts.horizon,
        "log_events": opts.log_events,
        "snapshot_cadence": opts.snapshot_cadence,
        "window_K0": opts.window_K0, "window_growth": opts.window_growth,
        "breach_margin": opts.breach_margin, "discipline": opts.discipline,
    }


def crossings(traj: Trajectory, v: float) -> np.ndarray:
    """Times where X1(t) meets the line v*t.

    For v = 0 these are the return times of X1 to 0 (the degenerate
    never-moved path reports [0]).  For v != 0 each constant piece of X1 is
    intersected with the line.
    """
    ts, xs = traj.times, traj.x1
    if v == 0.0:
        if len(ts) == 1 or np.all(xs == 0):
            return np.array([0.0])
        hits = (xs[1:] == 0) & (xs[:-1] != 0)
        return ts[1:][hits]
    out = []
    bounds = np.append(ts, traj.horizon)
    for i in range(len(xs)):
        t0, t1 = bounds[i], bounds[i + 1]
        if t1 <= t0:
            continue
        tstar = xs[i] / v
        if t0 <= tstar < t1:
            out.append(tstar)
    return np.array(out)


def occupation(traj: Trajectory, burn_in: float = 0.0) -> dict:
    """Time-weighted distribution of X1 over (burn_in, horizon]."""
    if burn_in >= traj.horizon:
        raise ValueError("burn_in must be below the horizon")
    ts = np.append(traj.times, traj.horizon)
    weights: dict[int, float] = {}
    lo = np.clip(ts[:-1], burn_in, traj.horizon)
    hi = np.clip(ts[1:], burn_in, traj.horizon)
    dur = hi - lo
    for x, d in zip(traj.x1, dur):
        if d > 0:
            weights[int(x)] = weights.get(int(x), 0.0) + float(d)
    span = traj.horizon - burn_in
    return {x: w / span for x, w in sorted(weights.items())}


@dataclass(frozen=True)
class MginfPath:
    """Infinite-server occupancy path: counts change at arrivals/departures."""

    times: np.ndarray
    counts: np.ndarray
    arrival_times: np.ndarray
    horizon: float
    seed: int

    def count_at(self, ts) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        idx = np.searchsorted(self.times, ts, side="right") - 1
        return self.counts[np.clip(idx, 0, len(self.counts) - 1)]

    def min_over(self, t0: float, t1: float) -> int:
        sel = (self.times >= t0) & (self.times <= t1)
        vals = self.counts[sel]
        start = self.count_at(t0)[0]
        return int(min(int(vals.min()) if len(vals) else start, start))


def simulate_mg_inf(lam: float, service_sampler, opts: SimOptions) -> MginfPath:
    """Standard M/G/infinity dynamics: Poisson(lam) arrivals, iid service.

    ``service_sampler(rng, size)`` draws service durations; Y counts
    customers in service.
    """
    if lam <= 0:
        raise ValueError("arrival rate must be positive")
    rng = np.random.default_rng(opts.seed)
    horizon = opts.horizon
    n = rng.poisson(lam * horizon)
    arrivals = np.sort(rng.random(n) * horizon)
    services = service_sampler(rng, n) if n else np.empty(0)
    departures = arrivals + services
    ev_t = np.concatenate([arrivals, departures[departures <= horizon]])
    ev_d = np.concatenate([np.ones(len(arrivals), dtype=np.int64),
                           -np.ones(int(np.sum(departures <= horizon)), dtype=np.int64)])
    order = np.argsort(ev_t, kind="stable")
    ev_t = ev_t[order]
    ev_d = ev_d[order]
    counts = np.concatenate(([0], np.cumsum(ev_d)))
    times = np.concatenate(([0.0], ev_t))
    return MginfPath(times, counts, arrivals, horizon, opts.seed)


from .coupling import (  # noqa: E402  (re-export: couplings live with the queue view)
    CoupledPair,
    MginfCoupling,
    simulate_coupled_mginf,
    simulate_coupled_second_class,
)

__all__ = [
    "GapConfig", "SimOptions", "Trajectory", "EventLog", "MginfPath",
    "WindowBreach", "CouplingViolation", "DISCIPLINE",
    "simulate_finite", "simulate_stationary", "simulate_mg_inf",
    "simulate_coupled_second_class", "simulate_coupled_mginf",
    "CoupledPair", "MginfCoupling", "crossings", "occupation",
]
