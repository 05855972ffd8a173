"""Discrete-event simulation of the bulk-service queue with BMAP input.

The simulator executes the model definition literally and shares no code
with the analytic solver beyond the validated input objects.  Replication
``i`` draws from ``SeedSequence(seed).spawn(replications)[i]``, so results
are reproducible and independent of execution order.
"""
from __future__ import annotations

import warnings
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass, field
from typing import Dict

import numpy as np
from scipy import stats

from .bmap import BmapModel
from .service import ServiceLaw, ServicePolicy

MEASURES = ("L", "L_q", "L_s", "P_idle", "W", "W_q", "departure_rate")


class UnstableDrift(RuntimeWarning):
    """Queue grew past ``SimConfig.drift_bound``."""


@dataclass(frozen=True)
class SimConfig:
    departures: int = 125_000
    warmup: float = 0.2
    replications: int = 10
    seed: int = 20240601
    level: float = 0.95
    max_queue: int = 400           # last bin of the tabulated distributions
    drift_bound: int = 1_000_000
    collect_departure: bool = True
    collect_arbitrary: bool = True
    collect_prearrival: bool = True

    def __post_init__(self):
        if self.departures < 0:
            raise ValueError("departures must be >= 0")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not 0 <= self.warmup < 1:
            raise ValueError("warmup must be in [0, 1)")


@dataclass
class SimEstimate:
    """Across-replication means with standard errors.

    Distributions have shape ``(max_queue + 1, b + 1, m)``: column 0 is the
    idle server, column ``r`` a batch of size ``r`` (columns 1..a-1 unused).
    """

    config: SimConfig
    point: Dict[str, float]
    stderr: Dict[str, float]
    halfwidth: Dict[str, float]
    distributions: Dict[str, np.ndarray] = field(repr=False)
    distribution_stderr: Dict[str, np.ndarray] = field(repr=False)
    replicates: Dict[str, np.ndarray] = field(repr=False)

    def interval(self, name: str, level: float = None):
        """Confidence interval for a measure (t-distribution)."""
        if level is None:
            return self.point[name] - self.halfwidth[name], self.point[name] + self.halfwidth[name]
        hw = _halfwidth(self.replicates[name], level)
        return self.point[name] - hw, self.point[name] + hw

    def z_score(self, name: str, value: float) -> float:
        se = self.stderr[name]
        return (value - self.point[name]) / se if se > 0 else float("nan")


class _Stream:
    """Block-buffered uniforms and unit exponentials."""

    def __init__(self, rng: np.random.Generator, block: int = 1 << 16):
        self.rng = rng
        self.block = block
        self._u = []
        self._e = []

    def u(self) -> float:
        if not self._u:
            self._u = self.rng.random(self.block).tolist()
        return self._u.pop()

    def e(self) -> float:
        if not self._e:
            self._e = self.rng.standard_exponential(self.block).tolist()
        return self._e.pop()


def _bmap_tables(model: BmapModel):
    """Per phase: total rate, cumulative event probabilities, and the
    (batch size, next phase) of each event."""
    m, K = model.m, model.K
    rates, cums, events = [], [], []
    for i in range(m):
        rate = -model.D[0, i, i]
        ev, p = [], []
        for k in range(K + 1):
            for j in range(m):
                if k == 0 and j == i:
                    continue
                w = model.D[k, i, j]
                if w > 0:
                    ev.append((k, j))
                    p.append(w / rate)
        c = np.cumsum(p)
        c[-1] = 1.0
        rates.append(rate)
        cums.append(c.tolist())
        events.append(ev)
    return rates, cums, events


def _service_sampler(law: ServiceLaw):
    if law.kind == "deterministic":
        d = law.duration
        return lambda s: d
    beta = law.beta
    T = law.T
    nu = len(beta)
    rate = (-np.diag(T)).tolist()
    start = np.cumsum(np.append(beta, 1.0 - beta.sum())).tolist()
    start[-1] = 1.0
    exit_ = -T.sum(axis=1)
    cum = []
    for i in range(nu):
        row = np.append(np.where(np.arange(nu) == i, 0.0, T[i]), exit_[i]) / rate[i]
        c = np.cumsum(row)
        c[-1] = 1.0
        cum.append(c.tolist())

    def sample(s: _Stream) -> float:
        i = bisect_right(start, s.u())
        t = 0.0
        while i < nu:
            t += s.e() / rate[i]
            i = bisect_right(cum[i], s.u())
        return t

    return sample


def _replicate(model: BmapModel, policy: ServicePolicy, cfg: SimConfig,
               rng: np.random.Generator) -> dict:
    a, b, m = policy.a, policy.b, model.m
    cap = cfg.max_queue
    s = _Stream(rng)
    rates, cums, events = _bmap_tables(model)
    sampler = {r: _service_sampler(policy.law(r)) for r in policy.sizes}

    n_total = cfg.departures
    n_warm = int(round(cfg.warmup * n_total))

    dep_counts = np.zeros((cap + 1, b + 1, m))
    pre_counts = np.zeros((cap + 1, b + 1, m))
    arb_time = np.zeros((cap + 1, b + 1, m))
    collect_dep, collect_pre, collect_arb = (cfg.collect_departure, cfg.collect_prearrival,
                                             cfg.collect_arbitrary)

    # stationary-ish start: phase drawn uniformly, empty system
    phase = int(s.u() * m) % m
    t = 0.0
    q = 0                   # waiting customers
    r = 0                   # customers in service (0: idle)
    t_end = np.inf
    t_bmap = s.e() / rates[phase]
    fifo = deque()          # [arrival time, count] of waiting batches
    in_service = []         # (arrival time, count) for the batch being served
    t_start_service = 0.0

    departures = 0
    stat_start = None
    area_q = area_sys = area_srv = busy_time = 0.0
    wait_sum = soj_sum = 0.0
    served = 0
    warned = False
    if n_warm == 0:
        stat_start = 0.0

    def start_service(now):
        nonlocal q, r, t_end, in_service, t_start_service
        r = q if q < b else b
        q -= r
        need = r
        in_service = []
        while need:
            head = fifo[0]
            take = head[1] if head[1] <= need else need
            in_service.append((head[0], take))
            head[1] -= take
            need -= take
            if head[1] == 0:
                fifo.popleft()
        t_start_service = now
        t_end = now + sampler[r](s)

    while departures < n_total:
        nxt = t_end if t_end < t_bmap else t_bmap
        if stat_start is not None:
            dt = nxt - t
            area_q += q * dt
            area_sys += (q + r) * dt
            if r:
                area_srv += r * dt
                busy_time += dt
            if collect_arb:
                arb_time[q if q < cap else cap, r, phase] += dt
        t = nxt
        if t_end <= t_bmap:
            # service completion
            departures += 1
            if stat_start is not None:
                for arr, cnt in in_service:
                    wait_sum += (t_start_service - arr) * cnt
                    soj_sum += (t - arr) * cnt
                    served += cnt
                if collect_dep:
                    dep_counts[q if q < cap else cap, r, phase] += 1
            if departures == n_warm and stat_start is None:
                stat_start = t
            r = 0
            t_end = np.inf
            if q >= a:
                start_service(t)
        else:
            k, phase = events[phase][bisect_right(cums[phase], s.u())]
            if k:
                # the recorded phase is the one entered with the arrival
                if stat_start is not None and collect_pre:
                    pre_counts[q if q < cap else cap, r, phase] += 1
                q += k
                fifo.append([t, k])
                if r == 0 and q >= a:
                    start_service(t)
                if q > cfg.drift_bound and not warned:
                    warnings.warn(f"queue length {q} exceeded {cfg.drift_bound}", UnstableDrift)
                    warned = True
            t_bmap = t + s.e() / rates[phase]

    span = t - stat_start if stat_start is not None else 0.0
    counted = n_total - n_warm
    with np.errstate(invalid="ignore", divide="ignore"):
        out = {
            "L": area_sys / span if span > 0 else np.nan,
            "L_q": area_q / span if span > 0 else np.nan,
            "L_s": area_srv / busy_time if busy_time > 0 else np.nan,
            "P_idle": 1.0 - busy_time / span if span > 0 else np.nan,
            "W": soj_sum / served if served else np.nan,
            "W_q": wait_sum / served if served else np.nan,
            "departure_rate": counted / span if span > 0 else np.nan,
            "departure": dep_counts / dep_counts.sum() if dep_counts.sum() else dep_counts,
            "arbitrary": arb_time / span if span > 0 else arb_time,
            "prearrival": pre_counts / pre_counts.sum() if pre_counts.sum() else pre_counts,
        }
    return out


def _halfwidth(x: np.ndarray, level: float) -> float:
    x = np.asarray(x, dtype=float)
    n = np.count_nonzero(np.isfinite(x))
    if n < 2:
        return float("nan")
    se = np.nanstd(x, ddof=1) / np.sqrt(n)
    return float(stats.t.ppf(0.5 + level / 2, n - 1) * se)


def simulate(model: BmapModel, policy: ServicePolicy, config: SimConfig = SimConfig()) -> SimEstimate:
    """Run ``config.replications`` independent replications and aggregate."""
    seqs = np.random.SeedSequence(config.seed).spawn(config.replications)
    reps = [_replicate(model, policy, config, np.random.default_rng(sq)) for sq in seqs]
    R = len(reps)
    replicates = {k: np.array([rep[k] for rep in reps]) for k in MEASURES}
    point, stderr, half = {}, {}, {}
    for k, x in replicates.items():
        finite = x[np.isfinite(x)]
        point[k] = float(finite.mean()) if finite.size else float("nan")
        stderr[k] = float(finite.std(ddof=1) / np.sqrt(finite.size)) if finite.size > 1 else float("nan")
        half[k] = _halfwidth(x, config.level)
    dists, dist_se = {}, {}
    for k in ("departure", "arbitrary", "prearrival"):
        arr = np.stack([rep[k] for rep in reps])
        dists[k] = arr.mean(axis=0)
        dist_se[k] = arr.std(axis=0, ddof=1) / np.sqrt(R) if R > 1 else np.zeros_like(arr[0])
    return SimEstimate(config, point, stderr, half, dists, dist_se, replicates)
