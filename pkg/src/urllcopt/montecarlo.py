"""Monte Carlo checks of optimized plans.

Randomness comes from counter-based Philox generators keyed by
``(seed, stream, index)``, so every chunk, sensor or drop draws the same
numbers no matter how the work is split up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special, stats

from . import kernel
from .fbl_channel import LN2, DomainError, LinkParams
from .optimizer import ConfigReport, DelaySplit
from .queueing import ArrivalSpec
from .scenario import (STREAM_AVAILABILITY, STREAM_LINK, STREAM_QUEUE, STREAM_TRACE, ScenarioConfig,
                       SimConfig)
from .solver import Direction, LinkContext, LinkPlan, SolverConfig, solve_link
from .units import path_loss_db_array

__all__ = [
    "SimConfig", "SimReport", "Estimate", "rng_for", "clopper_pearson", "simulate_queue",
    "simulate_link_loss", "simulate_bandwidth_trace", "simulate_availability", "min_feasible_gain_db",
]

CHUNK_FRAMES = 1 << 16
SENSOR_GROUP = 256
DROP_CHUNK = 256


def rng_for(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=tuple(key))))


def clopper_pearson(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Exact binomial confidence interval for ``k`` successes in ``n`` trials."""
    if n <= 0:
        return 0.0, 1.0
    a = 1.0 - level
    lo = 0.0 if k == 0 else float(stats.beta.ppf(a / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(1 - a / 2, k + 1, n - k))
    return lo, hi


@dataclass(frozen=True)
class Estimate:
    """Binomial estimate with its 95% Clopper-Pearson interval."""

    events: int
    trials: int
    lower: float
    upper: float

    @classmethod
    def of(cls, events: int, trials: int) -> "Estimate":
        lo, hi = clopper_pearson(int(events), int(trials))
        return cls(int(events), int(trials), lo, hi)

    @property
    def rate(self) -> float:
        return self.events / self.trials if self.trials else 0.0

    @property
    def half_width(self) -> float:
        return 0.5 * (self.upper - self.lower)


@dataclass
class QueueResult:
    violation: Estimate
    max_backlog: int
    frames: int


@dataclass
class TraceResult:
    max_hz: float
    mean_hz: float
    dl_hz: float
    frames: int
    frames_over_bound: int
    bound_hz: float

    @property
    def gap(self) -> float:
        """Relative margin of the analytic bound over the simulated maximum."""
        return (self.bound_hz - self.max_hz) / self.bound_hz


@dataclass
class AvailabilityResult:
    outage: Estimate
    sensor_outage: Estimate
    threshold_db: float
    drops: int

    @property
    def availability(self) -> float:
        return 1.0 - self.outage.rate


@dataclass
class SimReport:
    """Aggregated simulation outcome of one optimized configuration."""

    seed: int
    frames: int
    relaxed_eps: Optional[float]
    queue_violation: Optional[Estimate] = None
    queue_target: float = math.nan
    ul_loss: Optional[Estimate] = None
    ul_target: float = math.nan
    dl_loss: Optional[Estimate] = None
    dl_target: float = math.nan
    max_frame_bandwidth: float = math.nan
    mean_frame_bandwidth: float = math.nan
    bound_bandwidth: float = math.nan
    availability: Optional[Estimate] = None
    notes: list[str] = field(default_factory=list)


def _bernoulli_counts(arrivals: ArrivalSpec, frames: int, seed: int) -> np.ndarray:
    """Per-frame number of arrivals of the superposed Bernoulli sources."""
    groups: dict[float, int] = {}
    for p in arrivals.probabilities:
        groups[p] = groups.get(p, 0) + 1
    out = np.empty(frames, dtype=np.int64)
    for c, start in enumerate(range(0, frames, CHUNK_FRAMES)):
        n = min(CHUNK_FRAMES, frames - start)
        rng = rng_for(seed, STREAM_QUEUE, c)
        acc = np.zeros(n, dtype=np.int64)
        for p in sorted(groups):
            if p > 0:
                acc += rng.binomial(groups[p], p, size=n)
        out[start:start + n] = acc
    return out


def simulate_queue(arrivals: ArrivalSpec, service_rate: int, delay_bound: int, cfg: SimConfig) -> QueueResult:
    """Shared FIFO queue served at a constant rate; estimates P(delay > bound)."""
    if service_rate < 1 or delay_bound < 1:
        raise DomainError("service rate and delay bound must be >= 1")
    counts = _bernoulli_counts(arrivals, cfg.frames, cfg.seed)
    viol, total, backlog = kernel.fifo_queue(counts, int(service_rate), int(delay_bound))
    return QueueResult(Estimate.of(viol, total), int(backlog), cfg.frames)


def simulate_link_loss(plan: LinkPlan, link: LinkParams, context: LinkContext, trials: int, seed: int,
                       chunk: int = 1 << 16) -> Estimate:
    """Packet loss of a plan with decoding errors drawn from the fading channel.

    Each trial draws an Erlang gain per subchannel, evaluates the
    finite-blocklength error at that gain and samples the decoding outcome;
    the packet is lost when every copy fails.
    """
    n = plan.diversity
    bw = plan.subchannel_bandwidth
    tau = context.tx_duration(link)
    blk = tau * bw
    sq = math.sqrt(blk)
    shift = link.packet_bits * LN2 / blk
    rho = 1.0 / (context.prefactor(link) * bw * n)
    lost = 0
    for c, start in enumerate(range(0, trials, chunk)):
        m = min(chunk, trials - start)
        rng = rng_for(seed, STREAM_LINK, c)
        g = rng.gamma(link.antennas, 1.0, size=(m, n))
        err = 0.5 * special.erfc(sq * (np.log1p(rho * g) - shift) / math.sqrt(2.0))
        fail = rng.random((m, n)) < err
        lost += int(np.count_nonzero(fail.all(axis=1)))
    return Estimate.of(lost, trials)


def _arrival_frames(rng: np.random.Generator, p: float, frames: int) -> np.ndarray:
    """Frames at which one Bernoulli(p) source produces a packet."""
    if p <= 0:
        return np.empty(0, dtype=np.int64)
    if p >= 1:
        return np.arange(frames, dtype=np.int64)
    est = int(frames * p + 6 * math.sqrt(frames * p) + 16)
    t = np.cumsum(rng.geometric(p, size=est)) - 1
    while t[-1] < frames:
        more = np.cumsum(rng.geometric(p, size=est)) + t[-1]
        t = np.concatenate([t, more])
    return t[t < frames]


def simulate_bandwidth_trace(scenario: ScenarioConfig, report: ConfigReport, cfg: SimConfig) -> TraceResult:
    """Frame-by-frame reserved bandwidth under random sensor activity.

    A packet arriving in frame t keeps its sensor's subchannels busy for the
    ``D_u - 2`` data frames that follow; overlapping packets of one sensor
    each hold their own reservation. The downlink share is constant.
    """
    if not report.feasible or report.delay is None or report.dl_plan is None:
        raise DomainError("bandwidth trace needs a feasible report")
    frames = cfg.frames
    hold = report.delay.ul - 2
    p = scenario.arrival_probability
    weights = np.array([pl.total_bandwidth for pl in report.ul_plans], dtype=np.float64)
    starts = np.zeros(frames, dtype=np.float64)
    for g0 in range(0, len(weights), SENSOR_GROUP):
        idx, wts = [], []
        for m in range(g0, min(g0 + SENSOR_GROUP, len(weights))):
            t = _arrival_frames(rng_for(cfg.seed, STREAM_TRACE, m), p, frames)
            idx.append(t)
            wts.append(np.full(len(t), weights[m]))
        if idx:
            starts += np.bincount(np.concatenate(idx), weights=np.concatenate(wts), minlength=frames)
    # active reservation = sum over the last `hold` frames of new arrivals
    csum = np.concatenate([[0.0], np.cumsum(starts)])
    lo = np.maximum(np.arange(1, frames + 1) - hold, 0)
    ul = csum[1:] - csum[lo]
    ul[ul < 0] = 0.0  # rounding in the running sum
    dl = report.dl_term
    total = ul + dl
    bound = report.total_bandwidth_bound
    over = int(np.count_nonzero(total > bound * (1 + 1e-12)))
    return TraceResult(float(total.max()), float(total.mean()), dl, frames, over, bound)


def min_feasible_gain_db(scenario: ScenarioConfig, ul_frames: int, eps_u: float,
                         cfg: Optional[SolverConfig] = None, tol_db: float = 1e-6) -> float:
    """Smallest large-scale gain (dB) at which an uplink plan exists.

    Feasibility only improves with the gain, so one bisection serves every
    sensor of every drop.
    """
    cfg = cfg or scenario.solver_config()
    ctx = LinkContext(Direction.UL, ul_frames)

    def ok(db: float) -> bool:
        return solve_link(scenario.ul_link(10.0 ** (db / 10.0)), ctx, eps_u, cfg) is not None

    lo, hi = -250.0, -20.0
    if not ok(hi):
        return math.inf
    if ok(lo):
        return -math.inf
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def simulate_availability(scenario: ScenarioConfig, delay: DelaySplit, cfg: SimConfig,
                          eps_u: Optional[float] = None) -> AvailabilityResult:
    """Fraction of random drops in which every sensor admits an uplink plan.

    Each drop redraws all sensor distances and log-normal shadowing. A drop
    is an outage when any sensor's gain falls below the feasibility
    threshold; the per-sensor outage rate is reported alongside.
    """
    eps_u = scenario.qos.loss_max / 3.0 if eps_u is None else eps_u
    thr = min_feasible_gain_db(scenario, delay.ul, eps_u)
    m = scenario.sensors
    bad_drops = 0
    bad_sensors = 0
    for c, start in enumerate(range(0, cfg.drops, DROP_CHUNK)):
        n = min(DROP_CHUNK, cfg.drops - start)
        rng = rng_for(cfg.seed, STREAM_AVAILABILITY, c)
        d = rng.uniform(scenario.min_distance, scenario.cell_radius, size=(n, m))
        s = rng.normal(0.0, cfg.shadowing_db, size=(n, m)) if cfg.shadowing_db > 0 else 0.0
        gain_db = -path_loss_db_array(d) + s
        below = gain_db < thr
        bad_sensors += int(np.count_nonzero(below))
        bad_drops += int(np.count_nonzero(below.any(axis=1)))
    return AvailabilityResult(Estimate.of(bad_drops, cfg.drops), Estimate.of(bad_sensors, cfg.drops * m),
                              thr, cfg.drops)
