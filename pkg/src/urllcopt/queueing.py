"""Effective bandwidth of the shared downlink queue and active-sensor quantile.

All rates are in packets per frame and delays in frames, so the frame
duration cancels out of the effective-bandwidth expression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from .fbl_channel import DomainError


@dataclass(frozen=True)
class ArrivalSpec:
    """Independent Bernoulli arrivals, one probability per sensor and frame."""

    probabilities: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "probabilities", tuple(float(p) for p in self.probabilities))
        for p in self.probabilities:
            if not 0.0 <= p <= 1.0:
                raise DomainError(f"arrival probability {p} outside [0, 1]")

    @classmethod
    def uniform(cls, sensors: int, probability: float) -> "ArrivalSpec":
        return cls((probability,) * sensors)

    @property
    def sensors(self) -> int:
        return len(self.probabilities)

    @property
    def aggregate_rate(self) -> float:
        return math.fsum(self.probabilities)


@dataclass(frozen=True)
class QueueRequirement:
    delay_bound: int
    violation_probability: float

    def __post_init__(self) -> None:
        if int(self.delay_bound) != self.delay_bound or self.delay_bound < 1:
            raise DomainError("queueing delay bound must be a positive number of frames")
        if not 0.0 < self.violation_probability < 1.0:
            raise DomainError("violation probability must lie in (0, 1)")


def effective_bandwidth(rate: float, req: QueueRequirement) -> float:
    """Smallest constant service rate meeting the delay-violation requirement."""
    if not rate > 0:
        raise DomainError("arrival rate must be positive")
    if not 0.0 < req.violation_probability < 1.0:
        raise DomainError("violation probability must lie in (0, 1)")
    lg = -math.log(req.violation_probability)
    dq = req.delay_bound
    return lg / (dq * math.log1p(lg / (rate * dq)))


def service_rate_ceiling(eb: float) -> int:
    if not eb > 0:
        raise DomainError("effective bandwidth must be positive")
    return math.ceil(eb)


def multiplexing_gain_check(rate: float, ways: int, req: QueueRequirement) -> tuple[float, float, bool]:
    """Compare ``ways`` separate queues against one shared queue.

    Returns ``(lhs, rhs, lhs > rhs)`` where lhs is the summed service rate of
    the split queues and rhs that of the multiplexed queue.
    """
    if ways < 1:
        raise DomainError("number of queues must be >= 1")
    lhs = ways * effective_bandwidth(rate / ways, req)
    rhs = effective_bandwidth(rate, req)
    return lhs, rhs, lhs > rhs


def active_sensor_threshold(mean_active: float, overflow: float) -> int:
    """Smallest m with P(X > m) <= overflow for X ~ Poisson(mean_active)."""
    if mean_active < 0:
        raise DomainError("mean must be non-negative")
    if not 0.0 < overflow < 1.0:
        raise DomainError("overflow probability must lie in (0, 1)")
    if mean_active == 0:
        return 0
    top = int(mean_active + 40.0 * math.sqrt(mean_active) + 100.0)
    lmu = math.log(mean_active)
    tail = 0.0  # P(X > m) for the current m
    best = top
    for m in range(top, -1, -1):
        if tail > overflow:
            break
        best = m
        tail += math.exp(m * lmu - mean_active - math.lgamma(m + 1.0))
    return best

