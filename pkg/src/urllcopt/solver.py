"""Per-link bandwidth assignment: diversity order, subchannel width, error threshold.

For a fixed diversity order the loss bound is minimized over the error
threshold, the smallest subchannel bandwidth meeting the target is found by
bisection, and the diversity order minimizing the reserved bandwidth wins.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernel
from .fbl_channel import DomainError, LinkParams, dl_prefactor, q_function, q_inverse, ul_prefactor


class Direction(enum.Enum):
    UL = "ul"
    DL = "dl"


@dataclass(frozen=True)
class LinkContext:
    """Delay and queue parameters a link is solved under.

    ``delay_frames`` is the uplink delay (two control frames included) or the
    downlink delay; ``service_rate`` is the downlink packets per frame and is
    ignored on the uplink.
    """

    direction: Direction
    delay_frames: int
    service_rate: int = 1

    def __post_init__(self) -> None:
        floor = 3 if self.direction is Direction.UL else 1
        if self.delay_frames < floor:
            raise DomainError(f"{self.direction.value} delay must be at least {floor} frames")
        if self.service_rate < 1:
            raise DomainError("service rate must be >= 1")

    def tx_duration(self, link: LinkParams) -> float:
        if self.direction is Direction.UL:
            return (self.delay_frames - 2) * link.frame_duration
        return self.delay_frames * link.frame_duration

    def prefactor(self, link: LinkParams) -> float:
        if self.direction is Direction.UL:
            return ul_prefactor(link)
        return dl_prefactor(link, self.delay_frames, self.service_rate)


@dataclass(frozen=True)
class SolverConfig:
    n_max: int = 10
    coherence_bandwidth: float = 0.5e6
    bandwidth_unit: float = 1e3
    bandwidth_tolerance: Optional[float] = None
    e_floor: float = 1e-12
    e_cap: float = 0.5 - 1e-6
    grid_points: int = 1024
    z_tolerance: float = 1e-7

    def __post_init__(self) -> None:
        if self.n_max < 1:
            raise DomainError("n_max must be >= 1")
        if not 0 < self.bandwidth_unit <= self.coherence_bandwidth:
            raise DomainError("bandwidth unit must lie in (0, W_c]")
        if not 0 < self.e_floor < self.e_cap < 0.5:
            raise DomainError("need 0 < e_floor < e_cap < 0.5")
        if self.grid_points < 3:
            raise DomainError("grid needs at least three points")
        if self.bandwidth_tolerance is not None and not 0 < self.bandwidth_tolerance < self.coherence_bandwidth:
            raise DomainError("bandwidth tolerance must lie in (0, W_c)")

    @property
    def delta_b(self) -> float:
        if self.bandwidth_tolerance is None:
            return self.bandwidth_unit / 16.0
        return self.bandwidth_tolerance

    @property
    def z_grid(self) -> np.ndarray:
        return _z_grid(self.e_floor, self.e_cap, self.grid_points)


@functools.lru_cache(maxsize=16)
def _z_grid(e_floor: float, e_cap: float, points: int) -> np.ndarray:
    es = np.logspace(math.log10(e_floor), math.log10(e_cap), points)
    es[0] = e_floor
    es[-1] = e_cap
    z = np.array([q_inverse(float(e)) for e in es], dtype=np.float64)
    z.setflags(write=False)
    return z


DEFAULT_CONFIG = SolverConfig()


@dataclass(frozen=True)
class LinkPlan:
    diversity: int
    subchannel_bandwidth: float
    error_threshold: float
    gain_threshold: float
    achieved_loss: float
    continuous_bandwidth: float = math.nan

    @property
    def total_bandwidth(self) -> float:
        return self.diversity * self.subchannel_bandwidth

    def to_dict(self) -> dict:
        return {
            "diversity": self.diversity,
            "subchannel_bandwidth_hz": self.subchannel_bandwidth,
            "error_threshold": self.error_threshold,
            "gain_threshold": self.gain_threshold,
            "achieved_loss": self.achieved_loss,
            "continuous_bandwidth_hz": self.continuous_bandwidth,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinkPlan":
        return cls(int(d["diversity"]), float(d["subchannel_bandwidth_hz"]), float(d["error_threshold"]),
                   float(d["gain_threshold"]), float(d["achieved_loss"]),
                   float(d.get("continuous_bandwidth_hz", math.nan)))


def _check(diversity: int, bandwidth: float) -> None:
    if int(diversity) != diversity or diversity < 1:
        raise DomainError("diversity must be a positive integer")
    if not bandwidth > 0:
        raise DomainError("bandwidth must be positive")


def loss_for(link: LinkParams, context: LinkContext, diversity: int, bandwidth: float,
             e_th: float) -> float:
    """Loss bound of one link for a given (N, B, e_th)."""
    _check(diversity, bandwidth)
    z = q_inverse(e_th)
    return kernel.loss_at(kernel.LAW_REPEAT, context.prefactor(link), int(diversity),
                          context.tx_duration(link), float(link.packet_bits), int(link.antennas),
                          float(bandwidth), z)


def gain_threshold_for(link: LinkParams, context: LinkContext, diversity: int, bandwidth: float,
                       z: float) -> float:
    return kernel.gain_threshold(context.prefactor(link) * diversity, context.tx_duration(link),
                                 float(link.packet_bits), float(bandwidth), float(z))


def optimize_e_threshold(link: LinkParams, context: LinkContext, diversity: int, bandwidth: float,
                         cfg: SolverConfig = DEFAULT_CONFIG) -> tuple[float, float]:
    """Error threshold minimizing :func:`loss_for`; returns ``(e_th, loss)``."""
    _check(diversity, bandwidth)
    z, f = kernel.optimize_z(kernel.LAW_REPEAT, context.prefactor(link), int(diversity),
                             context.tx_duration(link), float(link.packet_bits), int(link.antennas),
                             float(bandwidth), cfg.z_grid, cfg.z_tolerance)
    return q_function(z), f


def min_bandwidth_for_diversity(link: LinkParams, context: LinkContext, diversity: int, target: float,
                                cfg: SolverConfig = DEFAULT_CONFIG) -> Optional[tuple[float, float]]:
    """Smallest grid bandwidth meeting ``target`` at this diversity, or None.

    Returns ``(B, e_th)`` with ``B`` a multiple of the bandwidth unit.
    """
    if int(diversity) != diversity or diversity < 1:
        raise DomainError("diversity must be a positive integer")
    law = kernel.LAW_REPEAT
    k0 = context.prefactor(link)
    tau = context.tx_duration(link)
    bits = float(link.packet_bits)
    nt = int(link.antennas)
    bw, _, _ = kernel.min_bandwidth(law, k0, int(diversity), tau, bits, nt, float(target),
                                    cfg.coherence_bandwidth, cfg.delta_b, cfg.z_grid, cfg.z_tolerance)
    if math.isnan(bw):
        return None
    units, z, _ = kernel.snap_bandwidth(law, k0, int(diversity), tau, bits, nt, float(target),
                                        cfg.coherence_bandwidth, cfg.bandwidth_unit, bw, cfg.z_grid,
                                        cfg.z_tolerance)
    if units == 0:
        return None
    return units * cfg.bandwidth_unit, q_function(z)


def _plan(link: LinkParams, context: LinkContext, n: int, bw: float, cont: float, z: float,
          loss: float) -> Optional[LinkPlan]:
    if n == 0:
        return None
    return LinkPlan(int(n), float(bw), q_function(z), gain_threshold_for(link, context, n, bw, z),
                    float(loss), float(cont))


def solve_link(link: LinkParams, context: LinkContext, target: float,
               cfg: SolverConfig = DEFAULT_CONFIG) -> Optional[LinkPlan]:
    """Cheapest feasible plan over N = 1..n_max, or None when none exists."""
    if not 0 < target <= 1:
        raise DomainError("target loss must lie in (0, 1]")
    n, bw, cont, z, loss = kernel.solve_link(
        kernel.LAW_REPEAT, context.prefactor(link), context.tx_duration(link), float(link.packet_bits),
        int(link.antennas), float(target), cfg.coherence_bandwidth, cfg.bandwidth_unit, cfg.delta_b,
        cfg.n_max, True, cfg.z_grid, cfg.z_tolerance)
    return _plan(link, context, n, bw, cont, z, loss)


@dataclass
class BatchResult:
    """Uplink plans for many sensors that differ only in large-scale gain."""

    diversity: np.ndarray
    bandwidth: np.ndarray
    continuous_bandwidth: np.ndarray
    z: np.ndarray
    loss: np.ndarray

    @property
    def feasible(self) -> bool:
        return bool(np.all(self.diversity > 0))

    def total_bandwidth(self) -> np.ndarray:
        return self.diversity * self.bandwidth


def solve_uplinks(template: LinkParams, gains: np.ndarray, delay_frames: int, target: float,
                  cfg: SolverConfig = DEFAULT_CONFIG) -> BatchResult:
    """Solve the uplink of every sensor; ``gains`` are the large-scale gains."""
    gains = np.ascontiguousarray(gains, dtype=np.float64)
    if np.any(~(gains > 0)):
        raise DomainError("large-scale gains must be positive")
    ctx = LinkContext(Direction.UL, int(delay_frames))
    k0s = np.ascontiguousarray(template.snr_loss_factor * template.noise_density
                               / (gains * template.max_tx_power))
    m = len(gains)
    out = BatchResult(np.zeros(m, dtype=np.int64), np.zeros(m), np.zeros(m), np.zeros(m), np.zeros(m))
    kernel.solve_links(kernel.LAW_REPEAT, k0s, ctx.tx_duration(template), float(template.packet_bits),
                       int(template.antennas), float(target), cfg.coherence_bandwidth,
                       cfg.bandwidth_unit, cfg.delta_b, cfg.n_max, True, cfg.z_grid, cfg.z_tolerance,
                       out.diversity, out.bandwidth, out.continuous_bandwidth, out.z, out.loss)
    return out


def batch_plan(template: LinkParams, gains: np.ndarray, delay_frames: int, res: BatchResult,
               i: int) -> Optional[LinkPlan]:
    """Materialize one sensor's :class:`LinkPlan` from a batch result."""
    link = LinkParams(float(gains[i]), template.max_tx_power, template.noise_density,
                      template.snr_loss_factor, template.antennas, template.packet_bits,
                      template.frame_duration)
    ctx = LinkContext(Direction.UL, int(delay_frames))
    return _plan(link, ctx, int(res.diversity[i]), float(res.bandwidth[i]),
                 float(res.continuous_bandwidth[i]), float(res.z[i]), float(res.loss[i]))
