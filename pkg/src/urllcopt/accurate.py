"""Exact-integral bandwidth minimization and the one-bit feedback policy.

The solver works with a threshold bound on the loss. Here the decoding
error is averaged over the fading distribution instead, which measures how
conservative the bound is. A second policy lets the sensor learn one bit per
candidate subchannel (gain above threshold or not) and send on a single good
one at full power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from . import kernel
from .fbl_channel import (DomainError, LinkParams, exact_loss_probability, q_function,
                          q_inverse)
from .scenario import ScenarioConfig
from .solver import (DEFAULT_CONFIG, Direction, LinkContext, LinkPlan, SolverConfig,
                     min_bandwidth_for_diversity, solve_link)
from .units import path_gain


@dataclass(frozen=True)
class ComparisonRow:
    antennas: int
    distance: float
    bound_bandwidth: float
    exact_bandwidth: float

    @property
    def gap(self) -> float:
        return self.bound_bandwidth - self.exact_bandwidth


def min_bandwidth_exact(link: LinkParams, diversity: int, ul_frames: int, target: float,
                        cfg: SolverConfig = DEFAULT_CONFIG) -> Optional[float]:
    """Smallest grid bandwidth whose exact uplink loss meets ``target``, or None."""
    if ul_frames < 3:
        raise DomainError("uplink delay needs at least three frames")
    tau = (ul_frames - 2) * link.frame_duration
    b0 = cfg.bandwidth_unit
    top = math.floor(cfg.coherence_bandwidth / b0 + 1e-9)

    def ok(units: int) -> bool:
        return exact_loss_probability(link, units * b0, diversity, tau) <= target

    if not ok(top):
        return None
    lo, hi = 0, top  # ok(hi) holds; units <= lo are unverified or failing
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    # guard against a non-monotone stretch just below the bracket
    while hi > 1 and ok(hi - 1):
        hi -= 1
    return hi * b0


def min_bandwidth_bound(link: LinkParams, diversity: int, ul_frames: int, target: float,
                        cfg: SolverConfig = DEFAULT_CONFIG) -> Optional[float]:
    """Same question answered with the threshold bound."""
    res = min_bandwidth_for_diversity(link, LinkContext(Direction.UL, ul_frames), diversity, target, cfg)
    return None if res is None else res[0]


def exact_vs_bound(scenario: ScenarioConfig, antennas: Iterable[int], distances: Sequence[float],
                   ul_frames: int = 6, target: Optional[float] = None,
                   diversity: int = 1) -> list[ComparisonRow]:
    """Required single-subchannel bandwidth under both loss models on a grid."""
    target = scenario.qos.loss_max / 3.0 if target is None else target
    cfg = scenario.solver_config()
    rows = []
    for nt in antennas:
        sc = scenario.with_updates(antennas=int(nt))
        for d in distances:
            link = sc.ul_link(path_gain(float(d)))
            bound = min_bandwidth_bound(link, diversity, ul_frames, target, cfg)
            exact = min_bandwidth_exact(link, diversity, ul_frames, target, cfg)
            rows.append(ComparisonRow(int(nt), float(d), math.nan if bound is None else bound,
                                      math.nan if exact is None else exact))
    return rows


def one_bit_loss(link: LinkParams, candidates: int, bandwidth: float, ul_frames: int, e_th: float) -> float:
    """Loss when the packet goes out on one good candidate at full power.

    A candidate is good when its gain clears the full-power threshold for
    ``e_th``. The packet is lost when no candidate is good, or when the
    chosen good one still fails to decode.
    """
    z = q_inverse(e_th)
    return kernel.loss_at(kernel.LAW_ONE_BIT, link.noise_to_signal, int(candidates),
                          (ul_frames - 2) * link.frame_duration, float(link.packet_bits), int(link.antennas),
                          float(bandwidth), z)


def one_bit_csit_plan(link: LinkParams, ul_frames: int, target: float, cfg: SolverConfig = DEFAULT_CONFIG,
                      max_candidates: Optional[int] = None, reserve_all: bool = True) -> Optional[LinkPlan]:
    """Cheapest one-bit feedback plan, or None when no candidate count works.

    With ``reserve_all`` every candidate subchannel is reserved, so the cost
    is ``n*B``; otherwise only the subchannel actually used is charged.
    """
    n_max = cfg.n_max if max_candidates is None else int(max_candidates)
    if n_max < 1:
        raise DomainError("need at least one candidate subchannel")
    tau = (ul_frames - 2) * link.frame_duration
    k0 = link.noise_to_signal
    n, bw, cont, z, loss = kernel.solve_link(
        kernel.LAW_ONE_BIT, k0, tau, float(link.packet_bits), int(link.antennas), float(target),
        cfg.coherence_bandwidth, cfg.bandwidth_unit, cfg.delta_b, n_max, bool(reserve_all),
        cfg.z_grid, cfg.z_tolerance)
    if n == 0:
        return None
    g = kernel.gain_threshold(k0, tau, float(link.packet_bits), bw, z)
    return LinkPlan(int(n), float(bw), q_function(z), g, float(loss), float(cont))


@dataclass(frozen=True)
class CsitRow:
    antennas: int
    distance: float
    no_csit_subchannels: int
    no_csit_bandwidth: float
    one_bit_subchannels: int
    one_bit_bandwidth: float


def _reserved(plan: Optional[LinkPlan], reserve_all: bool = True) -> float:
    if plan is None:
        return math.nan
    return plan.total_bandwidth if reserve_all else plan.subchannel_bandwidth


def csit_comparison(scenario: ScenarioConfig, antennas: Iterable[int], distances: Sequence[float],
                    ul_frames: int = 6, target: Optional[float] = None,
                    reserve_all: bool = True) -> list[CsitRow]:
    """Subchannel count and reserved bandwidth of both policies on a grid."""
    target = scenario.qos.loss_max / 3.0 if target is None else target
    cfg = scenario.solver_config()
    rows = []
    for nt in antennas:
        sc = scenario.with_updates(antennas=int(nt))
        for d in distances:
            link = sc.ul_link(path_gain(float(d)))
            base = solve_link(link, LinkContext(Direction.UL, ul_frames), target, cfg)
            ob = one_bit_csit_plan(link, ul_frames, target, cfg, reserve_all=reserve_all)
            rows.append(CsitRow(int(nt), float(d), base.diversity if base else 0, _reserved(base),
                                ob.diversity if ob else 0, _reserved(ob, reserve_all)))
    return rows


def default_distances(scenario: ScenarioConfig, points: int = 64) -> np.ndarray:
    return np.linspace(scenario.min_distance, scenario.cell_radius, points)
