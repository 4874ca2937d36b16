"""Delay-budget and loss-budget optimization on top of the per-link solver.

The inner step assigns bandwidth to every uplink and to the downlink for a
fixed delay split; the outer step searches the integer delay splits. The
objective is the high-probability upper bound of the total bandwidth:
the mean per-sensor uplink reservation scaled by the active-sensor quantile,
plus the downlink reservation times the inverse reuse factor.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from . import kernel
from .fbl_channel import DomainError, q_function
from .queueing import QueueRequirement, active_sensor_threshold, effective_bandwidth, service_rate_ceiling
from .scenario import ScenarioConfig
from .solver import BatchResult, Direction, LinkContext, LinkPlan, solve_link, solve_uplinks

MIN_UL_FRAMES = 3
MIN_BUDGET_FRAMES = 5  # 3 uplink + 1 queueing + 1 downlink

BINDING_DELAY = "E2E delay"
BINDING_UL = "UL reliability"
BINDING_DL = "DL reliability"


@dataclass(frozen=True, order=True)
class DelaySplit:
    """Uplink, downlink and queueing delays in frames."""

    ul: int
    dl: int
    queue: int

    def __post_init__(self) -> None:
        if self.ul < MIN_UL_FRAMES:
            raise DomainError("uplink delay needs at least three frames")
        if self.dl < 1 or self.queue < 1:
            raise DomainError("downlink and queueing delays need at least one frame")

    @property
    def frames(self) -> int:
        return self.ul + self.dl + self.queue

    def to_dict(self) -> dict:
        return {"ul_frames": self.ul, "dl_frames": self.dl, "queue_frames": self.queue}


@dataclass(frozen=True)
class EpsilonSplit:
    ul: float
    dl: float
    queue: float

    def __post_init__(self) -> None:
        if not (self.ul > 0 and self.dl > 0 and self.queue > 0):
            raise DomainError("every loss component must be positive")
        if not self.queue < 1:
            raise DomainError("queueing violation probability must be < 1")

    @classmethod
    def equal(cls, loss_max: float) -> "EpsilonSplit":
        e = loss_max / 3.0
        return cls(e, e, e)

    @property
    def total(self) -> float:
        return math.fsum((self.ul, self.dl, self.queue))

    def to_dict(self) -> dict:
        return {"eps_u": self.ul, "eps_d": self.dl, "eps_q": self.queue}


def _nan_to_none(x: float) -> Optional[float]:
    return None if math.isnan(x) else x


@dataclass
class ConfigReport:
    feasible: bool
    delay: Optional[DelaySplit]
    eps: Optional[EpsilonSplit]
    binding_constraint: Optional[str] = None
    effective_bandwidth: float = math.nan
    service_rate: int = 0
    active_threshold: int = 0
    sensors: int = 0
    reuse_inverse: float = 3.0
    ul_plans: list[LinkPlan] = field(default_factory=list)
    dl_plan: Optional[LinkPlan] = None
    ul_term: float = math.nan
    dl_term: float = math.nan
    total_bandwidth_bound: float = math.inf
    scenario_hash: str = ""
    seed: int = 0

    def recompute_total(self) -> float:
        """Reassemble the objective from the stored parts."""
        return assemble_total(self.active_threshold, self.sensors, self.ul_plans, self.reuse_inverse,
                              self.delay.dl if self.delay else 0, self.service_rate, self.dl_plan)[2]

    @property
    def ul_max_bandwidth(self) -> float:
        """Bandwidth if every sensor were active at once."""
        return math.fsum(p.total_bandwidth for p in self.ul_plans)

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "feasible": self.feasible,
            "binding_constraint": self.binding_constraint,
            "scenario_hash": self.scenario_hash,
            "seed": self.seed,
            "delay": self.delay.to_dict() if self.delay else None,
            "eps": self.eps.to_dict() if self.eps else None,
            "effective_bandwidth_pkt_per_frame": _nan_to_none(self.effective_bandwidth),
            "service_rate_pkt_per_frame": self.service_rate,
            "active_threshold": self.active_threshold,
            "sensors": self.sensors,
            "reuse_inverse": self.reuse_inverse,
            "ul_term_hz": _nan_to_none(self.ul_term),
            "dl_term_hz": _nan_to_none(self.dl_term),
            "total_bandwidth_bound_hz": None if math.isinf(self.total_bandwidth_bound) else self.total_bandwidth_bound,
            "dl_plan": self.dl_plan.to_dict() if self.dl_plan else None,
            "ul_plans": {
                "diversity": [p.diversity for p in self.ul_plans],
                "subchannel_bandwidth_hz": [p.subchannel_bandwidth for p in self.ul_plans],
                "error_threshold": [p.error_threshold for p in self.ul_plans],
                "gain_threshold": [p.gain_threshold for p in self.ul_plans],
                "achieved_loss": [p.achieved_loss for p in self.ul_plans],
                "continuous_bandwidth_hz": [p.continuous_bandwidth for p in self.ul_plans],
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConfigReport":
        delay = d.get("delay")
        eps = d.get("eps")
        ul = d["ul_plans"]
        plans = [
            LinkPlan(int(n), float(b), float(e), float(g), float(f), float(c))
            for n, b, e, g, f, c in zip(ul["diversity"], ul["subchannel_bandwidth_hz"], ul["error_threshold"],
                                        ul["gain_threshold"], ul["achieved_loss"], ul["continuous_bandwidth_hz"])
        ]
        total = d.get("total_bandwidth_bound_hz")
        eb = d.get("effective_bandwidth_pkt_per_frame")
        return cls(
            feasible=bool(d["feasible"]),
            delay=DelaySplit(delay["ul_frames"], delay["dl_frames"], delay["queue_frames"]) if delay else None,
            eps=EpsilonSplit(eps["eps_u"], eps["eps_d"], eps["eps_q"]) if eps else None,
            binding_constraint=d.get("binding_constraint"),
            effective_bandwidth=math.nan if eb is None else float(eb),
            service_rate=int(d["service_rate_pkt_per_frame"]),
            active_threshold=int(d["active_threshold"]),
            sensors=int(d["sensors"]),
            reuse_inverse=float(d["reuse_inverse"]),
            ul_plans=plans,
            dl_plan=LinkPlan.from_dict(d["dl_plan"]) if d.get("dl_plan") else None,
            ul_term=math.nan if d.get("ul_term_hz") is None else float(d["ul_term_hz"]),
            dl_term=math.nan if d.get("dl_term_hz") is None else float(d["dl_term_hz"]),
            total_bandwidth_bound=math.inf if total is None else float(total),
            scenario_hash=d.get("scenario_hash", ""),
            seed=int(d.get("seed", 0)),
        )


def assemble_total(active_threshold: int, sensors: int, ul_plans: Iterable[LinkPlan], reuse_inverse: float,
                   dl_frames: int, service_rate: int, dl_plan: Optional[LinkPlan]) -> tuple[float, float, float]:
    """Return ``(ul_term, dl_term, total)`` of the bandwidth bound."""
    if sensors > 0:
        ul_sum = math.fsum(p.total_bandwidth for p in ul_plans)
        ul_term = active_threshold / sensors * ul_sum
    else:
        ul_term = 0.0
    if dl_plan is None:
        return ul_term, math.inf, math.inf
    dl_term = reuse_inverse * dl_frames * service_rate * dl_plan.total_bandwidth
    return ul_term, dl_term, math.fsum((ul_term, dl_term))


class Planner:
    """Solves one scenario under many delay and loss splits, caching link solves.

    Sensor positions are drawn once from ``seed``. Uplink batches are cached
    by (uplink frames, uplink target) and downlink plans by (downlink frames,
    service rate, downlink target).
    """

    def __init__(self, scenario: ScenarioConfig, seed: Optional[int] = None,
                 gains: Optional[np.ndarray] = None) -> None:
        self.scenario = scenario
        self.seed = scenario.sim.seed if seed is None else int(seed)
        self.cfg = scenario.solver_config()
        self.ul_template = scenario.ul_link(1.0)
        self.dl_link = scenario.dl_link()
        self.gains = scenario.sensor_gains(self.seed) if gains is None else np.asarray(gains, dtype=np.float64)
        if len(self.gains) != scenario.sensors:
            raise DomainError("one gain per sensor required")
        self._ul: dict[tuple[int, float], BatchResult] = {}
        self._dl: dict[tuple[int, int, float], Optional[LinkPlan]] = {}

    # queue side ---------------------------------------------------------
    def effective_bandwidth(self, queue_frames: int, eps_q: float) -> float:
        rate = self.scenario.aggregate_rate
        if rate <= 0:
            return 0.0
        return effective_bandwidth(rate, QueueRequirement(queue_frames, eps_q))

    def service_rate(self, queue_frames: int, eps_q: float) -> int:
        eb = self.effective_bandwidth(queue_frames, eps_q)
        return service_rate_ceiling(eb) if eb > 0 else 1

    def active_threshold(self, ul_frames: int) -> int:
        return active_sensor_threshold(self.scenario.aggregate_rate * (ul_frames - 2), self.scenario.qos.overflow)

    # link side ----------------------------------------------------------
    def uplinks(self, ul_frames: int, eps_u: float) -> BatchResult:
        key = (int(ul_frames), float(eps_u))
        res = self._ul.get(key)
        if res is None:
            res = solve_uplinks(self.ul_template, self.gains, ul_frames, eps_u, self.cfg)
            self._ul[key] = res
        return res

    def downlink(self, dl_frames: int, service_rate: int, eps_d: float) -> Optional[LinkPlan]:
        key = (int(dl_frames), int(service_rate), float(eps_d))
        if key not in self._dl:
            ctx = LinkContext(Direction.DL, int(dl_frames), int(service_rate))
            self._dl[key] = solve_link(self.dl_link, ctx, eps_d, self.cfg)
        return self._dl[key]

    def ul_plans(self, ul_frames: int, res: BatchResult) -> list[LinkPlan]:
        tau = (ul_frames - 2) * self.scenario.frame_duration
        bits = float(self.scenario.packet_bits)
        plans = []
        for i in range(len(self.gains)):
            n = int(res.diversity[i])
            bw = float(res.bandwidth[i])
            z = float(res.z[i])
            t = self.ul_template
            k0 = t.snr_loss_factor * t.noise_density / (float(self.gains[i]) * t.max_tx_power)
            g = kernel.gain_threshold(k0 * n, tau, bits, bw, z)
            plans.append(LinkPlan(n, bw, q_function(z), g, float(res.loss[i]), float(res.continuous_bandwidth[i])))
        return plans

    def ul_sum(self, res: BatchResult) -> float:
        return math.fsum((res.diversity * res.bandwidth).tolist())

    # objective ----------------------------------------------------------
    def quick_total(self, delay: DelaySplit, eps: EpsilonSplit) -> float:
        """Objective value only; ``inf`` when some link is infeasible."""
        m = self.scenario.sensors
        if m > 0:
            res = self.uplinks(delay.ul, eps.ul)
            if not res.feasible:
                return math.inf
            ul_term = self.active_threshold(delay.ul) / m * self.ul_sum(res)
        else:
            ul_term = 0.0
        e = self.service_rate(delay.queue, eps.queue)
        dl = self.downlink(delay.dl, e, eps.dl)
        if dl is None:
            return math.inf
        dl_term = self.scenario.reuse_inverse * delay.dl * e * dl.total_bandwidth
        return math.fsum((ul_term, dl_term))

    def report(self, delay: DelaySplit, eps: EpsilonSplit) -> ConfigReport:
        sc = self.scenario
        rep = ConfigReport(feasible=False, delay=delay, eps=eps, sensors=sc.sensors,
                           reuse_inverse=sc.reuse_inverse, scenario_hash=sc.scenario_hash(), seed=self.seed)
        rep.effective_bandwidth = self.effective_bandwidth(delay.queue, eps.queue)
        rep.service_rate = self.service_rate(delay.queue, eps.queue)
        rep.active_threshold = self.active_threshold(delay.ul)
        if sc.sensors > 0:
            res = self.uplinks(delay.ul, eps.ul)
            if not res.feasible:
                rep.binding_constraint = BINDING_UL
                return rep
            rep.ul_plans = self.ul_plans(delay.ul, res)
        rep.dl_plan = self.downlink(delay.dl, rep.service_rate, eps.dl)
        if rep.dl_plan is None:
            rep.binding_constraint = BINDING_DL
            return rep
        rep.ul_term, rep.dl_term, rep.total_bandwidth_bound = assemble_total(
            rep.active_threshold, sc.sensors, rep.ul_plans, sc.reuse_inverse, delay.dl, rep.service_rate, rep.dl_plan)
        rep.feasible = True
        return rep


def _infeasible(scenario: ScenarioConfig, eps: Optional[EpsilonSplit], reason: str, seed: int) -> ConfigReport:
    return ConfigReport(feasible=False, delay=None, eps=eps, binding_constraint=reason, sensors=scenario.sensors,
                        reuse_inverse=scenario.reuse_inverse, scenario_hash=scenario.scenario_hash(), seed=seed)


def total_bandwidth_bound(scenario: ScenarioConfig, delay: DelaySplit, eps: EpsilonSplit,
                          planner: Optional[Planner] = None) -> tuple[float, ConfigReport]:
    """Objective value and full report for one delay and loss split."""
    if delay.frames > scenario.budget_frames:
        raise DomainError("delay split exceeds the end-to-end budget")
    if eps.total > scenario.qos.loss_max * (1 + 1e-12):
        raise DomainError("loss split exceeds loss_max")
    planner = planner or Planner(scenario)
    rep = planner.report(delay, eps)
    return rep.total_bandwidth_bound, rep


def filled_splits(budget: int, dl_frames: Optional[int] = None) -> list[DelaySplit]:
    """Splits whose queueing delay takes all frames left over, in scan order."""
    out = []
    for du in range(MIN_UL_FRAMES, budget - 1):
        dls = [dl_frames] if dl_frames is not None else range(1, budget - du)
        for dd in dls:
            dq = budget - du - dd
            if dq >= 1:
                out.append(DelaySplit(du, dd, dq))
    return out


def all_splits(budget: int) -> list[DelaySplit]:
    """Every split using at most ``budget`` frames."""
    out = []
    for du in range(MIN_UL_FRAMES, budget - 1):
        for dd in range(1, budget - du):
            for dq in range(1, budget - du - dd + 1):
                out.append(DelaySplit(du, dd, dq))
    return out


def _argmin(planner: Planner, splits: Iterable[DelaySplit], eps: EpsilonSplit) -> Optional[DelaySplit]:
    best = None
    best_val = math.inf
    for s in splits:
        v = planner.quick_total(s, eps)
        # strict comparison keeps the earliest split (smaller D_u, then D_d) on ties
        if v < best_val:
            best, best_val = s, v
    return best


def dl_width_inactive(planner: Planner, eps: EpsilonSplit) -> bool:
    """True when the coherence bandwidth does not shape any one-frame downlink plan.

    A downlink plan over ``D`` frames behaves like a one-frame plan with
    ``D`` times the subchannel width, so the one-frame plan is re-solved with
    the width cap raised to cover every admissible ``D``. Identical plans
    mean the downlink reservation is the same for every downlink delay.
    """
    sc = planner.scenario
    budget = sc.budget_frames
    wide = dataclasses.replace(planner.cfg, coherence_bandwidth=planner.cfg.coherence_bandwidth
                               * (budget - MIN_UL_FRAMES - 1))
    for s in filled_splits(budget, dl_frames=1):
        e = planner.service_rate(s.queue, eps.queue)
        plan = planner.downlink(1, e, eps.dl)
        if plan is None:
            return False
        ref = solve_link(planner.dl_link, LinkContext(Direction.DL, 1, e), eps.dl, wide)
        if ref is None or (ref.diversity, ref.subchannel_bandwidth) != (plan.diversity, plan.subchannel_bandwidth):
            return False
    return True


def optimize_delays(scenario: ScenarioConfig, eps: Optional[EpsilonSplit] = None,
                    planner: Optional[Planner] = None) -> ConfigReport:
    """Best delay split for a fixed loss split.

    When the coherence bandwidth does not constrain the downlink, its
    reservation does not depend on the downlink delay, so the downlink gets
    one frame and only the uplink delay is searched. Otherwise every
    (uplink, downlink) pair is tried. The queue always receives the frames
    left over, since a longer queueing delay never raises the service rate.
    """
    planner = planner or Planner(scenario)
    eps = eps or EpsilonSplit.equal(scenario.qos.loss_max)
    budget = scenario.budget_frames
    if budget < MIN_BUDGET_FRAMES:
        return _infeasible(scenario, eps, BINDING_DELAY, planner.seed)
    if dl_width_inactive(planner, eps):
        candidates = filled_splits(budget, dl_frames=1)
    else:
        candidates = filled_splits(budget)
    best = _argmin(planner, candidates, eps)
    if best is None:
        # report why the shortest-uplink candidate fails
        probe = planner.report(candidates[0], eps)
        return _infeasible(scenario, eps, probe.binding_constraint or BINDING_UL, planner.seed)
    return planner.report(best, eps)


def epsilon_grid(loss_max: float, step: float) -> list[EpsilonSplit]:
    """Splits on the simplex at resolution ``step*loss_max``; the equal split is appended."""
    k = round(1.0 / step)
    if k < 1 or abs(k * step - 1.0) > 1e-9:
        raise DomainError("grid step must divide 1")
    out = []
    for ku in range(1, k - 1):
        for kd in range(1, k - ku):
            kq = k - ku - kd
            out.append(EpsilonSplit(ku * loss_max / k, kd * loss_max / k, kq * loss_max / k))
    eq = EpsilonSplit.equal(loss_max)
    if eq not in out:
        out.append(eq)
    return out


def optimize_epsilon_split(scenario: ScenarioConfig, delay: DelaySplit, grid_step: float = 0.05,
                           planner: Optional[Planner] = None) -> tuple[Optional[EpsilonSplit], float]:
    """Scan loss splits at a fixed delay split; returns the best split and its bound."""
    if not 0 < grid_step <= 1:
        raise DomainError("grid step must lie in (0, 1]")
    planner = planner or Planner(scenario)
    best, best_val = None, math.inf
    for eps in epsilon_grid(scenario.qos.loss_max, grid_step):
        v = planner.quick_total(delay, eps)
        if v < best_val:
            best, best_val = eps, v
    return best, best_val


@dataclass(frozen=True)
class CurveRow:
    ul_frames: int
    dl_frames: int
    queue_frames: int
    ul_hz: float
    dl_hz: float
    total_hz: float
    feasible: bool


def bandwidth_vs_delay_curve(scenario: ScenarioConfig, eps: Optional[EpsilonSplit] = None,
                             planner: Optional[Planner] = None) -> list[CurveRow]:
    """Bound components against the uplink delay, downlink delay chosen per row."""
    planner = planner or Planner(scenario)
    eps = eps or EpsilonSplit.equal(scenario.qos.loss_max)
    budget = scenario.budget_frames
    rows = []
    for du in range(MIN_UL_FRAMES, budget - 1):
        splits = filled_splits(budget) if budget >= MIN_BUDGET_FRAMES else []
        splits = [s for s in splits if s.ul == du]
        best = _argmin(planner, splits, eps)
        if best is None:
            s = splits[0]
            rows.append(CurveRow(s.ul, s.dl, s.queue, math.nan, math.nan, math.nan, False))
            continue
        rep = planner.report(best, eps)
        rows.append(CurveRow(best.ul, best.dl, best.queue, rep.ul_term, rep.dl_term,
                             rep.total_bandwidth_bound, True))
    return rows
