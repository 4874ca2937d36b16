from __future__ import annotations

import json
import math

import pytest

from urllcopt.fbl_channel import DomainError
from urllcopt.optimizer import (BINDING_DELAY, BINDING_DL, BINDING_UL, ConfigReport, DelaySplit, EpsilonSplit,
                                Planner, all_splits, bandwidth_vs_delay_curve, epsilon_grid, filled_splits,
                                optimize_delays, optimize_epsilon_split, total_bandwidth_bound)
from urllcopt.scenario import QosBudget, ScenarioConfig, SimConfig

SIX_FRAMES = QosBudget(max_delay=0.7e-3)


def shrunken(antennas=16, radius=250.0, sensors=20, **kw):
    return ScenarioConfig(antennas=antennas, cell_radius=radius, sensors=sensors, qos=SIX_FRAMES, **kw)


def lattice_optimum(sc: ScenarioConfig, eps: EpsilonSplit) -> float:
    planner = Planner(sc)
    return min(planner.quick_total(s, eps) for s in all_splits(sc.budget_frames))


def test_split_enumeration():
    assert [(s.ul, s.dl, s.queue) for s in filled_splits(6)] == [(3, 1, 2), (3, 2, 1), (4, 1, 1)]
    assert [(s.ul, s.dl, s.queue) for s in all_splits(6)] == [(3, 1, 1), (3, 1, 2), (3, 2, 1), (4, 1, 1)]
    assert all(s.frames <= 6 for s in all_splits(6))
    assert all(s.frames == 10 for s in filled_splits(10))


def test_epsilon_grid_shape():
    grid = epsilon_grid(1e-7, 0.05)
    assert len(grid) == 171 + 1
    assert grid[-1] == EpsilonSplit.equal(1e-7)
    for e in grid[:-1]:
        assert math.isclose(e.total, 1e-7, rel_tol=1e-12)
        assert min(e.ul, e.dl, e.queue) >= 0.05e-7 * (1 - 1e-12)
    with pytest.raises(DomainError):
        epsilon_grid(1e-7, 0.3)


def test_split_validation():
    with pytest.raises(DomainError):
        DelaySplit(2, 1, 1)
    with pytest.raises(DomainError):
        DelaySplit(3, 0, 1)
    with pytest.raises(DomainError):
        EpsilonSplit(1e-8, 0.0, 1e-8)


def test_short_budget_is_delay_bound():
    sc = ScenarioConfig(sensors=5, qos=QosBudget(max_delay=0.5e-3))
    assert sc.budget_frames == 4
    rep = optimize_delays(sc)
    assert not rep.feasible and rep.binding_constraint == BINDING_DELAY


def test_uplink_infeasible_is_named():
    sc = ScenarioConfig(antennas=1, sensors=5, n_max=1, cell_radius=250.0)
    rep = optimize_delays(sc)
    assert not rep.feasible and rep.binding_constraint == BINDING_UL


def test_downlink_infeasible_is_named():
    sc = ScenarioConfig(antennas=1, sensors=0, n_max=1, dl_power=1e-6)
    rep = optimize_delays(sc)
    assert not rep.feasible and rep.binding_constraint == BINDING_DL


@pytest.mark.parametrize("antennas,radius,seed", [(2, 100.0, 1), (4, 250.0, 2), (8, 250.0, 3), (16, 250.0, 4),
                                                  (4, 100.0, 5), (32, 250.0, 6)])
def test_two_step_equals_joint_lattice(antennas, radius, seed):
    sc = shrunken(antennas, radius, sim=SimConfig(seed=seed))
    eps = EpsilonSplit.equal(sc.qos.loss_max)
    rep = optimize_delays(sc, eps)
    best = lattice_optimum(sc, eps)
    if math.isinf(best):
        assert not rep.feasible
    else:
        assert rep.total_bandwidth_bound == best


def test_report_parts_add_up_and_round_trip():
    sc = shrunken()
    rep = optimize_delays(sc)
    assert rep.feasible
    assert rep.total_bandwidth_bound == rep.recompute_total()
    assert rep.total_bandwidth_bound == pytest.approx(rep.ul_term + rep.dl_term, rel=1e-15)
    text = json.dumps(rep.to_dict(), sort_keys=True, allow_nan=False)
    back = ConfigReport.from_dict(json.loads(text))
    assert back == rep


def test_total_bandwidth_bound_checks_budget():
    sc = shrunken()
    eps = EpsilonSplit.equal(sc.qos.loss_max)
    with pytest.raises(DomainError):
        total_bandwidth_bound(sc, DelaySplit(4, 2, 1), eps)
    with pytest.raises(DomainError):
        total_bandwidth_bound(sc, DelaySplit(3, 1, 1), EpsilonSplit(1e-7, 1e-7, 1e-7))
    value, rep = total_bandwidth_bound(sc, DelaySplit(3, 1, 2), eps)
    assert value == rep.total_bandwidth_bound


def test_epsilon_split_never_worse_than_equal():
    sc = shrunken(8)
    eq = EpsilonSplit.equal(sc.qos.loss_max)
    rep = optimize_delays(sc, eq)
    best, value = optimize_epsilon_split(sc, rep.delay, 0.1)
    assert best is not None and value <= rep.total_bandwidth_bound


def test_curve_rows_cover_every_uplink_delay():
    sc = shrunken(16, sensors=50)
    rows = bandwidth_vs_delay_curve(sc)
    assert [r.ul_frames for r in rows] == [3, 4]
    best = optimize_delays(sc)
    assert min(r.total_hz for r in rows) == best.total_bandwidth_bound


def test_planner_is_deterministic():
    sc = shrunken(8, sensors=40)
    a = optimize_delays(sc, planner=Planner(sc, 7))
    b = optimize_delays(sc, planner=Planner(sc, 7))
    c = optimize_delays(sc, planner=Planner(sc, 8))
    assert a.to_dict() == b.to_dict()
    assert a.scenario_hash == c.scenario_hash and a.seed != c.seed


def test_no_sensors_leaves_only_downlink():
    sc = shrunken(sensors=0)
    rep = optimize_delays(sc)
    assert rep.feasible and rep.ul_term == 0.0
    assert rep.total_bandwidth_bound == rep.dl_term
