"""Acceptance criteria 1-11, each run at its stated tolerance.

Every test records one ``criterion N: PASS|FAIL ...`` line, printed in the
terminal summary, and then asserts the criterion.
"""

from __future__ import annotations

import math
import os
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from oracles import lattice_solve
from urllcopt import kernel
from urllcopt.accurate import default_distances, exact_vs_bound
from urllcopt.cli import main as cli_main
from urllcopt.fbl_channel import LinkParams, exact_loss_probability, q_inverse
from urllcopt.montecarlo import simulate_availability, simulate_bandwidth_trace, simulate_link_loss, simulate_queue
from urllcopt.optimizer import (DelaySplit, EpsilonSplit, Planner, all_splits, bandwidth_vs_delay_curve,
                                dl_width_inactive, optimize_delays, optimize_epsilon_split)
from urllcopt.queueing import (ArrivalSpec, QueueRequirement, effective_bandwidth, multiplexing_gain_check,
                               service_rate_ceiling)
from urllcopt.scenario import DEFAULT_TEXT, QosBudget, ScenarioConfig, SimConfig
from urllcopt.solver import DEFAULT_CONFIG, Direction, LinkContext, SolverConfig, loss_for, solve_link
from urllcopt.units import dbm_to_watts, path_gain

REFERENCE_TOTALS = {8: 29.3e6, 16: 20.2e6, 32: 17.0e6}
REFERENCE_OUTAGE = {  # (uplink frames, antennas) -> outage
    (3, 16): 5.9e-2, (3, 32): 1.5e-2, (3, 64): 3.9e-3, (3, 128): 8.9e-4,
    (4, 16): 1.2e-2, (4, 32): 1.9e-3, (4, 64): 3.1e-4, (4, 128): 5.1e-5,
    (5, 16): 5.1e-3, (5, 32): 6.7e-4, (5, 64): 9.0e-5, (5, 128): 1.1e-5,
    (6, 16): 2.9e-3, (6, 32): 3.5e-4, (6, 64): 4.1e-5, (6, 128): 4.4e-6,
}
N0 = dbm_to_watts(-174.0)
P_UL = dbm_to_watts(23.0)


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


@pytest.fixture(scope="module")
def designs():
    """Optimized default-scenario configurations with the equal loss split."""
    out = {}
    for nt in REFERENCE_TOTALS:
        sc = ScenarioConfig(antennas=nt)
        planner = Planner(sc)
        t0 = time.perf_counter()
        rep = optimize_delays(sc, EpsilonSplit.equal(sc.qos.loss_max), planner)
        elapsed = time.perf_counter() - t0
        trace = simulate_bandwidth_trace(sc, rep, SimConfig(frames=1_000_000, seed=1))
        out[nt] = (sc, planner, rep, trace, elapsed)
    return out


# 1 ---------------------------------------------------------------------------

def test_criterion_01_reference_totals(designs):
    parts, ok = [], True
    for nt, want in REFERENCE_TOTALS.items():
        _, _, rep, trace, elapsed = designs[nt]
        got = trace.max_hz
        rel = got / want - 1.0
        good = rep.feasible and abs(rel) <= 0.15 and elapsed <= 600
        ok &= good
        parts.append(f"Nt={nt}: sim max {got / 1e6:.2f} MHz (bound {rep.total_bandwidth_bound / 1e6:.2f}) "
                     f"vs {want / 1e6:.1f} ({rel:+.0%}), {elapsed:.0f}s")
    record(1, ok, "; ".join(parts))
    assert ok


# 2 ---------------------------------------------------------------------------

def test_criterion_02_epsilon_split_gap(designs):
    sc, planner, rep, _, _ = designs[8]
    eq_total = rep.total_bandwidth_bound
    best, opt_total = optimize_epsilon_split(sc, rep.delay, 0.05, planner)
    gap = (eq_total - opt_total) / eq_total
    ok = best is not None and opt_total <= eq_total and gap < 0.05
    record(2, ok, f"Nt=8 equal {eq_total / 1e6:.3f} MHz, optimal {opt_total / 1e6:.3f} MHz at "
                  f"({best.ul / 1e-7:.2f},{best.dl / 1e-7:.2f},{best.queue / 1e-7:.2f})*eps_max, gap {gap:.2%}")
    assert ok


# 3 ---------------------------------------------------------------------------

def test_criterion_03_delay_sweep_structure(designs):
    sc, planner, _, _, _ = designs[8]
    rows = bandwidth_vs_delay_curve(sc, EpsilonSplit.equal(sc.qos.loss_max), planner)
    ul = [r.ul_hz for r in rows]
    tot = [r.total_hz for r in rows]
    ul_ok = all(b <= a for a, b in zip(ul, ul[1:]))
    k = int(np.argmin(tot))
    interior = 0 < k < len(tot) - 1
    ratio = tot[k] / tot[0]
    ok = ul_ok and interior and ratio <= 0.7
    record(3, ok, f"Nt=8 UL nonincreasing={ul_ok}, argmin D_u={rows[k].ul_frames} interior={interior}, "
                  f"optimum/baseline={ratio:.3f} (need <= 0.7); totals MHz "
                  + ",".join(f"{t / 1e6:.1f}" for t in tot))
    assert ok


# 4 ---------------------------------------------------------------------------

def test_criterion_04_multiplexing_property():
    rng = np.random.Generator(np.random.Philox(2024))
    t0 = time.perf_counter()
    bad = 0
    draws = 10_000
    for _ in range(draws):
        lam = float(10 ** rng.uniform(-1, 3))
        ways = int(rng.integers(2, 101))
        eq = float(10 ** rng.uniform(-9, -1))
        dq = int(rng.integers(1, 51))
        _, _, holds = multiplexing_gain_check(lam, ways, QueueRequirement(dq, eq))
        bad += not holds
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and elapsed < 60
    record(4, ok, f"{draws} draws, {bad} counterexamples, {elapsed:.2f}s")
    assert ok


# 5 ---------------------------------------------------------------------------

def _random_link(rng):
    nt = int(rng.choice([1, 2, 4, 8, 16]))
    link = LinkParams(path_gain(float(rng.uniform(50, 250))), P_UL, N0, 1.0, nt, float(rng.integers(32, 257)), 1e-4)
    du = int(rng.integers(3, 9))
    target = float(10 ** rng.uniform(-7, -2))
    cfg = SolverConfig(n_max=int(rng.integers(1, 6)), coherence_bandwidth=float(rng.integers(50, 301)) * 1e3)
    return link, du, target, cfg


def test_criterion_05_solver_oracles():
    rng = np.random.Generator(np.random.Philox(5))
    link_bad, feasible = 0, 0
    for _ in range(50):
        link, du, target, cfg = _random_link(rng)
        plan = solve_link(link, LinkContext(Direction.UL, du), target, cfg)
        ref = lattice_solve(link.noise_to_signal, (du - 2) * 1e-4, link.packet_bits, link.antennas, target,
                            cfg.n_max, cfg.coherence_bandwidth, cfg.bandwidth_unit)
        if plan is None or ref is None:
            link_bad += (plan is None) != (ref is None)
            continue
        feasible += 1
        link_bad += abs(plan.total_bandwidth - ref[0]) > cfg.bandwidth_unit

    delay_bad, branches = 0, set()
    six = QosBudget(max_delay=0.7e-3)
    for i in range(20):
        sc = ScenarioConfig(antennas=int(rng.choice([1, 2, 4, 8, 16])), cell_radius=float(rng.uniform(100, 250)),
                            sensors=20, packet_bits=float(rng.integers(64, 257)), qos=six, sim=SimConfig(seed=i + 1))
        eps = EpsilonSplit.equal(sc.qos.loss_max)
        planner = Planner(sc)
        branches.add(dl_width_inactive(planner, eps))
        rep = optimize_delays(sc, eps, planner)
        joint = min(planner.quick_total(s, eps) for s in all_splits(sc.budget_frames))
        two_step = rep.total_bandwidth_bound if rep.feasible else math.inf
        delay_bad += two_step != joint
    ok = link_bad == 0 and delay_bad == 0
    record(5, ok, f"solve_link vs (N,B,e) lattice: {link_bad} mismatches in 50 ({feasible} feasible); "
                  f"two-step vs joint delay lattice: {delay_bad} mismatches in 20 "
                  f"(single-delay branch seen: {sorted(branches)})")
    assert ok


# 6 ---------------------------------------------------------------------------

def _sign_changes(values):
    s = np.sign(np.diff(values))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def _decreasing_at(bw, bits, tau, z):
    """Sign test of d(g_th)/dB at ``bw``: True when the threshold still falls."""
    x = bits * math.log(2.0) / (tau * bw)
    y = z / math.sqrt(tau * bw)
    return math.exp(x + y) * (1 - x - y / 2) - 1 <= 0


def test_criterion_06_properties():
    rng = np.random.Generator(np.random.Philox(6))
    cfg = DEFAULT_CONFIG
    z_max = q_inverse(cfg.e_floor)
    nts = [1, 2, 4, 8, 16, 32, 64]

    p1_bad = 0
    for _ in range(100):
        nt = int(rng.choice(nts))
        k0 = N0 / (path_gain(float(rng.uniform(50, 250))) * P_UL)
        bits, tau = float(rng.integers(32, 257)), int(rng.integers(1, 7)) * 1e-4
        n, z = int(rng.integers(1, 5)), q_inverse(float(10 ** rng.uniform(-10, -1)))
        grid = np.linspace(5e7 / 512, 5e7, 512)
        f = [kernel.loss_at(kernel.LAW_REPEAT, k0, n, tau, bits, nt, b, z) for b in grid]
        p1_bad += _sign_changes(f) > 1
    # Reachable transmit durations in a 10-frame budget: UL D_u - 2 <= 6 frames, DL D_d <= 5 frames.
    default_cond = all(_decreasing_at(cfg.coherence_bandwidth, 160.0, f * 1e-4, z_max) for f in range(1, 7))

    p2_bad = p2_n = 0
    while p2_n < 100:
        nt = int(rng.choice(nts))
        k0 = N0 / (path_gain(float(rng.uniform(50, 250))) * P_UL)
        bits, tau = float(rng.integers(32, 257)), int(rng.integers(1, 7)) * 1e-4
        n = int(rng.integers(1, 5))
        if not _decreasing_at(cfg.coherence_bandwidth, bits, tau, z_max):
            continue
        p2_n += 1
        grid = np.linspace(cfg.coherence_bandwidth / 512, cfg.coherence_bandwidth, 512)
        f = np.array([kernel.optimize_z(kernel.LAW_REPEAT, k0, n, tau, bits, nt, b, cfg.z_grid, cfg.z_tolerance)[1]
                      for b in grid])
        p2_bad += bool(np.any(np.diff(f) > 0))

    p3_bad = p3_n = 0
    es = np.logspace(math.log10(cfg.e_floor), math.log10(cfg.e_cap), 256)
    w = (es[2:] - es[1:-1]) / (es[2:] - es[:-2])
    while p3_n < 100:
        nt = int(rng.choice([2, 4, 8, 16, 32, 64, 128]))
        k0 = N0 / (path_gain(float(rng.uniform(50, 250))) * P_UL)
        bits, tau = float(rng.integers(32, 257)), int(rng.integers(1, 7)) * 1e-4
        n, bw = int(rng.integers(1, 5)), float(rng.uniform(1e3, 5e5))
        if kernel.gain_threshold(k0 * n, tau, bits, bw, z_max) >= nt - 1:
            continue
        p3_n += 1
        f = np.array([kernel.loss_at(kernel.LAW_REPEAT, k0, n, tau, bits, nt, bw, q_inverse(float(e))) for e in es])
        second = w * f[:-2] + (1 - w) * f[2:] - f[1:-1]
        p3_bad += bool(second.min() < -1e-9)
    ok = p1_bad == 0 and p2_bad == 0 and p3_bad == 0 and default_cond
    record(6, ok, f"unimodal in B: {p1_bad}/100 violations; optimized loss monotone: {p2_bad}/{p2_n}; "
                  f"convex in e: {p3_bad}/{p3_n}; default-scenario argmin beyond W_c: {default_cond}")
    assert ok


# 7 ---------------------------------------------------------------------------

def test_criterion_07_downlink_delay_invariance(designs):
    parts, ok, checked = [], True, 0
    for nt in (8, 16, 32):
        sc, planner, rep, _, _ = designs[nt]
        e = rep.service_rate
        eps = rep.eps
        one = planner.downlink(1, e, eps.dl)
        if not dl_width_inactive(planner, eps):
            parts.append(f"Nt={nt}: precondition B^d<W_c at D_d=1 not met (N^d={one.diversity}), skipped")
            continue
        checked += 1
        plans = [planner.downlink(dd, e, eps.dl) for dd in range(1, 6)]
        cont = [dd * e * p.diversity * p.continuous_bandwidth for dd, p in enumerate(plans, start=1)]
        snapped = [dd * e * p.diversity * p.subchannel_bandwidth for dd, p in enumerate(plans, start=1)]
        tol = 2 * sc.bandwidth_unit * one.diversity * e
        spread = max(cont) - min(cont)
        good = spread <= tol and all(p.diversity == one.diversity for p in plans)
        ok &= good
        parts.append(f"Nt={nt}: spread {spread / 1e3:.1f} kHz <= {tol / 1e3:.0f} kHz "
                     f"(after B0 snapping {(max(snapped) - min(snapped)) / 1e3:.0f} kHz)")
    ok &= checked > 0
    record(7, ok, "; ".join(parts))
    assert ok


# 8 ---------------------------------------------------------------------------

def test_criterion_08_conservatism_chain():
    relaxed = 1e-2
    trials = 200_000
    parts, ok = [], True
    sc = ScenarioConfig(antennas=8)
    cases = [("UL d=100", sc.ul_link(path_gain(100.0)), LinkContext(Direction.UL, 6)),
             ("UL d=250", sc.ul_link(path_gain(250.0)), LinkContext(Direction.UL, 6)),
             ("UL d=250 Nt=2", ScenarioConfig(antennas=2).ul_link(path_gain(250.0)), LinkContext(Direction.UL, 6)),
             ("DL Nt=8", sc.dl_link(), LinkContext(Direction.DL, 1, 33))]
    for i, (name, link, ctx) in enumerate(cases):
        plan = solve_link(link, ctx, relaxed, sc.solver_config())
        share = ctx.prefactor(link) / link.noise_to_signal
        exact = exact_loss_probability(link, plan.subchannel_bandwidth, plan.diversity, ctx.tx_duration(link), share)
        bound = loss_for(link, ctx, plan.diversity, plan.subchannel_bandwidth, plan.error_threshold)
        mc = simulate_link_loss(plan, link, ctx, trials, 100 + i)
        good = mc.lower <= exact <= bound <= relaxed
        ok &= good
        parts.append(f"{name}: mc {mc.rate:.2e} [{mc.lower:.1e},{mc.upper:.1e}] <= exact {exact:.2e} "
                     f"<= bound {bound:.2e} <= {relaxed:g}")
    rows = exact_vs_bound(ScenarioConfig(), [8, 16, 32, 64], default_distances(ScenarioConfig()))
    dominated = sum(r.exact_bandwidth <= r.bound_bandwidth for r in rows)
    ok &= dominated == len(rows)
    parts.append(f"(N_t, d) grid exact<=bound at {dominated}/{len(rows)} points")
    record(8, ok, "; ".join(parts))
    assert ok


# 9 ---------------------------------------------------------------------------

def test_criterion_09_availability():
    cfg = SimConfig(drops=10_000, seed=1)
    parts, ok = [], True
    for (du, nt), ref in REFERENCE_OUTAGE.items():
        if not (nt == 16 and du in (3, 6)) and ref > 1e-4:
            continue
        res = simulate_availability(ScenarioConfig(antennas=nt), DelaySplit(du, 1, 1), cfg)
        got = res.sensor_outage.rate
        if nt == 16 and du == 3:
            good, rule = abs(got / ref - 1) <= 0.30, "+-30%"
        elif nt == 16 and du == 6:
            good, rule = abs(got / ref - 1) <= 0.50, "+-50%"
        else:
            good, rule = got <= 1.5 * ref, "upper bound 1.5x"
        ok &= good
        parts.append(f"Du={du} Nt={nt}: {got:.2e} vs {ref:.1e} ({rule}, per-drop {res.outage.rate:.3g})")
    record(9, ok, "; ".join(parts))
    assert ok


# 10 --------------------------------------------------------------------------

def test_criterion_10_queue_guarantee(designs):
    spec = ArrivalSpec.uniform(3000, 0.01)
    design_dq = designs[8][2].delay.queue
    parts, ok = [], True
    for eq in (1e-2, 1e-3):
        frames = max(int(100 / eq), 1_000_000)
        for dq in (1, 2, 3, 4, 5):
            rate = service_rate_ceiling(effective_bandwidth(spec.aggregate_rate, QueueRequirement(dq, eq)))
            res = simulate_queue(spec, rate, dq, SimConfig(frames=frames, seed=10 + dq))
            v = res.violation.rate
            if dq == 1:
                parts.append(f"eps={eq:g} D_q=1 (outside the asserted range): {v:.2e} at rate {rate}")
                continue
            good = v <= eq
            ok &= good
            parts.append(f"eps={eq:g} D_q={dq}: {v:.2e} at rate {rate}")
    record(10, ok, f"design D_q={design_dq}; " + "; ".join(parts))
    assert ok


# 11 --------------------------------------------------------------------------

def _artifacts(out):
    return {f: open(os.path.join(out, f), "rb").read() for f in sorted(os.listdir(out))
            if not f.endswith(".manifest.json")}


def test_criterion_11_determinism(tmp_path):
    default_ini = tmp_path / "default.ini"
    default_ini.write_text(DEFAULT_TEXT, encoding="utf-8")
    mid = tmp_path / "mid.ini"
    mid.write_text(DEFAULT_TEXT.replace("sensors = 3000", "sensors = 300").replace("antennas = 8", "antennas = 16")
                   .replace("frames = 1000000", "frames = 100000").replace("drops = 10000", "drops = 500"),
                   encoding="utf-8")
    commands = [
        ["optimize", str(default_ini)],
        ["optimize", str(mid)],
        ["simulate", str(mid), "{mid_report}", "--relaxed-eps", "1e-2"],
        ["simulate", str(mid), "{mid_report}"],
        ["sweep", str(mid), "--sweep-axis", "delay"],
        ["sweep", str(mid), "--sweep-axis", "epsilon", "--values", "0.2,0.3333333333333333,0.5"],
        ["sweep", str(mid), "--sweep-axis", "antennas", "--values", "16,32"],
        ["sweep", str(mid), "--sweep-axis", "distance", "--values", "50,150,250"],
        ["sweep", str(mid), "--sweep-axis", "csit", "--values", "100,250"],
        ["sweep", str(mid), "--sweep-axis", "availability", "--values", "3,6"],
    ]
    mid_report = str(tmp_path / "ref" / "report.json")
    assert cli_main(["optimize", str(mid), "--out-dir", str(tmp_path / "ref")]) == 0
    differing = []
    for k, cmd in enumerate(commands):
        cmd = [c.replace("{mid_report}", mid_report) for c in cmd]
        runs = []
        for r in range(2):
            out = str(tmp_path / f"c{k}r{r}")
            assert cli_main(cmd + ["--out-dir", out]) == 0
            runs.append(_artifacts(out))
        if runs[0] != runs[1] or not runs[0]:
            differing.append(" ".join(cmd[:1] + cmd[2:]))
    ok = not differing
    record(11, ok, f"{len(commands)} commands run twice, byte-identical artifacts"
                   + ("" if ok else f"; differing: {differing}"))
    assert ok
