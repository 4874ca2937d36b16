"""Command-line entry point: optimize, simulate and sweep scenario files.

Every command writes its artifacts plus a ``*.manifest.json`` beside them.
Artifacts depend only on the scenario and the seed; the manifest also
records wall-clock time and is therefore not byte-stable.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from typing import Iterable, Optional, Sequence

import numpy as np

from . import __version__, kernel
from .accurate import csit_comparison, default_distances, exact_vs_bound
from .fbl_channel import DomainError
from .montecarlo import (SimConfig, simulate_availability, simulate_bandwidth_trace, simulate_link_loss,
                         simulate_queue)
from .optimizer import (ConfigReport, DelaySplit, EpsilonSplit, Planner, bandwidth_vs_delay_curve,
                        epsilon_grid, optimize_delays, optimize_epsilon_split)
from .queueing import QueueRequirement, effective_bandwidth, service_rate_ceiling
from .scenario import ScenarioConfig, ScenarioError, load_scenario
from .solver import Direction, LinkContext, solve_link

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_PARSE = 4
EXIT_HASH = 5

OUT_DIR_ENV = "URLLCOPT_OUT_DIR"
SWEEP_AXES = ("delay", "epsilon", "antennas", "distance", "csit", "availability")
CSV_SCHEMA = 1


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        return repr(x)
    return str(x)


def _csv_bytes(header: Sequence[str], rows: Iterable[Sequence]) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue().encode("utf-8")


class Output:
    """Collects artifacts of one command and writes them with a manifest."""

    def __init__(self, out_dir: str, command: str, scenario: ScenarioConfig, seed: int) -> None:
        self.out_dir = out_dir
        self.command = command
        self.scenario = scenario
        self.seed = seed
        self.files: list[tuple[str, str]] = []
        self.t0 = time.perf_counter()

    def write(self, name: str, data: bytes) -> str:
        os.makedirs(self.out_dir, exist_ok=True)
        path = os.path.join(self.out_dir, name)
        with open(path, "wb") as fh:
            fh.write(data)
        self.files.append((name, hashlib.sha256(data).hexdigest()))
        return path

    def finish(self, stem: str, extra: Optional[dict] = None) -> None:
        manifest = {
            "command": self.command,
            "scenario_hash": self.scenario.scenario_hash(),
            "seed": self.seed,
            "tool_version": __version__,
            "kernel_backend": kernel.BACKEND,
            "csv_schema": CSV_SCHEMA,
            "wall_clock_s": round(time.perf_counter() - self.t0, 3),
            "outputs": [{"file": f, "sha256": h} for f, h in self.files],
        }
        if extra:
            manifest.update(extra)
        path = os.path.join(self.out_dir, f"{stem}.manifest.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=1, sort_keys=True)
            fh.write("\n")


def _out_dir(args) -> str:
    return args.out_dir or os.environ.get(OUT_DIR_ENV) or "."


def _sim_config(sc: ScenarioConfig, args) -> SimConfig:
    base = sc.sim
    return SimConfig(
        frames=args.frames if getattr(args, "frames", None) is not None else base.frames,
        drops=args.drops if getattr(args, "drops", None) is not None else base.drops,
        seed=args.seed if args.seed is not None else base.seed,
        shadowing_db=base.shadowing_db,
        relaxed_eps=args.relaxed_eps if getattr(args, "relaxed_eps", None) is not None else base.relaxed_eps,
    )


def _eps_for(sc: ScenarioConfig) -> EpsilonSplit:
    if sc.qos.split_mode == "explicit":
        return EpsilonSplit(*sc.qos.explicit_split)  # type: ignore[misc]
    return EpsilonSplit.equal(sc.qos.loss_max)


def run_optimize(sc: ScenarioConfig, seed: int) -> ConfigReport:
    """Delay optimization, followed by the loss-split scan in ``grid`` mode."""
    planner = Planner(sc, seed)
    rep = optimize_delays(sc, _eps_for(sc), planner)
    if rep.feasible and sc.qos.split_mode == "grid":
        best, _ = optimize_epsilon_split(sc, rep.delay, sc.qos.split_step, planner)  # type: ignore[arg-type]
        if best is not None:
            rep = planner.report(rep.delay, best)  # type: ignore[arg-type]
    return rep


def report_json(rep: ConfigReport) -> bytes:
    return (json.dumps(rep.to_dict(), indent=1, sort_keys=True, allow_nan=False) + "\n").encode("utf-8")


SUMMARY_HEADER = ["feasible", "binding_constraint", "ul_frames", "dl_frames", "queue_frames", "eps_u", "eps_d",
                  "eps_q", "service_rate_pkt_per_frame", "active_threshold", "dl_subchannels",
                  "dl_subchannel_bandwidth_hz", "ul_term_hz", "dl_term_hz", "total_bandwidth_bound_hz"]


def _summary_row(rep: ConfigReport) -> list:
    d, e = rep.delay, rep.eps
    return [rep.feasible, rep.binding_constraint or "", d.ul if d else "", d.dl if d else "", d.queue if d else "",
            e.ul if e else "", e.dl if e else "", e.queue if e else "", rep.service_rate, rep.active_threshold,
            rep.dl_plan.diversity if rep.dl_plan else "", rep.dl_plan.subchannel_bandwidth if rep.dl_plan else "",
            rep.ul_term, rep.dl_term, rep.total_bandwidth_bound]


def cmd_optimize(args) -> int:
    sc = load_scenario(args.scenario)
    seed = args.seed if args.seed is not None else sc.sim.seed
    out = Output(_out_dir(args), "optimize", sc, seed)
    rep = run_optimize(sc, seed)
    out.write("report.json", report_json(rep))
    out.write("summary.csv", _csv_bytes(SUMMARY_HEADER, [_summary_row(rep)]))
    out.finish("report")
    if not rep.feasible:
        print(f"infeasible: binding constraint: {rep.binding_constraint}", file=sys.stderr)
        return EXIT_INFEASIBLE
    print(f"total bandwidth bound {rep.total_bandwidth_bound / 1e6:.3f} MHz at "
          f"D_u={rep.delay.ul} D_d={rep.delay.dl} D_q={rep.delay.queue} frames")  # type: ignore[union-attr]
    return EXIT_OK


SIM_HEADER = ["metric", "estimate", "ci95_low", "ci95_high", "events", "trials", "target", "relaxed", "pass"]


def load_report(path: str) -> ConfigReport:
    try:
        with open(path, encoding="utf-8") as fh:
            return ConfigReport.from_dict(json.load(fh))
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise ScenarioError(f"{path}: malformed report ({exc})") from None


def run_simulation(sc: ScenarioConfig, rep: ConfigReport, cfg: SimConfig) -> list[list]:
    rows: list[list] = []
    relaxed = cfg.relaxed_eps
    delay, eps = rep.delay, rep.eps
    assert delay is not None and eps is not None and rep.dl_plan is not None

    # queue: at the design rate, or at the rate designed for the relaxed target
    if relaxed is not None:
        q_target = relaxed
        rate = service_rate_ceiling(effective_bandwidth(sc.aggregate_rate, QueueRequirement(delay.queue, relaxed)))
    else:
        q_target, rate = eps.queue, rep.service_rate
    q = simulate_queue(sc.arrivals(), rate, delay.queue, cfg)
    v = q.violation
    rows.append(["queue_violation", v.rate, v.lower, v.upper, v.events, v.trials, q_target, relaxed is not None,
                 v.upper <= q_target or v.rate <= q_target])

    # links: worst-placed sensor and the cell-edge user
    planner_gains = sc.sensor_gains(rep.seed) if sc.sensors else np.array([])
    cfg_s = sc.solver_config()
    if sc.sensors:
        i = int(np.argmin(planner_gains))
        link = sc.ul_link(float(planner_gains[i]))
        ctx = LinkContext(Direction.UL, delay.ul)
        target = relaxed if relaxed is not None else eps.ul
        plan = solve_link(link, ctx, target, cfg_s) if relaxed is not None else rep.ul_plans[i]
        if plan is not None:
            est = simulate_link_loss(plan, link, ctx, cfg.frames, cfg.seed)
            rows.append(["ul_loss_worst_sensor", est.rate, est.lower, est.upper, est.events, est.trials, target,
                         relaxed is not None, est.lower <= target])
    dl_ctx = LinkContext(Direction.DL, delay.dl, rep.service_rate)
    target = relaxed if relaxed is not None else eps.dl
    dl_plan = solve_link(sc.dl_link(), dl_ctx, target, cfg_s) if relaxed is not None else rep.dl_plan
    if dl_plan is not None:
        est = simulate_link_loss(dl_plan, sc.dl_link(), dl_ctx, cfg.frames, cfg.seed + 1)
        rows.append(["dl_loss_cell_edge", est.rate, est.lower, est.upper, est.events, est.trials, target,
                     relaxed is not None, est.lower <= target])

    tr = simulate_bandwidth_trace(sc, rep, cfg)
    rows.append(["max_frame_bandwidth_hz", tr.max_hz, "", "", tr.frames_over_bound, tr.frames,
                 tr.bound_hz, False, tr.max_hz <= tr.bound_hz])
    rows.append(["mean_frame_bandwidth_hz", tr.mean_hz, "", "", "", tr.frames, tr.bound_hz, False,
                 tr.mean_hz <= tr.max_hz])
    if sc.sensors:
        av = simulate_availability(sc, delay, cfg, eps.ul)
        o = av.outage
        rows.append(["outage_per_drop", o.rate, o.lower, o.upper, o.events, o.trials, "", False, ""])
        o = av.sensor_outage
        rows.append(["outage_per_sensor", o.rate, o.lower, o.upper, o.events, o.trials, "", False, ""])
    return rows


def cmd_simulate(args) -> int:
    sc = load_scenario(args.scenario)
    rep = load_report(args.report)
    if rep.scenario_hash != sc.scenario_hash():
        print(f"refusing: report was produced for scenario {rep.scenario_hash[:12]}, "
              f"not {sc.scenario_hash()[:12]}", file=sys.stderr)
        return EXIT_HASH
    if not rep.feasible:
        print(f"infeasible report: binding constraint: {rep.binding_constraint}", file=sys.stderr)
        return EXIT_INFEASIBLE
    cfg = _sim_config(sc, args)
    out = Output(_out_dir(args), "simulate", sc, cfg.seed)
    rows = run_simulation(sc, rep, cfg)
    out.write("simulation.csv", _csv_bytes(SIM_HEADER, rows))
    out.finish("simulation", {"frames": cfg.frames, "drops": cfg.drops, "relaxed_eps": cfg.relaxed_eps})
    return EXIT_OK


def _values(args, sc: ScenarioConfig, key: str, default: Sequence[float]) -> list[float]:
    if args.values is not None:
        return [float(v) for v in args.values.replace(";", ",").split(",") if v.strip()]
    sweep = dict(sc.sweep)
    if key in sweep:
        return list(sweep[key])
    return list(default)


def sweep_rows(sc: ScenarioConfig, axis: str, values_for, seed: int, cfg: SimConfig) -> tuple[list[str], list[list]]:
    eq = EpsilonSplit.equal(sc.qos.loss_max)
    if axis == "delay":
        header = ["ul_frames", "dl_frames", "queue_frames", "ul_bandwidth_hz", "dl_bandwidth_hz",
                  "total_bandwidth_hz", "feasible"]
        want = {int(v) for v in values_for("delay_frames", range(3, sc.budget_frames - 1))}
        rows = [[r.ul_frames, r.dl_frames, r.queue_frames, r.ul_hz, r.dl_hz, r.total_hz, r.feasible]
                for r in bandwidth_vs_delay_curve(sc, eq, Planner(sc, seed)) if r.ul_frames in want]
        return header, rows
    if axis == "epsilon":
        header = ["ul_frames", "dl_frames", "queue_frames", "eps_u", "eps_d", "eps_q", "total_bandwidth_hz"]
        planner = Planner(sc, seed)
        base = optimize_delays(sc, eq, planner)
        if not base.feasible:
            return header, []
        d = base.delay
        fracs = values_for("eps_u_fraction", [])
        grid = epsilon_grid(sc.qos.loss_max, sc.qos.split_step)
        if fracs:
            grid = [e for e in grid if any(abs(e.ul / sc.qos.loss_max - f) < 1e-9 for f in fracs)]
        return header, [[d.ul, d.dl, d.queue, e.ul, e.dl, e.queue, planner.quick_total(d, e)] for e in grid]
    if axis == "antennas":
        header = ["antennas", "cell_radius_m", "ul_frames", "dl_frames", "queue_frames", "dl_subchannel_bandwidth_hz",
                  "ul_term_hz", "dl_term_hz", "total_bandwidth_hz", "feasible"]
        rows = []
        radii = dict(sc.sweep).get("cell_radius_m", (sc.cell_radius,))
        for radius in radii:
            for nt in values_for("antennas", (8, 16, 32)):
                s = sc.with_updates(antennas=int(nt), cell_radius=float(radius))
                r = optimize_delays(s, eq, Planner(s, seed))
                d = r.delay
                rows.append([int(nt), float(radius), d.ul if d else "", d.dl if d else "", d.queue if d else "",
                             r.dl_plan.subchannel_bandwidth if r.dl_plan else "", r.ul_term, r.dl_term,
                             r.total_bandwidth_bound if r.feasible else math.nan, r.feasible])
        return header, rows
    if axis == "distance":
        header = ["antennas", "distance_m", "bound_bandwidth_hz", "exact_bandwidth_hz", "gap_hz"]
        dist = values_for("distance_m", default_distances(sc))
        nts = [int(v) for v in dict(sc.sweep).get("antennas", (8, 16, 32, 64))]
        return header, [[r.antennas, r.distance, r.bound_bandwidth, r.exact_bandwidth, r.gap]
                        for r in exact_vs_bound(sc, nts, dist)]
    if axis == "csit":
        header = ["antennas", "distance_m", "no_csit_subchannels", "no_csit_bandwidth_hz", "one_bit_subchannels",
                  "one_bit_bandwidth_hz"]
        dist = values_for("distance_m", default_distances(sc))
        nts = [int(v) for v in dict(sc.sweep).get("antennas", (2, 4, 8, 16, 32))]
        return header, [[r.antennas, r.distance, r.no_csit_subchannels, r.no_csit_bandwidth,
                         r.one_bit_subchannels, r.one_bit_bandwidth] for r in csit_comparison(sc, nts, dist)]
    if axis == "availability":
        header = ["antennas", "ul_frames", "outage_per_drop", "outage_per_sensor", "threshold_gain_db", "drops"]
        rows = []
        nts = [int(v) for v in dict(sc.sweep).get("antennas", (16, 32, 64, 128))]
        for du in values_for("delay_frames", (3, 4, 5, 6)):
            for nt in nts:
                s = sc.with_updates(antennas=nt)
                a = simulate_availability(s, DelaySplit(int(du), 1, 1), cfg, eq.ul)
                rows.append([nt, int(du), a.outage.rate, a.sensor_outage.rate, a.threshold_db, a.drops])
        return header, rows
    raise ValueError(axis)


def cmd_sweep(args) -> int:
    sc = load_scenario(args.scenario)
    cfg = _sim_config(sc, args)
    seed = cfg.seed
    axis = args.sweep_axis
    out = Output(_out_dir(args), f"sweep {axis}", sc, seed)
    header, rows = sweep_rows(sc, axis, lambda key, default: _values(args, sc, key, default), seed, cfg)
    out.write(f"sweep_{axis}.csv", _csv_bytes(header, rows))
    out.finish(f"sweep_{axis}", {"axis": axis})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="urllcopt", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({kernel.BACKEND} kernels)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("scenario", help="scenario file (INI sections system/devices/bs/qos/sim/sweep)")
        sp.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        sp.add_argument("--out-dir", default=None, help=f"output directory (default ${OUT_DIR_ENV} or .)")

    sp = sub.add_parser("optimize", help="optimize delays and bandwidth for a scenario")
    common(sp)
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("simulate", help="validate an optimized report by simulation")
    common(sp)
    sp.add_argument("report", help="report.json written by the optimize command")
    sp.add_argument("--frames", type=int, default=None)
    sp.add_argument("--drops", type=int, default=None)
    sp.add_argument("--relaxed-eps", type=float, default=None,
                    help="loss target used instead of the design values so rates are measurable")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="tabulate one parameter study as long-form CSV")
    common(sp)
    sp.add_argument("--sweep-axis", required=True, choices=SWEEP_AXES)
    sp.add_argument("--values", default=None, help="comma-separated grid for the axis")
    sp.add_argument("--frames", type=int, default=None)
    sp.add_argument("--drops", type=int, default=None)
    sp.add_argument("--relaxed-eps", type=float, default=None)
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
