"""Time the compiled kernels against the pure-Python fallback.

Both backends run the same workloads and must return identical numbers;
the script prints the per-call time of each and the speed-up.

    python benchmarks/bench_kernels.py [--sensors 300] [--repeat 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from urllcopt import kernel
from urllcopt.scenario import ScenarioConfig


def _uplink_args(sc: ScenarioConfig, sensors: int):
    gains = sc.with_updates(sensors=sensors).sensor_gains(1)
    t = sc.ul_link(1.0)
    k0s = t.snr_loss_factor * t.noise_density / (gains * t.max_tx_power)
    cfg = sc.solver_config()
    tau = 4 * sc.frame_duration
    return k0s, tau, cfg


def bench_solve_links(mod, sc: ScenarioConfig, sensors: int):
    k0s, tau, cfg = _uplink_args(sc, sensors)
    outs = [np.zeros(len(k0s), dtype=np.int64)] + [np.zeros(len(k0s)) for _ in range(4)]
    mod.solve_links(kernel.LAW_REPEAT, k0s, tau, float(sc.packet_bits), sc.antennas, 1e-7 / 3,
                    cfg.coherence_bandwidth, cfg.bandwidth_unit, cfg.delta_b, cfg.n_max, True,
                    cfg.z_grid, cfg.z_tolerance, *outs)
    return tuple(o.tobytes() for o in outs)


def bench_fifo(mod, frames: int):
    rng = np.random.Generator(np.random.Philox(7))
    counts = rng.binomial(3000, 0.01, size=frames).astype(np.int64)
    return mod.fifo_queue(counts, 33, 3)


def bench_loss_grid(mod, sc: ScenarioConfig, points: int):
    acc = 0.0
    k0 = sc.ul_link(1e-12).noise_to_signal
    for i in range(points):
        bw = 1e3 + i * (0.5e6 - 1e3) / points
        acc += mod.loss_at(kernel.LAW_REPEAT, k0, 2, 4e-4, 160.0, sc.antennas, bw, 5.0)
    return acc


def timed(fn, repeat: int):
    best, value = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        value = fn()
        best = min(best, time.perf_counter() - t0)
    return best, value


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sensors", type=int, default=300)
    ap.add_argument("--frames", type=int, default=200_000)
    ap.add_argument("--points", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    py = kernel.load("python")
    try:
        cy = kernel.load("cython")
    except ImportError:
        print("compiled kernel not built; nothing to compare")
        return 1
    sc = ScenarioConfig()
    cases = [
        (f"solve_links x{args.sensors}", lambda m: bench_solve_links(m, sc, args.sensors)),
        (f"fifo_queue {args.frames} frames", lambda m: bench_fifo(m, args.frames)),
        (f"loss_at x{args.points}", lambda m: bench_loss_grid(m, sc, args.points)),
    ]
    print(f"{'workload':32s} {'python s':>10s} {'cython s':>10s} {'speed-up':>9s}  same")
    for name, fn in cases:
        tp, vp = timed(lambda: fn(py), args.repeat)
        tc, vc = timed(lambda: fn(cy), args.repeat)
        print(f"{name:32s} {tp:10.4f} {tc:10.4f} {tp / tc:9.1f}  {vp == vc}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
