"""Independent reference computations built on scipy special functions only."""

from __future__ import annotations

import math

import numpy as np
from scipy import special, stats


def bound_loss_grid(k0: float, tau: float, bits: float, nt: int, n: int, bw: np.ndarray,
                    e: np.ndarray) -> np.ndarray:
    """Threshold-bound loss on the outer product ``bw x e`` (rows are bandwidths)."""
    bw = np.asarray(bw, dtype=np.float64)[:, None]
    e = np.asarray(e, dtype=np.float64)[None, :]
    z = stats.norm.isf(e)
    with np.errstate(over="ignore", invalid="ignore"):
        g = k0 * n * bw * np.expm1(bits * math.log(2.0) / (tau * bw) + z / np.sqrt(tau * bw))
        f = special.gammainc(nt, np.where(np.isfinite(g), g, np.inf))
    f = np.where(np.isfinite(g), f, 1.0)
    return np.minimum(f + e, 1.0) ** n


def lattice_solve(k0: float, tau: float, bits: float, nt: int, target: float, n_max: int, wc: float,
                  b0: float, e_points: int = 4000):
    """Cheapest (N, B) on the B0 lattice with an e-grid minimum below ``target``.

    Returns ``(cost, n, bw)`` or ``None``.
    """
    units = np.arange(1, int(math.floor(wc / b0 + 1e-9)) + 1)
    bws = units * b0
    es = np.logspace(-12, math.log10(0.5 - 1e-6), e_points)
    best = None
    for n in range(1, n_max + 1):
        loss = bound_loss_grid(k0, tau, bits, nt, n, bws, es).min(axis=1)
        ok = np.nonzero(loss <= target)[0]
        if len(ok) == 0:
            continue
        cost = n * bws[ok[0]]
        if best is None or cost < best[0]:
            best = (cost, n, float(bws[ok[0]]))
    return best
