"""Pure-Python implementation of the solver kernels.

Operation order mirrors ``_ckernel.pyx`` so that both backends agree to the
last bit on the same platform libm. Keep the two files in lock-step.
"""

import math

LAW_REPEAT = 0
LAW_ONE_BIT = 1

MAX_ANTENNAS = 4096

_LN2 = 0.6931471805599453
_SQRT_HALF = 0.7071067811865476
_INV_GOLDEN = 0.6180339887498949
_SERIES_RTOL = 1e-17
_MAX_TERMS = 100000

_LOGFACT = [0.0] * (MAX_ANTENNAS + 1)
for _k in range(1, MAX_ANTENNAS + 1):
    _LOGFACT[_k] = _LOGFACT[_k - 1] + math.log(_k)
del _k


def q_function(x):
    return 0.5 * math.erfc(x * _SQRT_HALF)


def erlang_cdf(n, x):
    """Regularized lower incomplete gamma P(n, x) for integer n >= 1."""
    if x <= 0.0:
        return 0.0
    if x == math.inf:
        return 1.0
    lx = math.log(x)
    if x < n:
        # lower tail directly; avoids 1 - (1 - tiny) cancellation
        t = math.exp(n * lx - x - _LOGFACT[n])
        s = t
        k = n
        while t > s * _SERIES_RTOL and k < n + _MAX_TERMS:
            k += 1
            t = t * x / k
            s += t
        return s if s < 1.0 else 1.0
    t = math.exp((n - 1) * lx - x - _LOGFACT[n - 1])
    s = t
    k = n - 1
    while k > 0 and t > s * _SERIES_RTOL:
        t = t * k / x
        s += t
        k -= 1
    s = 1.0 - s
    return s if s > 0.0 else 0.0


def gain_threshold(k, tau, bits, bw, z):
    blk = tau * bw
    if blk <= 0.0:
        return math.inf
    u = bits * _LN2 / blk + z / math.sqrt(blk)
    if u > 700.0:
        return math.inf
    return k * bw * math.expm1(u)


def loss_at(law, k0, n, tau, bits, nt, bw, z):
    if law == LAW_REPEAT:
        g = gain_threshold(k0 * n, tau, bits, bw, z)
        base = erlang_cdf(nt, g) + q_function(z)
        if base >= 1.0:
            return 1.0
        return base ** n
    g = gain_threshold(k0, tau, bits, bw, z)
    fn = erlang_cdf(nt, g) ** n
    return fn + (1.0 - fn) * q_function(z)


def _golden(law, k0, n, tau, bits, nt, bw, a, b, tol):
    c = b - _INV_GOLDEN * (b - a)
    d = a + _INV_GOLDEN * (b - a)
    fc = loss_at(law, k0, n, tau, bits, nt, bw, c)
    fd = loss_at(law, k0, n, tau, bits, nt, bw, d)
    while b - a > tol:
        if fc <= fd:
            b = d
            d = c
            fd = fc
            c = b - _INV_GOLDEN * (b - a)
            fc = loss_at(law, k0, n, tau, bits, nt, bw, c)
        else:
            a = c
            c = d
            fc = fd
            d = a + _INV_GOLDEN * (b - a)
            fd = loss_at(law, k0, n, tau, bits, nt, bw, d)
    if fc <= fd:
        zbest, fbest = c, fc
    else:
        zbest, fbest = d, fd
    fa = loss_at(law, k0, n, tau, bits, nt, bw, a)
    if fa < fbest:
        zbest, fbest = a, fa
    fb = loss_at(law, k0, n, tau, bits, nt, bw, b)
    if fb < fbest:
        zbest, fbest = b, fb
    return zbest, fbest


def _grid(law, k0, n, tau, bits, nt, bw, zgrid, tol):
    m = len(zgrid)
    ibest = 0
    fbest = loss_at(law, k0, n, tau, bits, nt, bw, zgrid[0])
    for i in range(1, m):
        f = loss_at(law, k0, n, tau, bits, nt, bw, zgrid[i])
        if f < fbest:
            ibest = i
            fbest = f
    zbest = zgrid[ibest]
    lo = zgrid[ibest + 1] if ibest + 1 < m else zgrid[ibest]
    hi = zgrid[ibest - 1] if ibest > 0 else zgrid[ibest]
    if hi > lo:
        z, f = _golden(law, k0, n, tau, bits, nt, bw, lo, hi, tol)
        if f < fbest:
            zbest, fbest = z, f
    return zbest, fbest


def optimize_z(law, k0, n, tau, bits, nt, bw, zgrid, tol):
    """Minimize the loss over the Q-inverse of the error threshold.

    ``zgrid`` is descending (ascending error thresholds); its ends bound the
    search. Golden section runs on the part of the interval where the gain
    threshold stays below ``nt - 1`` (convex in the error threshold); outside
    it the loss is at least ``P(nt, nt - 1) ** n``, which certifies the
    golden minimum as global when it lies below that level.
    """
    zhi = zgrid[0]
    zlo = zgrid[len(zgrid) - 1]
    if law == LAW_REPEAT and nt > 1:
        blk = tau * bw
        kb = k0 * n * bw
        if blk > 0.0 and kb > 0.0:
            zc = math.sqrt(blk) * (math.log1p((nt - 1) / kb) - bits * _LN2 / blk)
            if zc > zlo:
                top = zc if zc < zhi else zhi
                z, f = _golden(law, k0, n, tau, bits, nt, bw, zlo, top, tol)
                if top >= zhi:
                    return z, f
                floor_base = erlang_cdf(nt, nt - 1.0)
                if f < floor_base ** n:
                    return z, f
    return _grid(law, k0, n, tau, bits, nt, bw, zgrid, tol)


def min_bandwidth(law, k0, n, tau, bits, nt, eps, wc, delta_b, zgrid, tol):
    """Bisection for the smallest subchannel bandwidth meeting ``eps``.

    Returns ``(bw, z, loss)``; ``bw`` is NaN when even ``wc`` fails, in which
    case ``z``/``loss`` describe the optimum at ``wc``.
    """
    z, f = optimize_z(law, k0, n, tau, bits, nt, wc, zgrid, tol)
    if f > eps:
        return math.nan, z, f
    lo = 0.0
    hi = wc
    zh = z
    fh = f
    while hi - lo > delta_b:
        mid = 0.5 * (lo + hi)
        zm, fm = optimize_z(law, k0, n, tau, bits, nt, mid, zgrid, tol)
        if fm > eps:
            lo = mid
        else:
            hi = mid
            zh = zm
            fh = fm
    return hi, zh, fh


def snap_bandwidth(law, k0, n, tau, bits, nt, eps, wc, b0, bw, zgrid, tol):
    """Round ``bw`` up to the bandwidth grid and re-verify feasibility.

    Returns ``(units, z, loss)`` with ``units == 0`` when no grid point in
    ``[bw, wc]`` satisfies ``eps``.
    """
    units = math.ceil(bw / b0 - 1e-9)
    if units < 1:
        units = 1
    top = math.floor(wc / b0 + 1e-9)
    if units > top:
        units = top
    while units <= top:
        z, f = optimize_z(law, k0, n, tau, bits, nt, units * b0, zgrid, tol)
        if f <= eps:
            return units, z, f
        units += 1
    return 0, math.nan, math.nan


def solve_link(law, k0, tau, bits, nt, eps, wc, b0, delta_b, n_max, reserve_all, zgrid, tol):
    """Sweep the diversity order and keep the cheapest feasible plan.

    Returns ``(n, bw, bw_cont, z, loss)``; ``n == 0`` marks infeasibility.
    Ties on reserved bandwidth go to the smaller diversity order. Once a plan
    exists, a larger order is probed only at the widest bandwidth that would
    still beat it.
    """
    best_n = 0
    best_units = 0
    best_cost = 0
    best_cont = math.nan
    best_z = math.nan
    best_f = math.nan
    top = math.floor(wc / b0 + 1e-9)
    for n in range(1, n_max + 1):
        if best_n != 0:
            # skip n unless it can undercut the incumbent; loss is
            # nonincreasing in bandwidth, so one probe decides it
            per = n if (law == LAW_REPEAT or reserve_all) else 1
            cap = (best_cost - 1) // per
            if cap < 1:
                continue
            if cap < top:
                zp, fp = optimize_z(law, k0, n, tau, bits, nt, cap * b0, zgrid, tol)
                if fp > eps:
                    continue
        bw, z, f = min_bandwidth(law, k0, n, tau, bits, nt, eps, wc, delta_b, zgrid, tol)
        if bw != bw:
            continue
        units, zs, fs = snap_bandwidth(law, k0, n, tau, bits, nt, eps, wc, b0, bw, zgrid, tol)
        if units == 0:
            continue
        cost = units * n if (law == LAW_REPEAT or reserve_all) else units
        if best_n == 0 or cost < best_cost:
            best_n = n
            best_units = units
            best_cost = cost
            best_cont = bw
            best_z = zs
            best_f = fs
    return best_n, best_units * b0, best_cont, best_z, best_f


def solve_links(law, k0s, tau, bits, nt, eps, wc, b0, delta_b, n_max, reserve_all, zgrid, tol,
                out_n, out_bw, out_cont, out_z, out_loss):
    for i in range(len(k0s)):
        n, bw, cont, z, f = solve_link(law, k0s[i], tau, bits, nt, eps, wc, b0, delta_b, n_max,
                                       reserve_all, zgrid, tol)
        out_n[i] = n
        out_bw[i] = bw
        out_cont[i] = cont
        out_z[i] = z
        out_loss[i] = f


def fifo_queue(arrivals, service, delay_bound):
    """Discrete-time FIFO queue with constant service per frame.

    Arrivals join at frame start and up to ``service`` packets leave at frame
    end. A packet at position k (backlog included) leaves ceil(k/service)
    frames after arriving; it violates the bound when k > service*delay_bound.
    Returns ``(violations, packets, max_backlog)``.
    """
    limit = service * delay_bound
    backlog = 0
    viol = 0
    total = 0
    max_backlog = 0
    for a in arrivals:
        a = int(a)
        tot = backlog + a
        if tot > limit:
            viol += tot - (backlog if backlog > limit else limit)
        total += a
        backlog = tot - service if tot > service else 0
        if backlog > max_backlog:
            max_backlog = backlog
    return viol, total, max_backlog
