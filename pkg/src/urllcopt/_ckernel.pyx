# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled solver kernels.

Line-for-line port of ``_pykernel.py``; the arithmetic is written in the
same order so both backends return identical doubles.
"""

from libc.math cimport exp, log, sqrt, expm1, log1p, erfc, pow, ceil, floor, INFINITY, NAN
from libc.stdint cimport int64_t

LAW_REPEAT = 0
LAW_ONE_BIT = 1
MAX_ANTENNAS = 4096

cdef double _LN2 = 0.6931471805599453
cdef double _SQRT_HALF = 0.7071067811865476
cdef double _INV_GOLDEN = 0.6180339887498949
cdef double _SERIES_RTOL = 1e-17
cdef long _MAX_TERMS = 100000

cdef double _LOGFACT[4097]


cdef void _init_logfact():
    cdef int k
    _LOGFACT[0] = 0.0
    for k in range(1, 4097):
        _LOGFACT[k] = _LOGFACT[k - 1] + log(<double>k)


_init_logfact()


cdef inline double _q(double x) noexcept nogil:
    return 0.5 * erfc(x * _SQRT_HALF)


cdef double _erlang(long n, double x) noexcept nogil:
    cdef double lx, t, s
    cdef long k
    if x <= 0.0:
        return 0.0
    if x == INFINITY:
        return 1.0
    lx = log(x)
    if x < n:
        t = exp(n * lx - x - _LOGFACT[n])
        s = t
        k = n
        while t > s * _SERIES_RTOL and k < n + _MAX_TERMS:
            k += 1
            t = t * x / k
            s += t
        return s if s < 1.0 else 1.0
    t = exp((n - 1) * lx - x - _LOGFACT[n - 1])
    s = t
    k = n - 1
    while k > 0 and t > s * _SERIES_RTOL:
        t = t * k / x
        s += t
        k -= 1
    s = 1.0 - s
    return s if s > 0.0 else 0.0


cdef double _gth(double k, double tau, double bits, double bw, double z) noexcept nogil:
    cdef double blk = tau * bw
    cdef double u
    if blk <= 0.0:
        return INFINITY
    u = bits * _LN2 / blk + z / sqrt(blk)
    if u > 700.0:
        return INFINITY
    return k * bw * expm1(u)


cdef double _loss(int law, double k0, long n, double tau, double bits, long nt,
                  double bw, double z) noexcept nogil:
    cdef double g, base, fn
    if law == 0:
        g = _gth(k0 * n, tau, bits, bw, z)
        base = _erlang(nt, g) + _q(z)
        if base >= 1.0:
            return 1.0
        return pow(base, <double>n)
    g = _gth(k0, tau, bits, bw, z)
    fn = pow(_erlang(nt, g), <double>n)
    return fn + (1.0 - fn) * _q(z)


cdef void _golden(int law, double k0, long n, double tau, double bits, long nt, double bw,
                  double a, double b, double tol, double* zout, double* fout) noexcept nogil:
    cdef double c = b - _INV_GOLDEN * (b - a)
    cdef double d = a + _INV_GOLDEN * (b - a)
    cdef double fc = _loss(law, k0, n, tau, bits, nt, bw, c)
    cdef double fd = _loss(law, k0, n, tau, bits, nt, bw, d)
    cdef double zbest, fbest, fa, fb
    while b - a > tol:
        if fc <= fd:
            b = d
            d = c
            fd = fc
            c = b - _INV_GOLDEN * (b - a)
            fc = _loss(law, k0, n, tau, bits, nt, bw, c)
        else:
            a = c
            c = d
            fc = fd
            d = a + _INV_GOLDEN * (b - a)
            fd = _loss(law, k0, n, tau, bits, nt, bw, d)
    if fc <= fd:
        zbest = c
        fbest = fc
    else:
        zbest = d
        fbest = fd
    fa = _loss(law, k0, n, tau, bits, nt, bw, a)
    if fa < fbest:
        zbest = a
        fbest = fa
    fb = _loss(law, k0, n, tau, bits, nt, bw, b)
    if fb < fbest:
        zbest = b
        fbest = fb
    zout[0] = zbest
    fout[0] = fbest


cdef void _grid(int law, double k0, long n, double tau, double bits, long nt, double bw,
                const double[::1] zgrid, double tol, double* zout, double* fout) noexcept nogil:
    cdef Py_ssize_t m = zgrid.shape[0]
    cdef Py_ssize_t i, ibest = 0
    cdef double f, fbest, zbest, lo, hi, zr, fr
    fbest = _loss(law, k0, n, tau, bits, nt, bw, zgrid[0])
    for i in range(1, m):
        f = _loss(law, k0, n, tau, bits, nt, bw, zgrid[i])
        if f < fbest:
            ibest = i
            fbest = f
    zbest = zgrid[ibest]
    lo = zgrid[ibest + 1] if ibest + 1 < m else zgrid[ibest]
    hi = zgrid[ibest - 1] if ibest > 0 else zgrid[ibest]
    if hi > lo:
        _golden(law, k0, n, tau, bits, nt, bw, lo, hi, tol, &zr, &fr)
        if fr < fbest:
            zbest = zr
            fbest = fr
    zout[0] = zbest
    fout[0] = fbest


cdef void _optimize(int law, double k0, long n, double tau, double bits, long nt, double bw,
                    const double[::1] zgrid, double tol, double* zout, double* fout) noexcept nogil:
    cdef double zhi = zgrid[0]
    cdef double zlo = zgrid[zgrid.shape[0] - 1]
    cdef double blk, kb, zc, top, floor_base
    if law == 0 and nt > 1:
        blk = tau * bw
        kb = k0 * n * bw
        if blk > 0.0 and kb > 0.0:
            zc = sqrt(blk) * (log1p((nt - 1) / kb) - bits * _LN2 / blk)
            if zc > zlo:
                top = zc if zc < zhi else zhi
                _golden(law, k0, n, tau, bits, nt, bw, zlo, top, tol, zout, fout)
                if top >= zhi:
                    return
                floor_base = _erlang(nt, nt - 1.0)
                if fout[0] < pow(floor_base, <double>n):
                    return
    _grid(law, k0, n, tau, bits, nt, bw, zgrid, tol, zout, fout)


cdef double _minbw(int law, double k0, long n, double tau, double bits, long nt, double eps,
                   double wc, double delta_b, const double[::1] zgrid, double tol,
                   double* zout, double* fout) noexcept nogil:
    cdef double z, f, lo, hi, zh, fh, mid, zm, fm
    _optimize(law, k0, n, tau, bits, nt, wc, zgrid, tol, &z, &f)
    if f > eps:
        zout[0] = z
        fout[0] = f
        return NAN
    lo = 0.0
    hi = wc
    zh = z
    fh = f
    while hi - lo > delta_b:
        mid = 0.5 * (lo + hi)
        _optimize(law, k0, n, tau, bits, nt, mid, zgrid, tol, &zm, &fm)
        if fm > eps:
            lo = mid
        else:
            hi = mid
            zh = zm
            fh = fm
    zout[0] = zh
    fout[0] = fh
    return hi


cdef long _snap(int law, double k0, long n, double tau, double bits, long nt, double eps,
                double wc, double b0, double bw, const double[::1] zgrid, double tol,
                double* zout, double* fout) noexcept nogil:
    cdef long units = <long>ceil(bw / b0 - 1e-9)
    cdef long top = <long>floor(wc / b0 + 1e-9)
    cdef double z, f
    if units < 1:
        units = 1
    if units > top:
        units = top
    while units <= top:
        _optimize(law, k0, n, tau, bits, nt, units * b0, zgrid, tol, &z, &f)
        if f <= eps:
            zout[0] = z
            fout[0] = f
            return units
        units += 1
    zout[0] = NAN
    fout[0] = NAN
    return 0


cdef void _solve(int law, double k0, double tau, double bits, long nt, double eps, double wc,
                 double b0, double delta_b, long n_max, bint reserve_all,
                 const double[::1] zgrid, double tol, long* n_out, double* bw_out,
                 double* cont_out, double* z_out, double* f_out) noexcept nogil:
    cdef long best_n = 0, best_units = 0, best_cost = 0, n, units, cost
    cdef double best_cont = NAN, best_z = NAN, best_f = NAN
    cdef double bw, z, f, zs, fs, zp, fp
    cdef long top = <long>floor(wc / b0 + 1e-9)
    cdef long per, cap
    for n in range(1, n_max + 1):
        if best_n != 0:
            per = n if (law == 0 or reserve_all) else 1
            cap = (best_cost - 1) // per
            if cap < 1:
                continue
            if cap < top:
                _optimize(law, k0, n, tau, bits, nt, cap * b0, zgrid, tol, &zp, &fp)
                if fp > eps:
                    continue
        bw = _minbw(law, k0, n, tau, bits, nt, eps, wc, delta_b, zgrid, tol, &z, &f)
        if bw != bw:
            continue
        units = _snap(law, k0, n, tau, bits, nt, eps, wc, b0, bw, zgrid, tol, &zs, &fs)
        if units == 0:
            continue
        cost = units * n if (law == 0 or reserve_all) else units
        if best_n == 0 or cost < best_cost:
            best_n = n
            best_units = units
            best_cost = cost
            best_cont = bw
            best_z = zs
            best_f = fs
    n_out[0] = best_n
    bw_out[0] = best_units * b0
    cont_out[0] = best_cont
    z_out[0] = best_z
    f_out[0] = best_f


def q_function(double x):
    return _q(x)


def erlang_cdf(long n, double x):
    """Regularized lower incomplete gamma P(n, x) for integer n >= 1."""
    return _erlang(n, x)


def gain_threshold(double k, double tau, double bits, double bw, double z):
    return _gth(k, tau, bits, bw, z)


def loss_at(int law, double k0, long n, double tau, double bits, long nt, double bw, double z):
    return _loss(law, k0, n, tau, bits, nt, bw, z)


def optimize_z(int law, double k0, long n, double tau, double bits, long nt, double bw,
               const double[::1] zgrid, double tol):
    cdef double z, f
    _optimize(law, k0, n, tau, bits, nt, bw, zgrid, tol, &z, &f)
    return z, f


def min_bandwidth(int law, double k0, long n, double tau, double bits, long nt, double eps,
                  double wc, double delta_b, const double[::1] zgrid, double tol):
    cdef double z, f, bw
    bw = _minbw(law, k0, n, tau, bits, nt, eps, wc, delta_b, zgrid, tol, &z, &f)
    return bw, z, f


def snap_bandwidth(int law, double k0, long n, double tau, double bits, long nt, double eps,
                   double wc, double b0, double bw, const double[::1] zgrid, double tol):
    cdef double z, f
    cdef long units = _snap(law, k0, n, tau, bits, nt, eps, wc, b0, bw, zgrid, tol, &z, &f)
    return units, z, f


def solve_link(int law, double k0, double tau, double bits, long nt, double eps, double wc,
               double b0, double delta_b, long n_max, bint reserve_all,
               const double[::1] zgrid, double tol):
    cdef long n
    cdef double bw, cont, z, f
    _solve(law, k0, tau, bits, nt, eps, wc, b0, delta_b, n_max, reserve_all, zgrid, tol,
           &n, &bw, &cont, &z, &f)
    return n, bw, cont, z, f


def solve_links(int law, const double[::1] k0s, double tau, double bits, long nt, double eps,
                double wc, double b0, double delta_b, long n_max, bint reserve_all,
                const double[::1] zgrid, double tol, int64_t[::1] out_n, double[::1] out_bw,
                double[::1] out_cont, double[::1] out_z, double[::1] out_loss):
    cdef Py_ssize_t i
    cdef long n
    cdef double bw, cont, z, f
    with nogil:
        for i in range(k0s.shape[0]):
            _solve(law, k0s[i], tau, bits, nt, eps, wc, b0, delta_b, n_max, reserve_all,
                   zgrid, tol, &n, &bw, &cont, &z, &f)
            out_n[i] = n
            out_bw[i] = bw
            out_cont[i] = cont
            out_z[i] = z
            out_loss[i] = f


def fifo_queue(const int64_t[::1] arrivals, long service, long delay_bound):
    """Discrete-time FIFO queue with constant service per frame."""
    cdef int64_t limit = service * delay_bound
    cdef int64_t backlog = 0, viol = 0, total = 0, max_backlog = 0, a, tot
    cdef Py_ssize_t i
    with nogil:
        for i in range(arrivals.shape[0]):
            a = arrivals[i]
            tot = backlog + a
            if tot > limit:
                viol += tot - (backlog if backlog > limit else limit)
            total += a
            backlog = tot - service if tot > service else 0
            if backlog > max_backlog:
                max_backlog = backlog
    return viol, total, max_backlog
