# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled tanh-sinh kernel; mirrors ``_quadrature.integrate_python`` cell by cell."""

from libc.math cimport exp, log, fabs, asinh, ceil, lgamma, INFINITY, NAN, M_PI, nextafter

DEF TAIL_MARGIN = 45.0
DEF U_MAX = 30.0
DEF ROUNDING_FLOOR = 1e-14


cdef inline double _tail_extent(double shape) noexcept nogil:
    cdef double u = asinh(TAIL_MARGIN / (M_PI * shape))
    if u > U_MAX:
        u = U_MAX
    u = asinh((TAIL_MARGIN + u) / (M_PI * shape))
    if u < 3.0:
        u = 3.0
    if u > U_MAX:
        u = U_MAX
    return ceil(2.0 * u) / 2.0


cdef int _cell(double y1, double y2, double a1, double a2, double a3, double b,
               double tol, int max_levels, bint moments,
               const double[::1] logt_t, const double[::1] log1mt_t,
               const double[::1] t_t, const double[::1] omt_t, const double[::1] logw_t,
               Py_ssize_t center, double* res) noexcept nogil:
    cdef double m = y1 if y1 < y2 else y2
    cdef bint tie1 = y1 == m
    cdef bint tie2 = y2 == m
    cdef double d1 = y1 - m, d2 = y2 - m
    cdef double logm = log(m)
    cdef double cr = 1.0
    cdef double const = a3 * logm
    if tie1:
        cr += a1 - 1.0
        const += (a1 - 1.0) * logm
    if tie2:
        cr += a2 - 1.0
        const += (a2 - 1.0) * logm
    if cr <= 0.0:
        res[0] = INFINITY
        return 2
    const += (a1 + a2 + a3) * log(b) - b * (y1 + y2) - lgamma(a1) - lgamma(a2) - lgamma(a3)
    cdef double ul = _tail_extent(a3)
    cdef double ur = _tail_extent(cr)
    cdef double bm = b * m

    cdef double shift = -INFINITY
    cdef double s0 = 0.0, st = 0.0, s1mt = 0.0, sl1 = 0.0, sl2 = 0.0, sl3 = 0.0
    cdef double p0 = NAN, p1 = NAN, p2 = NAN, p3 = NAN, p4 = NAN
    cdef double h, ell, e, sc, lt, l1t, tt, ot, lx1, lx2, log_i, c1, c2, c3, c4, d, dd, err = INFINITY
    cdef Py_ssize_t k, kl, kr, kstart, kstep, stride, idx
    cdef int level, status = 1

    for level in range(max_levels):
        h = 0.5 ** (level + 1)
        stride = (<Py_ssize_t> 1) << (max_levels - 1 - level)
        kl = <Py_ssize_t> (ul / h + 0.5)
        kr = <Py_ssize_t> (ur / h + 0.5)
        if level == 0:
            kstart = -kl
            kstep = 1
        else:
            kstart = -kl + 1
            kstep = 2
        k = kstart
        while k <= kr:
            idx = center + k * stride
            lt = logt_t[idx]
            l1t = log1mt_t[idx]
            tt = t_t[idx]
            ot = omt_t[idx]
            ell = a3 * lt + cr * l1t + logw_t[idx] + bm * tt
            if tie1:
                lx1 = logm + l1t
            else:
                lx1 = log(d1 + m * ot)
                ell += (a1 - 1.0) * lx1
            if tie2:
                lx2 = logm + l1t
            else:
                lx2 = log(d2 + m * ot)
                ell += (a2 - 1.0) * lx2
            if ell > shift:
                sc = exp(shift - ell)
                s0 *= sc
                st *= sc
                s1mt *= sc
                sl1 *= sc
                sl2 *= sc
                sl3 *= sc
                shift = ell
            e = exp(ell - shift)
            s0 += e
            if moments:
                st += e * tt
                s1mt += e * ot
                sl1 += e * lx1
                sl2 += e * lx2
                sl3 += e * (logm + lt)
            k += kstep

        log_i = log(h) + shift + log(s0)
        d = fabs(log_i - p0)
        if moments:
            c1 = st / s0
            c2 = sl1 / s0
            c3 = sl2 / s0
            c4 = sl3 / s0
            dd = fabs(c1 - p1)
            if dd > d:
                d = dd
            dd = fabs(c2 - p2) / (1.0 + fabs(c2))
            if dd > d:
                d = dd
            dd = fabs(c3 - p3) / (1.0 + fabs(c3))
            if dd > d:
                d = dd
            dd = fabs(c4 - p4) / (1.0 + fabs(c4))
            if dd > d:
                d = dd
            p1 = c1
            p2 = c2
            p3 = c3
            p4 = c4
        if d != d:
            d = INFINITY
        p0 = log_i
        if level < 2:
            err = INFINITY
        elif d <= ROUNDING_FLOOR:
            err = 0.0
        else:
            err = d
        res[5] = err
        res[6] = level + 1
        if err <= tol:
            status = 0
            break

    res[0] = log_i + const
    cdef double ex3
    if moments:
        if st <= s1mt:
            ex3 = m * (st / s0)
        else:
            ex3 = m - m * (s1mt / s0)
        if ex3 <= 0.0:
            ex3 = nextafter(0.0, 1.0)
        if ex3 >= m:
            ex3 = nextafter(m, 0.0)
        res[1] = ex3
        res[2] = sl1 / s0
        res[3] = sl2 / s0
        res[4] = sl3 / s0
    return status


def integrate_cells(const double[::1] y1, const double[::1] y2, const double[::1] a1,
                    const double[::1] a2, const double[::1] a3, const double[::1] b,
                    double tol, int max_levels, bint moments,
                    const double[::1] logt_t, const double[::1] log1mt_t,
                    const double[::1] t_t, const double[::1] omt_t, const double[::1] logw_t,
                    double[:, ::1] out, int[::1] status, Py_ssize_t start, Py_ssize_t stop):
    cdef Py_ssize_t center = (logt_t.shape[0] - 1) // 2
    cdef Py_ssize_t i
    cdef double res[7]
    cdef int j
    with nogil:
        for i in range(start, stop):
            for j in range(7):
                res[j] = NAN
            status[i] = _cell(y1[i], y2[i], a1[i], a2[i], a3[i], b[i], tol, max_levels, moments,
                              logt_t, log1mt_t, t_t, omt_t, logw_t, center, res)
            for j in range(7):
                out[i, j] = res[j]
