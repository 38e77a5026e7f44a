# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. See ``_pykernels`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, fabs, hypot
from libc.string cimport memcpy

cnp.import_array()

NAME = "cython"


cdef inline double _normalize(double x, long* e) nogil:
    # x = m * 2**k with m in [0.5, 1); x must be a positive normal double
    cdef unsigned long long bits
    memcpy(&bits, &x, 8)
    e[0] += <long>((bits >> 52) & 0x7ff) - 1022
    bits = (bits & 0x800fffffffffffffULL) | 0x3fe0000000000000ULL
    memcpy(&x, &bits, 8)
    return x


def leja_greedy(const double[::1] grid, Py_ssize_t n, double tie_atol):
    # Products of distances are kept as mantissa * 2**exponent so that no
    # log is needed except for candidates within one binade of the best.
    cdef Py_ssize_t G = grid.shape[0]
    cdef Py_ssize_t i, k, pick
    cdef long eb, e
    cdef double mb, m, lbest, thresh, diff, last, LN2 = log(2.0)
    out_arr = np.empty(n)
    man_arr = np.ones(G)
    exp_arr = np.zeros(G, dtype=np.int64)
    cdef double[::1] out = out_arr
    cdef double[::1] man = man_arr
    cdef long[::1] expo = exp_arr
    cdef long DEAD = -(1 << 60)

    # first node maximizes |x|, ties toward the larger value
    pick = 0
    for i in range(G):
        if fabs(grid[i]) >= fabs(grid[pick]):
            pick = i
    out[0] = grid[pick]

    for k in range(1, n):
        last = out[k - 1]
        eb = DEAD
        mb = 0.0
        for i in range(G):
            e = expo[i]
            if e == DEAD:
                continue
            diff = fabs(grid[i] - last)
            if diff == 0.0:
                expo[i] = DEAD
                continue
            m = _normalize(man[i] * diff, &e)
            man[i] = m
            expo[i] = e
            if e > eb or (e == eb and m > mb):
                eb = e
                mb = m
        lbest = log(mb) + eb * LN2
        thresh = lbest - tie_atol * (fabs(lbest) if fabs(lbest) > 1.0 else 1.0)
        pick = 0
        for i in range(G):
            e = expo[i]
            if e >= eb - 1 and e != DEAD:
                if log(man[i]) + e * LN2 >= thresh:
                    pick = i
        out[k] = grid[pick]
    return out_arr


def dd_extend(const double complex[::1] x, double complex[:, ::1] d,
              Py_ssize_t start, Py_ssize_t stop):
    cdef Py_ssize_t nf = d.shape[0]
    cdef Py_ssize_t r, i, j
    for r in range(nf):
        for i in range(start, stop):
            for j in range(i):
                d[r, i] = (d[r, j] - d[r, i]) / (x[j] - x[i])


def laplacian(const double[::1] u, double inv_h2):
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t i
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    for i in range(n):
        out[i] = (u[(i - 1 + n) % n] - 2.0 * u[i] + u[(i + 1) % n]) * inv_h2
    return out_arr


cdef inline void _upwind3(const double[::1] w, double[::1] out, double scale,
                          int transport, bint accumulate) noexcept nogil:
    cdef Py_ssize_t n = w.shape[0]
    cdef Py_ssize_t i
    cdef double val
    for i in range(n):
        if transport > 0:
            val = (2.0 * w[(i + 1) % n] + 3.0 * w[i] - 6.0 * w[(i - 1 + n) % n]
                   + w[(i - 2 + 2 * n) % n])
        else:
            val = (-2.0 * w[(i - 1 + n) % n] - 3.0 * w[i] + 6.0 * w[(i + 1) % n]
                   - w[(i + 2) % n])
        if accumulate:
            out[i] += scale * val
        else:
            out[i] = scale * val


def upwind3(const double[::1] u, double inv_6h, int transport):
    out_arr = np.empty(u.shape[0])
    cdef double[::1] out = out_arr
    _upwind3(u, out, inv_6h, transport, False)
    return out_arr


def burgers_rhs(const double[::1] u, double inv_h2, double adv_coef,
                double inv_6h, int transport):
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t i
    out_arr = np.empty(n)
    sq_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef double[::1] sq = sq_arr
    for i in range(n):
        sq[i] = u[i] * u[i]
        out[i] = (u[(i - 1 + n) % n] - 2.0 * u[i] + u[(i + 1) % n]) * inv_h2
    _upwind3(sq, out, adv_coef * inv_6h, transport, True)
    return out_arr


def allen_cahn_rhs(const double[::1] u, double inv_h2, double react):
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t i
    cdef double ui
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    for i in range(n):
        ui = u[i]
        out[i] = ((u[(i - 1 + n) % n] - 2.0 * ui + u[(i + 1) % n]) * inv_h2
                  + react * (ui - ui * ui * ui))
    return out_arr


def dd_taylor_exp(const double complex[::1] x, double complex b, double complex scale,
                  double rtol, Py_ssize_t max_extra):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, k = 0
    cdef double complex prev, cur, fac
    cdef bint done
    d_arr = np.zeros(n, dtype=np.complex128)
    w_arr = np.zeros(n, dtype=np.complex128)
    cdef double complex[::1] d = d_arr
    cdef double complex[::1] w = w_arr
    w[0] = scale
    d[0] = scale
    while k < n - 1 + max_extra:
        k += 1
        fac = b / k
        done = k >= n - 1
        prev = 0.0
        for i in range(n):
            cur = w[i]
            w[i] = (x[i] * cur + prev) * fac
            prev = cur
            d[i] = d[i] + w[i]
            if done and hypot(w[i].real, w[i].imag) > rtol * hypot(d[i].real, d[i].imag):
                done = False
        if done:
            break
    return d_arr, k
