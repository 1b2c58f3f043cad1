# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: counter-based RNG, Euler-Maruyama stepping, tridiagonal sweeps."""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport sin, cos, exp, log, sqrt, fabs, INFINITY, NAN
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef extern from *:
    """
    #include <stdint.h>
    typedef unsigned __int128 sd_u128;
    static inline void sd_philox(const uint64_t ctr_in[4], uint64_t k0, uint64_t k1, uint64_t out[4]) {
        uint64_t c0 = ctr_in[0], c1 = ctr_in[1], c2 = ctr_in[2], c3 = ctr_in[3];
        for (int r = 0; r < 10; ++r) {
            if (r) { k0 += 0x9E3779B97F4A7C15ULL; k1 += 0xBB67AE8584CAA73BULL; }
            sd_u128 p0 = (sd_u128)0xD2E7470EE14C6C93ULL * c0;
            sd_u128 p1 = (sd_u128)0xCA5A826395121157ULL * c2;
            uint64_t h0 = (uint64_t)(p0 >> 64), l0 = (uint64_t)p0;
            uint64_t h1 = (uint64_t)(p1 >> 64), l1 = (uint64_t)p1;
            c0 = h1 ^ c1 ^ k0; c1 = l1; c2 = h0 ^ c3 ^ k1; c3 = l0;
        }
        out[0] = c0; out[1] = c1; out[2] = c2; out[3] = c3;
    }
    static inline double sd_unit(uint64_t x) {
        return ((double)(x >> 11) + 0.5) * 1.1102230246251565e-16;
    }
    /* four standard normals for steps 4*block .. 4*block+3 of one path */
    static inline void sd_normals4(uint64_t block, uint64_t path, uint64_t stream,
                                   uint64_t k0, uint64_t k1, double z[4]) {
        uint64_t c[4] = {block, path, stream, 0}, o[4];
        sd_philox(c, k0, k1, o);
        const double two_pi = 6.283185307179586;
        double r0 = sqrt(-2.0 * log(sd_unit(o[0]))), t0 = two_pi * sd_unit(o[1]);
        double r1 = sqrt(-2.0 * log(sd_unit(o[2]))), t1 = two_pi * sd_unit(o[3]);
        z[0] = r0 * cos(t0); z[1] = r0 * sin(t0);
        z[2] = r1 * cos(t1); z[3] = r1 * sin(t1);
    }
    static inline void sd_uniforms4(uint64_t block, uint64_t path, uint64_t stream,
                                    uint64_t k0, uint64_t k1, double u[4]) {
        uint64_t c[4] = {block, path, stream, 0}, o[4];
        sd_philox(c, k0, k1, o);
        for (int i = 0; i < 4; ++i) u[i] = sd_unit(o[i]);
    }
    """
    void sd_philox(const uint64_t* ctr_in, uint64_t k0, uint64_t k1, uint64_t* out) nogil
    void sd_normals4(uint64_t block, uint64_t path, uint64_t stream, uint64_t k0, uint64_t k1, double* z) nogil
    void sd_uniforms4(uint64_t block, uint64_t path, uint64_t stream, uint64_t k0, uint64_t k1, double* u) nogil


def philox4x64(cnp.ndarray counters, uint64_t k0, uint64_t k1):
    """Philox4x64-10 applied row-wise to an (N, 4) uint64 counter array."""
    cdef cnp.uint64_t[:, ::1] c = np.ascontiguousarray(counters, dtype=np.uint64)
    out = np.empty((c.shape[0], 4), dtype=np.uint64)
    cdef cnp.uint64_t[:, ::1] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(c.shape[0]):
            sd_philox(<uint64_t*>&c[i, 0], k0, k1, <uint64_t*>&o[i, 0])
    return out


def normals(cnp.ndarray paths, int64_t n_steps, uint64_t k0, uint64_t k1):
    """The Gaussian increments of the given paths, shape (len(paths), n_steps)."""
    cdef cnp.uint64_t[::1] p = np.ascontiguousarray(paths, dtype=np.uint64)
    out = np.empty((p.shape[0], n_steps))
    cdef double[:, ::1] o = out
    cdef double z[4]
    cdef Py_ssize_t i
    cdef int64_t k
    with nogil:
        for i in range(p.shape[0]):
            for k in range(n_steps):
                if k % 4 == 0:
                    sd_normals4(<uint64_t>(k // 4), p[i], 0, k0, k1, z)
                o[i, k] = z[k % 4]
    return out


cdef inline double drift(double y, const double* om, const double* a, const double* b, Py_ssize_t nh) noexcept nogil:
    cdef double g = 0.0, ph
    cdef Py_ssize_t h
    for h in range(nh):
        ph = om[h] * y
        g = g + om[h] * (b[h] * cos(ph) - a[h] * sin(ph))
    return g


cdef void _exit_path(const double* om, const double* pa, const double* pb, Py_ssize_t nh,
                     const double* radii, const cnp.int64_t* max_steps, Py_ssize_t nr, int64_t cap,
                     double dt, uint64_t k0, uint64_t k1, uint64_t path, bint bridge,
                     double* row) noexcept nogil:
    cdef double y = 0.0, yn, r, p, sq = sqrt(dt)
    cdef double z[4]
    cdef double u[4]
    cdef Py_ssize_t j, first = 0
    cdef int64_t k = 0
    while first < nr and k < cap:
        if k % 4 == 0:
            sd_normals4(<uint64_t>(k // 4), path, 0, k0, k1, z)
            if bridge:
                sd_uniforms4(<uint64_t>(k // 4), path, 1, k0, k1, u)
        yn = y - drift(y, om, pa, pb, nh) * dt + sq * z[k % 4]
        j = first
        while j < nr:
            r = radii[j]
            if fabs(yn) >= r:
                row[j] = (k + 1) * dt
            elif bridge:
                p = exp(-2.0 * (r - y) * (r - yn) / dt) + exp(-2.0 * (r + y) * (r + yn) / dt)
                if u[k % 4] < p:
                    row[j] = (k + 1) * dt
                else:
                    break
            else:
                break
            j += 1
        # radii and caps are both ascending, so resolved radii form a prefix
        first = j
        while first < nr and k + 1 >= max_steps[first]:
            first += 1
        y = yn
        k += 1


def exit_times(double[::1] omega, double[::1] a, double[::1] b, double[::1] radii,
               cnp.int64_t[::1] max_steps, double dt, uint64_t k0, uint64_t k1,
               int64_t path_start, int64_t n_paths, bint bridge, int threads):
    """First exit times of ``(-r, r)`` for every radius.

    ``radii`` and ``max_steps`` must be ascending. Truncated paths get ``inf``.
    Returns an (n_paths, n_radii) array.
    """
    cdef Py_ssize_t nr = radii.shape[0], nh = omega.shape[0], i
    out = np.full((n_paths, nr), INFINITY)
    cdef double[:, ::1] o = out
    cdef int64_t cap = max_steps[nr - 1] if nr else 0
    cdef const double* om = &omega[0] if nh else NULL
    cdef const double* pa = &a[0] if nh else NULL
    cdef const double* pb = &b[0] if nh else NULL
    if nr == 0 or n_paths == 0:
        return out
    for i in prange(n_paths, nogil=True, schedule="dynamic", chunksize=16, num_threads=threads):
        _exit_path(om, pa, pb, nh, &radii[0], &max_steps[0], nr, cap, dt, k0, k1,
                   <uint64_t>(path_start + i), bridge, &o[i, 0])
    return out


cdef void _positions_path(const double* om, const double* pa, const double* pb, Py_ssize_t nh,
                          const cnp.int64_t* checkpoints, Py_ssize_t nc, double dt,
                          uint64_t k0, uint64_t k1, uint64_t path, double* row) noexcept nogil:
    cdef double y = 0.0, sq = sqrt(dt)
    cdef double z[4]
    cdef Py_ssize_t c
    cdef int64_t k = 0
    for c in range(nc):
        while k < checkpoints[c]:
            if k % 4 == 0:
                sd_normals4(<uint64_t>(k // 4), path, 0, k0, k1, z)
            y = y - drift(y, om, pa, pb, nh) * dt + sq * z[k % 4]
            k += 1
        row[c] = y


def positions_at(double[::1] omega, double[::1] a, double[::1] b, cnp.int64_t[::1] checkpoints,
                 double dt, uint64_t k0, uint64_t k1, int64_t path_start, int64_t n_paths, int threads):
    """Positions after each checkpoint step count (ascending), shape (n_paths, n_checkpoints)."""
    cdef Py_ssize_t nc = checkpoints.shape[0], nh = omega.shape[0], i
    out = np.empty((n_paths, nc))
    cdef double[:, ::1] o = out
    cdef const double* om = &omega[0] if nh else NULL
    cdef const double* pa = &a[0] if nh else NULL
    cdef const double* pb = &b[0] if nh else NULL
    if nc == 0 or n_paths == 0:
        return out
    for i in prange(n_paths, nogil=True, schedule="static", num_threads=threads):
        _positions_path(om, pa, pb, nh, &checkpoints[0], nc, dt, k0, k1,
                        <uint64_t>(path_start + i), &o[i, 0])
    return out


def tridiag_evolve(double[::1] el, double[::1] ed, double[::1] eu,
                   double[::1] il, double[::1] id_, double[::1] iu,
                   double[::1] g, int64_t steps):
    """Apply ``g <- I^{-1} (E g)`` ``steps`` times; E and I tridiagonal.

    ``el[i]``/``eu[i]`` couple row ``i`` to ``i-1``/``i+1`` (el[0], eu[-1] unused).
    The Thomas factorization of ``I`` is computed once.
    """
    cdef Py_ssize_t n = g.shape[0], i
    cdef int64_t s
    cp = np.empty(n)
    inv = np.empty(n)
    rhs = np.empty(n)
    cdef double[::1] c = cp, m = inv, d = rhs
    cdef double piv
    with nogil:
        piv = id_[0]
        m[0] = 1.0 / piv
        c[0] = iu[0] * m[0]
        for i in range(1, n):
            piv = id_[i] - il[i] * c[i - 1]
            m[i] = 1.0 / piv
            c[i] = iu[i] * m[i] if i < n - 1 else 0.0
        for s in range(steps):
            d[0] = ed[0] * g[0] + eu[0] * g[1]
            for i in range(1, n - 1):
                d[i] = el[i] * g[i - 1] + ed[i] * g[i] + eu[i] * g[i + 1]
            d[n - 1] = el[n - 1] * g[n - 2] + ed[n - 1] * g[n - 1]
            g[0] = d[0] * m[0]
            for i in range(1, n):
                g[i] = (d[i] - il[i] * g[i - 1]) * m[i]
            for i in range(n - 2, -1, -1):
                g[i] = g[i] - c[i] * g[i + 1]
    return np.asarray(g)
