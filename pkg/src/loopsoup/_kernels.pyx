# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.

Same signatures and semantics as ``loopsoup._pykernels``; ``loopsoup.kernels``
picks this module when it imports.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, cos, sin, fabs, floor, NAN, INFINITY
from libc.stdint cimport uint64_t, int64_t
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef double TWO_PI = 6.283185307179586
cdef uint64_t STEP_STRIDE = 16777216  # 2**24 draws reserved per walker


cdef inline double counter_uniform(uint64_t key, uint64_t c) noexcept nogil:
    cdef uint64_t z = c * <uint64_t>0x9E3779B97F4A7C15ULL + key
    z = z + <uint64_t>0x9E3779B97F4A7C15ULL
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    z = z ^ (z >> 31)
    return (<double>(z >> 11) + 0.5) * (1.0 / 9007199254740992.0)


def counter_uniforms(uint64_t key, const cnp.uint64_t[::1] counters):
    cdef Py_ssize_t i, n = counters.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = counter_uniform(key, counters[i])
    return out


# ---------------------------------------------------------------------------
# interval covering

ctypedef struct ival:
    double a
    double b


cdef void _bucket_sort(ival* src, ival* dst, cnp.int64_t* count, Py_ssize_t m) noexcept nogil:
    # left ends are close to uniform, so one bucket per element and an
    # insertion pass give expected linear time
    cdef Py_ssize_t i, j, k
    cdef double lo = INFINITY, hi = -INFINITY, scale
    cdef ival tmp
    if m <= 1:
        if m == 1:
            dst[0] = src[0]
        return
    for i in range(m):
        if src[i].a < lo:
            lo = src[i].a
        if src[i].a > hi:
            hi = src[i].a
    scale = m / (hi - lo) if hi > lo else 0.0
    for i in range(m + 1):
        count[i] = 0
    for i in range(m):
        k = <Py_ssize_t>((src[i].a - lo) * scale)
        if k >= m:
            k = m - 1
        count[k + 1] += 1
    for i in range(m):
        count[i + 1] += count[i]
    for i in range(m):
        k = <Py_ssize_t>((src[i].a - lo) * scale)
        if k >= m:
            k = m - 1
        dst[count[k]] = src[i]
        count[k] += 1
    for i in range(1, m):
        tmp = dst[i]
        j = i - 1
        while j >= 0 and dst[j].a > tmp.a:
            dst[j + 1] = dst[j]
            j -= 1
        dst[j + 1] = tmp


def cover_scan(const double[::1] a, const double[::1] b, const cnp.int64_t[::1] starts, double p, double q):
    """Per replica: is [p, q] covered, and the supremum of its uncovered part.

    Replica ``r`` owns intervals ``starts[r]:starts[r+1]``.  The supremum is
    NaN when the segment is covered.
    """
    cdef Py_ssize_t n_rep = starts.shape[0] - 1
    cdef Py_ssize_t r, i, lo, hi, m, max_len = 0
    for r in range(n_rep):
        if starts[r + 1] - starts[r] > max_len:
            max_len = starts[r + 1] - starts[r]
    covered = np.zeros(n_rep, dtype=np.uint8)
    last = np.full(n_rep, np.nan)
    cdef cnp.uint8_t[::1] cov = covered
    cdef double[::1] lst = last
    cdef ival* src = <ival*>malloc((max_len + 1) * sizeof(ival))
    cdef ival* buf = <ival*>malloc((max_len + 1) * sizeof(ival))
    cdef cnp.int64_t* count = <cnp.int64_t*>malloc((max_len + 2) * sizeof(cnp.int64_t))
    if src == NULL or buf == NULL or count == NULL:
        free(src)
        free(buf)
        free(count)
        raise MemoryError()
    cdef double reach, unc
    try:
        with nogil:
            for r in range(n_rep):
                lo = starts[r]
                hi = starts[r + 1]
                m = hi - lo
                for i in range(m):
                    src[i].a = a[lo + i]
                    src[i].b = b[lo + i]
                _bucket_sort(src, buf, count, m)
                reach = p
                unc = NAN
                for i in range(m):
                    if reach >= q:
                        break
                    if buf[i].a > reach:
                        unc = buf[i].a if buf[i].a < q else q
                    if buf[i].b > reach:
                        reach = buf[i].b
                if reach < q:
                    unc = q
                lst[r] = unc
                cov[r] = 1 if unc != unc else 0
    finally:
        free(src)
        free(buf)
        free(count)
    return covered, last


# ---------------------------------------------------------------------------
# walk on spheres

def wos_run(const double[:, ::1] circles, double sx, double sy, double start_radius,
            uint64_t key, int64_t walk_offset, int64_t n_walks, int64_t max_steps):
    """Walk-on-spheres among circles.

    ``circles`` rows are ``(cx, cy, radius, inside, shell)``; ``inside = 1``
    means the walker lives inside that circle (a container), 0 means outside
    (a hole).  The walker starts at ``(sx, sy)``, or uniformly on the circle of
    radius ``start_radius`` around it when that radius is positive.  Returns
    ``(outcome, steps)`` with ``outcome`` the capturing circle's row or -1
    when ``max_steps`` ran out.
    """
    cdef Py_ssize_t nc = circles.shape[0]
    outcome = np.empty(n_walks, dtype=np.int32)
    steps = np.empty(n_walks, dtype=np.int64)
    cdef cnp.int32_t[::1] out = outcome
    cdef cnp.int64_t[::1] st = steps
    cdef int64_t w, k
    cdef Py_ssize_t j
    cdef uint64_t base
    cdef double x, y, dx, dy, d, rmin, phi
    cdef int hit
    with nogil:
        for w in range(n_walks):
            base = <uint64_t>(walk_offset + w) * <uint64_t>STEP_STRIDE
            if start_radius > 0:
                phi = TWO_PI * counter_uniform(key, base)
                x = sx + start_radius * cos(phi)
                y = sy + start_radius * sin(phi)
            else:
                x = sx
                y = sy
            hit = -1
            k = 0
            while k < max_steps:
                rmin = INFINITY
                for j in range(nc):
                    dx = x - circles[j, 0]
                    dy = y - circles[j, 1]
                    d = sqrt(dx * dx + dy * dy)
                    if circles[j, 3] != 0:
                        d = circles[j, 2] - d
                    else:
                        d = d - circles[j, 2]
                    if d <= circles[j, 4]:
                        hit = <int>j
                        break
                    if d < rmin:
                        rmin = d
                if hit >= 0:
                    break
                k += 1
                phi = TWO_PI * counter_uniform(key, base + <uint64_t>k)
                x = x + rmin * cos(phi)
                y = y + rmin * sin(phi)
            out[w] = hit
            st[w] = k
    return outcome, steps


# ---------------------------------------------------------------------------
# segment proximity clustering

cdef inline double _pt_seg2(double px, double py, double ax, double ay,
                            double bx, double by) noexcept nogil:
    cdef double vx = bx - ax, vy = by - ay
    cdef double wx = px - ax, wy = py - ay
    cdef double L = vx * vx + vy * vy
    cdef double t = 0.0
    if L > 0:
        t = (wx * vx + wy * vy) / L
        if t < 0:
            t = 0.0
        elif t > 1:
            t = 1.0
    wx = px - (ax + t * vx)
    wy = py - (ay + t * vy)
    return wx * wx + wy * wy


cdef inline double _orient(double ax, double ay, double bx, double by,
                           double cx, double cy) noexcept nogil:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


cdef double seg_dist(double ax, double ay, double bx, double by,
                     double cx, double cy, double dx, double dy) noexcept nogil:
    cdef double o1 = _orient(ax, ay, bx, by, cx, cy)
    cdef double o2 = _orient(ax, ay, bx, by, dx, dy)
    cdef double o3 = _orient(cx, cy, dx, dy, ax, ay)
    cdef double o4 = _orient(cx, cy, dx, dy, bx, by)
    if ((o1 > 0 and o2 < 0) or (o1 < 0 and o2 > 0)) and ((o3 > 0 and o4 < 0) or (o3 < 0 and o4 > 0)):
        return 0.0
    cdef double m = _pt_seg2(ax, ay, cx, cy, dx, dy)
    cdef double t = _pt_seg2(bx, by, cx, cy, dx, dy)
    if t < m:
        m = t
    t = _pt_seg2(cx, cy, ax, ay, bx, by)
    if t < m:
        m = t
    t = _pt_seg2(dx, dy, ax, ay, bx, by)
    if t < m:
        m = t
    return sqrt(m)


def segment_distance(double ax, double ay, double bx, double by,
                     double cx, double cy, double dx, double dy):
    return seg_dist(ax, ay, bx, by, cx, cy, dx, dy)


cdef inline int64_t _find(int64_t* parent, int64_t i) noexcept nogil:
    cdef int64_t root = i, nxt
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


def cluster_segments(const double[:, ::1] seg, const cnp.int64_t[::1] loop_of_seg,
                     const double[::1] seg_delta, const cnp.int64_t[::1] cell_members,
                     const cnp.int64_t[::1] cell_starts, int64_t n_loops):
    """Union loops whose segments come within ``min(delta_i, delta_j)``.

    ``seg`` rows are ``(ax, ay, bx, by)``.  ``cell_members[cell_starts[c]:
    cell_starts[c+1]]`` lists the segments registered in grid cell ``c``.
    Returns the root label of every loop.
    """
    parent_arr = np.arange(n_loops, dtype=np.int64)
    cdef cnp.int64_t[::1] parent = parent_arr
    cdef Py_ssize_t n_cells = cell_starts.shape[0] - 1
    cdef Py_ssize_t c, i, j, lo, hi
    cdef int64_t si, sj, li, lj, ri, rj
    cdef double thr
    with nogil:
        for c in range(n_cells):
            lo = cell_starts[c]
            hi = cell_starts[c + 1]
            for i in range(lo, hi):
                si = cell_members[i]
                li = loop_of_seg[si]
                for j in range(i + 1, hi):
                    sj = cell_members[j]
                    lj = loop_of_seg[sj]
                    if li == lj:
                        continue
                    ri = _find(&parent[0], li)
                    rj = _find(&parent[0], lj)
                    if ri == rj:
                        continue
                    thr = seg_delta[si] if seg_delta[si] < seg_delta[sj] else seg_delta[sj]
                    if seg_dist(seg[si, 0], seg[si, 1], seg[si, 2], seg[si, 3],
                                seg[sj, 0], seg[sj, 1], seg[sj, 2], seg[sj, 3]) <= thr:
                        if ri < rj:
                            parent[rj] = ri
                        else:
                            parent[ri] = rj
        for i in range(n_loops):
            parent[i] = _find(&parent[0], i)
    return parent_arr
