"""Pure-numpy versions of the compiled kernels.

Semantics match ``loopsoup._kernels`` exactly; only speed differs.  Covering
and clustering results are identical between the two.  Walk-on-spheres paths
can differ in the last bits because numpy and libm trig disagree at the ulp
level, so only the statistics agree.
"""

from __future__ import annotations

import numpy as np

from .rng import counter_uniforms

TWO_PI = 2.0 * np.pi
STEP_STRIDE = 1 << 24
PAIR_CHUNK = 1 << 20


def cover_scan(a, b, starts, p, q):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    starts = np.asarray(starts, dtype=np.int64)
    n_rep = len(starts) - 1
    covered = np.zeros(n_rep, dtype=np.uint8)
    last = np.full(n_rep, np.nan)
    for r in range(n_rep):
        lo, hi = starts[r], starts[r + 1]
        order = np.argsort(a[lo:hi], kind="stable")
        aa = a[lo:hi][order]
        bb = b[lo:hi][order]
        reach_before = np.maximum(p, np.concatenate(([p], np.maximum.accumulate(bb)[:-1])))
        gap = (aa > reach_before) & (reach_before < q)
        final = max(p, bb.max()) if len(bb) else p
        if final < q:
            last[r] = q
        elif gap.any():
            last[r] = min(aa[np.flatnonzero(gap)[-1]], q)
        covered[r] = np.isnan(last[r])
    return covered, last


def wos_run(circles, sx, sy, start_radius, key, walk_offset, n_walks, max_steps):
    circles = np.asarray(circles, dtype=float)
    idx = np.arange(n_walks, dtype=np.uint64) + np.uint64(walk_offset)
    base = idx * np.uint64(STEP_STRIDE)
    if start_radius > 0:
        phi = TWO_PI * counter_uniforms(key, base)
        x = sx + start_radius * np.cos(phi)
        y = sy + start_radius * np.sin(phi)
    else:
        x = np.full(n_walks, float(sx))
        y = np.full(n_walks, float(sy))
    outcome = np.full(n_walks, -1, dtype=np.int32)
    steps = np.zeros(n_walks, dtype=np.int64)
    active = np.arange(n_walks)
    cx, cy, rad, inside, shell = (circles[:, i][:, None] for i in range(5))
    k = 0
    while active.size:
        xa, ya = x[active], y[active]
        d = np.sqrt((xa - cx) ** 2 + (ya - cy) ** 2)
        d = np.where(inside != 0, rad - d, d - rad)
        cap = d <= shell
        hit_any = cap.any(axis=0)
        if hit_any.any():
            first = np.argmax(cap, axis=0)
            done = active[hit_any]
            outcome[done] = first[hit_any].astype(np.int32)
            steps[done] = k
        keep = ~hit_any
        active = active[keep]
        if k >= max_steps:
            steps[active] = k
            break
        rmin = d[:, keep].min(axis=0)
        k += 1
        phi = TWO_PI * counter_uniforms(key, base[active] + np.uint64(k))
        x[active] += rmin * np.cos(phi)
        y[active] += rmin * np.sin(phi)
    return outcome, steps


def _pt_seg2(px, py, ax, ay, bx, by):
    vx, vy = bx - ax, by - ay
    wx, wy = px - ax, py - ay
    L = vx * vx + vy * vy
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(L > 0, (wx * vx + wy * vy) / np.where(L > 0, L, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    wx = px - (ax + t * vx)
    wy = py - (ay + t * vy)
    return wx * wx + wy * wy


def segment_distance(ax, ay, bx, by, cx, cy, dx, dy):
    """Minimal Euclidean distance between segments [a,b] and [c,d] (vectorized)."""
    def orient(px, py, qx, qy, rx, ry):
        return (qx - px) * (ry - py) - (qy - py) * (rx - px)

    o1 = orient(ax, ay, bx, by, cx, cy)
    o2 = orient(ax, ay, bx, by, dx, dy)
    o3 = orient(cx, cy, dx, dy, ax, ay)
    o4 = orient(cx, cy, dx, dy, bx, by)
    cross = (((o1 > 0) & (o2 < 0)) | ((o1 < 0) & (o2 > 0))) & (
        ((o3 > 0) & (o4 < 0)) | ((o3 < 0) & (o4 > 0))
    )
    m = np.minimum.reduce([
        _pt_seg2(ax, ay, cx, cy, dx, dy),
        _pt_seg2(bx, by, cx, cy, dx, dy),
        _pt_seg2(cx, cy, ax, ay, bx, by),
        _pt_seg2(dx, dy, ax, ay, bx, by),
    ])
    return np.where(cross, 0.0, np.sqrt(m))


def _cell_pairs(cell_members, cell_starts):
    """Distinct segment pairs sharing a grid cell, as two index arrays."""
    members = np.asarray(cell_members, dtype=np.int64)
    starts = np.asarray(cell_starts, dtype=np.int64)
    sizes = np.diff(starts)
    out_i, out_j = [], []
    for k in np.unique(sizes[sizes > 1]):
        cells = np.flatnonzero(sizes == k)
        M = members[starts[cells][:, None] + np.arange(k)]
        iu, ju = np.triu_indices(int(k), 1)
        out_i.append(M[:, iu].ravel())
        out_j.append(M[:, ju].ravel())
    if not out_i:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    i, j = np.concatenate(out_i), np.concatenate(out_j)
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    code = np.unique(lo * (int(hi.max()) + 1) + hi)
    return code // (int(hi.max()) + 1), code % (int(hi.max()) + 1)


def cluster_segments(seg, loop_of_seg, seg_delta, cell_members, cell_starts, n_loops):
    seg = np.asarray(seg, dtype=float)
    loop_of_seg = np.asarray(loop_of_seg, dtype=np.int64)
    seg_delta = np.asarray(seg_delta, dtype=float)
    parent = np.arange(n_loops, dtype=np.int64)
    i, j = _cell_pairs(cell_members, cell_starts)
    keep = loop_of_seg[i] != loop_of_seg[j]
    i, j = i[keep], j[keep]
    close = np.zeros(i.size, dtype=bool)
    for lo in range(0, i.size, PAIR_CHUNK):
        a, b = i[lo:lo + PAIR_CHUNK], j[lo:lo + PAIR_CHUNK]
        d = segment_distance(seg[a, 0], seg[a, 1], seg[a, 2], seg[a, 3],
                             seg[b, 0], seg[b, 1], seg[b, 2], seg[b, 3])
        close[lo:lo + PAIR_CHUNK] = d <= np.minimum(seg_delta[a], seg_delta[b])
    li, lj = loop_of_seg[i[close]], loop_of_seg[j[close]]

    def find(v):
        root = v
        while parent[root] != root:
            root = parent[root]
        while parent[v] != root:
            parent[v], v = root, parent[v]
        return root

    for u, w in zip(li.tolist(), lj.tolist()):
        ru, rw = find(u), find(w)
        if ru != rw:
            if ru < rw:
                parent[rw] = ru
            else:
                parent[ru] = rw
    for v in range(n_loops):
        parent[v] = find(v)
    return parent


def counter_uniforms_kernel(key, counters):
    return counter_uniforms(key, counters)
