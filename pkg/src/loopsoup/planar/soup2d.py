"""Cutoff Brownian loop soup in the unit disc and its clusters.

Loops come from the whole-plane loop measure ``dz dt / (2 pi t^2)`` times the
Brownian-bridge law, restricted to durations in ``[t_min, t_max]`` and roots in
a bounded region; loops leaving the unit disc are dropped, which is exact by
the restriction property.  Clusters join loops whose polylines come within a
proximity ``delta`` of each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError
from ..kernels import cluster_segments
from ..rng import RngStream
from .geometry import Disc, Point2, UNIT_DISC

WINDING_SLACK = 0.01


# ---------------------------------------------------------------------------
# loops


@dataclass(frozen=True)
class LoopPath:
    """Closed polyline of a Brownian loop; ``points[0] == points[-1] == root``."""

    root: Point2
    duration: float
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 17:
            raise DomainError("a loop needs at least 16 steps of 2D points")
        if not np.array_equal(pts[0], pts[-1]) or not np.all(np.isfinite(pts)):
            raise DomainError("loop polyline must be closed and finite")
        if not self.duration > 0:
            raise DomainError("duration must be positive")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "root", Point2.of(self.root))

    @property
    def n_steps(self) -> int:
        return self.points.shape[0] - 1

    @property
    def default_delta(self) -> float:
        return 2.0 * math.sqrt(self.duration / self.n_steps)

    @property
    def farthest_index(self) -> int:
        """Index of the point farthest from the origin (the rooting convention)."""
        return int(np.argmax(np.hypot(self.points[:, 0], self.points[:, 1])))

    @property
    def diameter(self) -> float:
        p = self.points
        return float(np.max(np.hypot(p[:, None, 0] - p[None, :, 0], p[:, None, 1] - p[None, :, 1])))


def _bridges(gen, durations, n_steps):
    """Brownian bridges from 0 to 0, shape (n_loops, n_steps + 1, 2)."""
    n = durations.size
    dt = (durations / n_steps)[:, None, None]
    inc = gen.standard_normal((n, n_steps, 2)) * np.sqrt(dt)
    w = np.concatenate([np.zeros((n, 1, 2)), np.cumsum(inc, axis=1)], axis=1)
    frac = (np.arange(n_steps + 1) / n_steps)[None, :, None]
    b = w - frac * w[:, -1:, :]
    b[:, -1, :] = 0.0
    return b


def sample_loop(duration: float, root, n_steps: int, rng: RngStream) -> LoopPath:
    """Discretized Brownian bridge of the given duration rooted at ``root``."""
    if n_steps < 16:
        raise DomainError("n_steps must be at least 16")
    if not duration > 0:
        raise DomainError("duration must be positive")
    root = Point2.of(root)
    b = _bridges(rng.generator(), np.array([float(duration)]), n_steps)[0]
    b += (root.x, root.y)
    b[-1] = b[0]
    return LoopPath(root, float(duration), b)


def soup_loop_mass(theta: float, area: float, t_min: float, t_max: float) -> float:
    """Expected number of loops before rejection: theta area (1/t_min - 1/t_max) / (2 pi)."""
    if not (theta > 0 and area > 0 and 0 < t_min < t_max):
        raise DomainError("need theta > 0, area > 0 and 0 < t_min < t_max")
    return theta * area * (1.0 / t_min - 1.0 / t_max) / (2.0 * math.pi)


@dataclass
class LoopSoup2D:
    """Retained loops with uniform thinning marks for coupling across theta."""

    theta: float
    loops: list
    marks: np.ndarray
    t_min: float
    t_max: float
    diam_min: float
    n_proposed: int
    n_left_disc: int
    n_too_small: int

    def thin(self, theta: float) -> "LoopSoup2D":
        """Soup at a smaller intensity: keep loops with mark < theta / self.theta."""
        if not 0 < theta <= self.theta:
            raise DomainError("thinning needs 0 < theta <= current theta")
        keep = self.marks < theta / self.theta
        loops = [l for l, k in zip(self.loops, keep) if k]
        return LoopSoup2D(theta, loops, self.marks[keep], self.t_min, self.t_max,
                          self.diam_min, self.n_proposed, self.n_left_disc, self.n_too_small)

    def summary(self) -> dict:
        return {"theta": self.theta, "kept": len(self.loops), "proposed": self.n_proposed,
                "left_disc": self.n_left_disc, "too_small": self.n_too_small}


def sample_loop_soup_2d(theta: float, region: Disc = UNIT_DISC, t_min: float = 1e-3,
                        t_max: float = 1.0, diam_min: float = 0.0, rng: RngStream | None = None,
                        n_steps: int = 64) -> LoopSoup2D:
    """Poisson loop soup with roots in ``region`` and durations in [t_min, t_max].

    Durations have density proportional to t^-2 and roots are uniform in the
    region.  Loops leaving the unit disc or with diameter below ``diam_min``
    are discarded and counted.
    """
    if rng is None:
        raise DomainError("an RngStream is required")
    if n_steps < 16:
        raise DomainError("n_steps must be at least 16")
    mass = soup_loop_mass(theta, region.area, t_min, t_max)
    gen = rng.generator()
    n = int(gen.poisson(mass))
    # 1/t is uniform on [1/t_max, 1/t_min]
    inv = 1.0 / t_max + (1.0 / t_min - 1.0 / t_max) * gen.random(n)
    durations = 1.0 / inv
    rad = region.radius * np.sqrt(gen.random(n))
    ang = 2.0 * math.pi * gen.random(n)
    roots = np.column_stack([region.center.x + rad * np.cos(ang),
                             region.center.y + rad * np.sin(ang)])
    marks = gen.random(n)
    paths = _bridges(gen, durations, n_steps) + roots[:, None, :]
    paths[:, -1, :] = paths[:, 0, :]
    d2 = np.max((paths[:, :, 0] - region.center.x) ** 2 + (paths[:, :, 1] - region.center.y) ** 2, axis=1)
    inside = d2 < region.radius ** 2
    ext = np.ptp(paths, axis=1)
    # diam <= bbox diagonal, and diam >= the longer bbox side
    big = np.hypot(ext[:, 0], ext[:, 1]) >= diam_min
    loops, kept_marks, too_small = [], [], 0
    for i in np.flatnonzero(inside):
        if not big[i]:
            too_small += 1
            continue
        if diam_min > 0 and np.max(ext[i]) < diam_min:
            loop = LoopPath(Point2(*roots[i]), float(durations[i]), paths[i])
            if loop.diameter < diam_min:
                too_small += 1
                continue
        loops.append(LoopPath(Point2(*roots[i]), float(durations[i]), paths[i]))
        kept_marks.append(marks[i])
    return LoopSoup2D(theta, loops, np.array(kept_marks), t_min, t_max, diam_min,
                      n, int(n - inside.sum()), too_small)


# ---------------------------------------------------------------------------
# clusters


@dataclass
class ClusterForest:
    """Union-find over loop indices."""

    parent: np.ndarray
    rank: np.ndarray
    proximity_delta: float | np.ndarray

    @classmethod
    def singletons(cls, n: int, proximity_delta=0.0) -> "ClusterForest":
        return cls(np.arange(n, dtype=np.int64), np.zeros(n, dtype=np.int64), proximity_delta)

    @classmethod
    def from_labels(cls, labels, proximity_delta) -> "ClusterForest":
        labels = np.asarray(labels, dtype=np.int64)
        rank = np.zeros(labels.size, dtype=np.int64)
        roots = np.unique(labels)
        rank[roots] = (np.bincount(labels, minlength=labels.size)[roots] > 1).astype(np.int64)
        return cls(labels.copy(), rank, proximity_delta)

    def __len__(self):
        return self.parent.size

    def find(self, i: int) -> int:
        p = self.parent
        root = i
        while p[root] != root:
            root = p[root]
        while p[i] != root:
            p[i], i = root, p[i]
        return int(root)

    def union(self, i: int, j: int) -> int:
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return ri
        if self.rank[ri] < self.rank[rj]:
            ri, rj = rj, ri
        self.parent[rj] = ri
        if self.rank[ri] == self.rank[rj]:
            self.rank[ri] += 1
        return ri

    def connected(self, i: int, j: int) -> bool:
        return self.find(i) == self.find(j)

    def labels(self) -> np.ndarray:
        return np.array([self.find(i) for i in range(len(self))], dtype=np.int64)

    def components(self) -> list[list[int]]:
        """Clusters as sorted index lists, ordered by smallest member."""
        groups: dict[int, list[int]] = {}
        for i, r in enumerate(self.labels().tolist()):
            groups.setdefault(r, []).append(i)
        return sorted(groups.values(), key=lambda g: g[0])


def _segments(loops):
    seg = np.concatenate([np.hstack([l.points[:-1], l.points[1:]]) for l in loops])
    owner = np.concatenate([np.full(l.n_steps, i, dtype=np.int64) for i, l in enumerate(loops)])
    return np.ascontiguousarray(seg), owner


def _grid_cells(seg, seg_delta):
    """Register each segment in every cell its delta/2-padded bounding box touches."""
    lengths = np.hypot(seg[:, 2] - seg[:, 0], seg[:, 3] - seg[:, 1])
    h = max(2.0 * float(np.median(lengths)), 2.0 * float(np.median(seg_delta)), 1e-12)
    pad = 0.5 * seg_delta
    x0 = np.floor((np.minimum(seg[:, 0], seg[:, 2]) - pad) / h).astype(np.int64)
    x1 = np.floor((np.maximum(seg[:, 0], seg[:, 2]) + pad) / h).astype(np.int64)
    y0 = np.floor((np.minimum(seg[:, 1], seg[:, 3]) - pad) / h).astype(np.int64)
    y1 = np.floor((np.maximum(seg[:, 1], seg[:, 3]) + pad) / h).astype(np.int64)
    nx, ny = x1 - x0 + 1, y1 - y0 + 1
    cnt = nx * ny
    sid = np.repeat(np.arange(seg.shape[0]), cnt)
    local = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
    cx = x0[sid] + local // ny[sid]
    cy = y0[sid] + local % ny[sid]
    key = (cx - cx.min()) * (int(cy.max() - cy.min()) + 1) + (cy - cy.min())
    order = np.lexsort((sid, key))
    key, sid = key[order], sid[order]
    bounds = np.flatnonzero(np.diff(key)) + 1
    starts = np.concatenate([[0], bounds, [key.size]]).astype(np.int64)
    sizes = np.diff(starts)
    # cells with a single segment cannot produce pairs
    multi = np.flatnonzero(sizes > 1)
    members = np.concatenate([sid[starts[c]:starts[c + 1]] for c in multi]) if multi.size else np.empty(0, np.int64)
    cell_starts = np.concatenate([[0], np.cumsum(sizes[multi])]).astype(np.int64)
    return np.ascontiguousarray(members, dtype=np.int64), cell_starts


def build_clusters(loops, proximity_delta: float | None = None) -> ClusterForest:
    """Merge loops whose polylines come within the proximity threshold.

    With a scalar ``proximity_delta`` every pair uses it.  With ``None`` each
    loop carries ``2 sqrt(duration / n_steps)`` and a pair uses the smaller of
    its two values.
    """
    loops = list(loops)
    n = len(loops)
    if n == 0:
        return ClusterForest.singletons(0, proximity_delta if proximity_delta is not None else 0.0)
    if proximity_delta is None:
        per_loop = np.array([l.default_delta for l in loops])
        delta_rec = per_loop
    else:
        if not proximity_delta > 0:
            raise DomainError("proximity_delta must be positive")
        per_loop = np.full(n, float(proximity_delta))
        delta_rec = float(proximity_delta)
    seg, owner = _segments(loops)
    seg_delta = np.ascontiguousarray(per_loop[owner])
    members, cell_starts = _grid_cells(seg, seg_delta)
    labels = cluster_segments(seg, owner, seg_delta, members, cell_starts, n)
    return ClusterForest.from_labels(labels, delta_rec)


def _loop_radii(loops, center=(0.0, 0.0)):
    cx, cy = center
    rmin = np.empty(len(loops))
    rmax = np.empty(len(loops))
    for i, l in enumerate(loops):
        r = np.hypot(l.points[:, 0] - cx, l.points[:, 1] - cy)
        rmin[i], rmax[i] = r.min(), r.max()
    return rmin, rmax


def crossing_event(forest: ClusterForest, loops, r_in: float, r_out: float,
                   center=(0.0, 0.0), radii=None) -> bool:
    """True iff one cluster has a loop point within r_in and one beyond r_out."""
    if not 0 < r_in < r_out:
        raise DomainError("need 0 < r_in < r_out")
    loops = list(loops)
    if not loops:
        return False
    rmin, rmax = radii if radii is not None else _loop_radii(loops, center)
    lab = forest.labels()
    inner = np.zeros(len(loops), dtype=bool)
    outer = np.zeros(len(loops), dtype=bool)
    np.logical_or.at(inner, lab, rmin <= r_in)
    np.logical_or.at(outer, lab, rmax >= r_out)
    return bool(np.any(inner & outer))


# ---------------------------------------------------------------------------
# Monte Carlo drivers


@dataclass
class SoupConfig:
    t_min: float = 1e-3
    t_max: float = 1.0
    n_steps: int = 64
    diam_min: float = 0.0
    proximity_delta: float | None = None


def crossing_scan(thetas, annuli, n_soups: int, rng: RngStream,
                  config: SoupConfig | None = None) -> list[dict]:
    """Crossing-by-cluster frequencies for each (theta, annulus).

    Each replica draws one soup at the largest theta and thins it, so the
    estimates are coupled and monotone in theta replica by replica.
    """
    cfg = config or SoupConfig()
    thetas = sorted(float(t) for t in thetas)
    if not thetas or not annuli or n_soups < 1:
        raise DomainError("need thetas, annuli and n_soups >= 1")
    hits = np.zeros((len(thetas), len(annuli)), dtype=np.int64)
    for k in range(n_soups):
        soup = sample_loop_soup_2d(thetas[-1], UNIT_DISC, cfg.t_min, cfg.t_max, cfg.diam_min,
                                   rng.substream(k), cfg.n_steps)
        for i, th in enumerate(thetas):
            sub = soup.thin(th) if th < thetas[-1] else soup
            forest = build_clusters(sub.loops, cfg.proximity_delta)
            radii = _loop_radii(sub.loops) if sub.loops else None
            for j, (r_in, r_out) in enumerate(annuli):
                hits[i, j] += crossing_event(forest, sub.loops, r_in, r_out, radii=radii)
    rows = []
    delta = "per-loop" if cfg.proximity_delta is None else cfg.proximity_delta
    for i, th in enumerate(thetas):
        for j, (r_in, r_out) in enumerate(annuli):
            p = hits[i, j] / n_soups
            rows.append({"theta": th, "r_in": r_in, "r_out": r_out, "t_min": cfg.t_min,
                         "n": n_soups, "estimate": float(p),
                         "stderr": math.sqrt(p * (1 - p) / n_soups), "delta": delta})
    return rows


def winding_number(points: np.ndarray, center=(0.0, 0.0)) -> float:
    """Total signed angle (radians) swept around ``center`` by a closed polyline."""
    x = points[:, 0] - center[0]
    y = points[:, 1] - center[1]
    cross = x[:-1] * y[1:] - y[:-1] * x[1:]
    dot = x[:-1] * x[1:] + y[:-1] * y[1:]
    return float(np.sum(np.arctan2(cross, dot)))


def _min_distance_to_point(points, center=(0.0, 0.0)) -> float:
    """Distance from ``center`` to the polyline (segments, not just vertices)."""
    a = points[:-1] - center
    v = points[1:] - points[:-1]
    L = np.einsum("ij,ij->i", v, v)
    t = np.clip(-np.einsum("ij,ij->i", a, v) / np.where(L > 0, L, 1.0), 0.0, 1.0)
    closest = a + t[:, None] * v
    return float(np.sqrt(np.einsum("ij,ij->i", closest, closest).min()))


def surrounds(loop: LoopPath, r: float, center=(0.0, 0.0)) -> bool:
    """Does the loop disconnect r D from the unit circle without touching r D?"""
    if abs(winding_number(loop.points, center)) < 2 * math.pi - WINDING_SLACK:
        return False
    return _min_distance_to_point(loop.points, center) > r


@dataclass
class SurroundScan:
    theta: float
    radii: np.ndarray
    estimate: np.ndarray
    stderr: np.ndarray
    n: int
    slope: float
    slope_stderr: float
    rows: list = field(default_factory=list)


def surround_probability_scan(theta: float, radii, n_samples: int, rng: RngStream,
                              config: SoupConfig | None = None) -> SurroundScan:
    """Frequency that some loop surrounds r D without touching it, per radius.

    The exponent ``c`` is the slope of ``log(1 - estimate)`` against ``log r``
    (positive when the bound ``1 - r^c`` holds); it comes from a weighted
    least-squares fit with the delta-method variances.
    """
    cfg = config or SoupConfig()
    radii = np.asarray(sorted(float(r) for r in radii))
    if radii.size < 2 or np.any(radii <= 0) or np.any(radii >= 0.1):
        raise DomainError("need at least two radii in (0, 1/10)")
    hits = np.zeros(radii.size, dtype=np.int64)
    for k in range(n_samples):
        soup = sample_loop_soup_2d(theta, UNIT_DISC, cfg.t_min, cfg.t_max, cfg.diam_min,
                                   rng.substream(k), cfg.n_steps)
        best = np.zeros(radii.size, dtype=bool)
        for loop in soup.loops:
            if abs(winding_number(loop.points)) < 2 * math.pi - WINDING_SLACK:
                continue
            dmin = _min_distance_to_point(loop.points)
            best |= dmin > radii
        hits += best
    p = hits / n_samples
    se = np.sqrt(p * (1 - p) / n_samples)
    q = 1.0 - p
    ok = (q > 0) & (p > 0)
    slope, slope_se = float("nan"), float("nan")
    if ok.sum() >= 2:
        x, y = np.log(radii[ok]), np.log(q[ok])
        w = q[ok] / se[ok]  # 1 / sd of log q
        coef, cov = np.polyfit(x, y, 1, w=w, cov="unscaled")
        slope, slope_se = float(coef[0]), float(math.sqrt(cov[0, 0]))
    rows = [{"theta": theta, "r": float(r), "estimate": float(e), "stderr": float(s), "n": n_samples}
            for r, e, s in zip(radii, p, se)]
    return SurroundScan(theta, radii, p, se, n_samples, slope, slope_se, rows)


@dataclass(frozen=True)
class EventSpec:
    """An increasing event: annulus crossing by a cluster, or the sure event."""

    kind: str
    r_in: float = 0.0
    r_out: float = 0.0

    @classmethod
    def crossing(cls, r_in, r_out):
        return cls("crossing", float(r_in), float(r_out))

    @classmethod
    def always(cls):
        return cls("always")


@dataclass
class FkgReport:
    p_a: float
    p_b: float
    p_ab: float
    covariance: float
    stderr: float
    n: int

    @property
    def z(self) -> float:
        return self.covariance / self.stderr if self.stderr > 0 else 0.0


def fkg_spot_check(theta: float, events, n_samples: int, rng: RngStream,
                   config: SoupConfig | None = None) -> FkgReport:
    """Estimate P(A and B) - P(A) P(B) for two increasing events.

    The standard error uses the influence function ``ab - p_b a - p_a b``.
    """
    cfg = config or SoupConfig()
    ev_a, ev_b = events
    a = np.zeros(n_samples, dtype=bool)
    b = np.zeros(n_samples, dtype=bool)
    for k in range(n_samples):
        soup = sample_loop_soup_2d(theta, UNIT_DISC, cfg.t_min, cfg.t_max, cfg.diam_min,
                                   rng.substream(k), cfg.n_steps)
        forest = build_clusters(soup.loops, cfg.proximity_delta)
        radii = _loop_radii(soup.loops) if soup.loops else None
        for ev, out in ((ev_a, a), (ev_b, b)):
            if ev.kind == "always":
                out[k] = True
            elif ev.kind == "crossing":
                out[k] = crossing_event(forest, soup.loops, ev.r_in, ev.r_out, radii=radii)
            else:
                raise DomainError(f"unknown event kind {ev.kind!r}")
    fa, fb = a.astype(float), b.astype(float)
    pa, pb, pab = fa.mean(), fb.mean(), (fa * fb).mean()
    infl = fa * fb - pb * fa - pa * fb
    se = float(infl.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else float("nan")
    return FkgReport(float(pa), float(pb), float(pab), float(pab - pa * pb), se, n_samples)
