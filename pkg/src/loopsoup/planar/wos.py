"""Walk-on-spheres hitting probabilities among circles."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError
from ..kernels import wos_run
from ..rng import RngStream
from .geometry import Disc, Point2, UNIT_DISC

WALK_BATCH = 1 << 16
_ULP_GUARD = 8.0 * np.finfo(float).eps


@dataclass(frozen=True)
class AbsorbingDomain:
    """Walker lives inside ``container`` and outside every disc in ``holes``."""

    container: Disc | None = UNIT_DISC
    holes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "holes", tuple(self.holes))


@dataclass
class WosResult:
    estimate: float
    stderr: float
    n: int
    hits: int
    unresolved: int
    mean_steps: float
    shell_rel: float
    per_target: list = field(default_factory=list)


def _shell(disc: Disc, rel: float) -> float:
    # the shell must stay above rounding noise of the distance computation
    scale = max(abs(disc.center), disc.radius)
    return max(rel * disc.radius, _ULP_GUARD * scale)


def _circle_table(targets, domain: AbsorbingDomain, shell_rel: float) -> np.ndarray:
    rows = []
    for d in list(targets) + list(domain.holes):
        rows.append((d.center.x, d.center.y, d.radius, 0.0, _shell(d, shell_rel)))
    if domain.container is not None:
        c = domain.container
        rows.append((c.center.x, c.center.y, c.radius, 1.0, _shell(c, shell_rel)))
    return np.ascontiguousarray(np.array(rows, dtype=float).reshape(-1, 5))


def wos_hitting_prob(start, targets, domain: AbsorbingDomain, n_samples: int,
                     rng: RngStream, start_radius: float = 0.0,
                     shell_rel: float = 1e-6, max_steps: int = 1_000_000,
                     threads: int = 1) -> WosResult:
    """P(hit some target disc before the absorbing set), by walk on spheres.

    The walk starts at ``start``, or uniformly on the circle of radius
    ``start_radius`` around it.  Each circle is detected through a capture
    shell of width ``shell_rel * radius``.  Walks still running after
    ``max_steps`` count as misses and are reported as ``unresolved``.
    """
    targets = [t if isinstance(t, Disc) else Disc(*t) for t in targets]
    if not targets:
        raise DomainError("at least one target disc is required")
    if n_samples < 1 or max_steps < 1:
        raise DomainError("n_samples and max_steps must be positive")
    if domain.container is None and not domain.holes:
        raise DomainError("the absorbing domain is empty; hitting is not a finite-time event")
    if not shell_rel > 0:
        raise DomainError("shell_rel must be positive")
    start = Point2.of(start)
    table = _circle_table(targets, domain, shell_rel)
    key = rng.key
    n_batches = -(-n_samples // WALK_BATCH)

    def batch(k):
        lo = k * WALK_BATCH
        n = min(WALK_BATCH, n_samples - lo)
        out, steps = wos_run(table, start.x, start.y, float(start_radius), key, lo, n, max_steps)
        counts = np.bincount(out + 1, minlength=len(table) + 1)
        return counts, int(steps.sum())

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(batch, range(n_batches)))
    else:
        parts = [batch(k) for k in range(n_batches)]
    counts = np.sum([p[0] for p in parts], axis=0)
    total_steps = sum(p[1] for p in parts)
    per_target = counts[1:1 + len(targets)].tolist()
    hits = int(sum(per_target))
    p = hits / n_samples
    return WosResult(
        estimate=p,
        stderr=math.sqrt(p * (1 - p) / n_samples),
        n=n_samples,
        hits=hits,
        unresolved=int(counts[0]),
        mean_steps=total_steps / n_samples,
        shell_rel=shell_rel,
        per_target=per_target,
    )


def annulus_hit_inner_wos(z_abs: float, r: float, R: float, n_samples: int, rng: RngStream,
                          **kw) -> WosResult:
    """WoS counterpart of :func:`bm_annulus_hit_inner` (start on the positive axis)."""
    if not (0 < r < z_abs < R):
        raise DomainError("need 0 < r < |z| < R")
    domain = AbsorbingDomain(Disc(Point2(0, 0), R))
    return wos_hitting_prob(Point2(z_abs, 0.0), [Disc(Point2(0, 0), r)], domain, n_samples, rng, **kw)


def polar3_leading_value(sep: float, r: float, ry: float, R: float = 1.0,
                         w_abs: float | None = None) -> float:
    """Leading order of P_w(hit D(y, ry) before r D and the circle R), |w| small.

    ``log(R/|x-y|) log(|w|/r) / (log(R/ry) log(R/r) - log(R/|x-y|)^2)``.
    """
    if w_abs is None:
        w_abs = math.e * r
    if not (0 < r < w_abs < sep < R and 0 < ry < sep):
        raise DomainError("need 0 < r < |w| < |x-y| < R and ry < |x-y|")
    a = math.log(R / sep)
    return a * math.log(w_abs / r) / (math.log(R / ry) * math.log(R / r) - a * a)


def polar3_configuration(log_sep: float = 3.0, log_r: float = 30.0):
    """Geometry for P_w(hit D(y, r) before r D and the unit circle).

    ``x = 0``, ``|x - y| = e^-log_sep``, ``r = r_y = e^-log_r``, start uniform on
    the circle of radius ``e r`` around x.  Returns ``(start, start_radius,
    targets, domain, leading_value)``; with the defaults the leading value is
    ``3/891``.
    """
    sep = math.exp(-log_sep)
    r = math.exp(-log_r)
    y = Point2(sep, 0.0)
    domain = AbsorbingDomain(UNIT_DISC, (Disc(Point2(0.0, 0.0), r),))
    leading = polar3_leading_value(sep, r, r, 1.0, math.e * r)
    return Point2(0.0, 0.0), math.e * r, [Disc(y, r)], domain, leading
