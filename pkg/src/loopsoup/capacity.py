"""Discrete log^alpha capacities of planar point clouds.

A cloud at resolution ``h`` stands in for a closed set; the kernel
``|log max(|x - y|, h)|^alpha`` keeps atoms at finite energy.  The minimal
energy over probability weights is found by away-step Frank-Wolfe with exact
line search, and the duality gap certifies the result.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError

SIMPLEX_TOL = 1e-12


@dataclass(frozen=True)
class PointCloud:
    """Distinct planar points representing a set at resolution ``h``."""

    points: np.ndarray
    h: float

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
            raise DomainError("points must be a nonempty (n, 2) array")
        if not np.all(np.isfinite(pts)):
            raise DomainError("points must be finite")
        if not self.h > 0:
            raise DomainError("resolution h must be positive")
        if pts.shape[0] > 1:
            dmin = _min_pairwise(pts)
            if dmin == 0.0:
                raise DomainError("points must be pairwise distinct")
            if self.h > dmin * (1 + 1e-9):
                warnings.warn(f"h={self.h:.3g} exceeds the minimal spacing {dmin:.3g}; "
                              "distinct points share the diagonal floor", RuntimeWarning, stacklevel=2)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    def union(self, other: "PointCloud") -> "PointCloud":
        return PointCloud(np.vstack([self.points, other.points]), min(self.h, other.h))

    @classmethod
    def from_csv(cls, path, h: float) -> "PointCloud":
        """Read ``x,y`` rows; a non-numeric first row is taken as a header."""
        rows = []
        with open(path, newline="") as fh:
            for i, rec in enumerate(csv.reader(fh)):
                if not rec:
                    continue
                try:
                    rows.append((float(rec[0]), float(rec[1])))
                except ValueError:
                    if i == 0:
                        continue
                    raise DomainError(f"bad point row {i + 1} in {path}") from None
        return cls(np.array(rows), h)


def _min_pairwise(pts):
    d = np.hypot(pts[:, None, 0] - pts[None, :, 0], pts[:, None, 1] - pts[None, :, 1])
    np.fill_diagonal(d, np.inf)
    return float(d.min())


@dataclass(frozen=True)
class WeightedMeasure:
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or np.any(w < 0) or abs(w.sum() - 1.0) > SIMPLEX_TOL * max(1, w.size):
            raise DomainError("weights must be nonnegative and sum to 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, n: int) -> "WeightedMeasure":
        return cls(np.full(n, 1.0 / n))


def _check_kernel_args(alpha, h):
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    if not h > 0:
        raise DomainError("h must be positive")


def log_alpha_kernel(p, q, alpha: float, h: float) -> float:
    """``|log max(|p - q|, h)|^alpha``."""
    _check_kernel_args(alpha, h)
    d = math.hypot(p[0] - q[0], p[1] - q[1])
    return abs(math.log(max(d, h))) ** alpha


def kernel_matrix(cloud: PointCloud, alpha: float, h: float | None = None) -> np.ndarray:
    h = cloud.h if h is None else h
    _check_kernel_args(alpha, h)
    p = cloud.points
    d = np.hypot(p[:, None, 0] - p[None, :, 0], p[:, None, 1] - p[None, :, 1])
    return np.abs(np.log(np.maximum(d, h))) ** alpha


def energy(cloud: PointCloud, mu: WeightedMeasure, alpha: float, h: float | None = None) -> float:
    """``sum_ij w_i w_j K(p_i, p_j)``."""
    w = mu.weights
    if w.size != len(cloud):
        raise DomainError("measure and cloud sizes differ")
    K = kernel_matrix(cloud, alpha, h)
    return float(w @ K @ w)


@dataclass
class SolverConfig:
    tol: float = 1e-12
    max_iter: int = 100_000


@dataclass
class EnergyMinimum:
    measure: WeightedMeasure
    energy: float
    gap: float
    iterations: int
    converged: bool
    energies: list = field(default_factory=list, repr=False)

    @property
    def capacity(self) -> float:
        return 1.0 / self.energy


def minimize_energy(cloud: PointCloud, alpha: float, h: float | None = None,
                    cfg: SolverConfig | None = None) -> EnergyMinimum:
    """Minimise ``w' K w`` over the simplex by away-step Frank-Wolfe.

    Stops when the Frank-Wolfe gap ``max_j <grad, w - e_j>`` drops below
    ``cfg.tol``.  On hitting ``max_iter`` the best iterate is returned with
    ``converged=False``.
    """
    cfg = cfg or SolverConfig()
    K = kernel_matrix(cloud, alpha, h)
    n = K.shape[0]
    w = np.full(n, 1.0 / n)
    Kw = K @ w
    E = float(w @ Kw)
    energies = [E]
    gap = float("inf")
    it = 0
    for it in range(1, cfg.max_iter + 1):
        g = 2.0 * Kw
        j = int(np.argmin(g))
        gap = float(g @ w - g[j])
        if gap <= cfg.tol:
            break
        support = np.flatnonzero(w > 0)
        a = int(support[np.argmax(g[support])])
        away_gap = float(g[a] - g @ w)
        if gap >= away_gap or w[a] >= 1.0:
            # toward vertex j: d = e_j - w
            wKd = Kw[j] - E
            dKd = K[j, j] - 2.0 * Kw[j] + E
            gmax = 1.0
            step_to = j
            sign = 1.0
        else:
            # away from vertex a: d = w - e_a
            wKd = E - Kw[a]
            dKd = E - 2.0 * Kw[a] + K[a, a]
            gmax = w[a] / (1.0 - w[a])
            step_to = a
            sign = -1.0
        if dKd > 0:
            gamma = min(max(-wKd / dKd, 0.0), gmax)
        else:
            # concave along d: best at an endpoint
            gamma = gmax if 2.0 * wKd * gmax + dKd * gmax ** 2 < 0 else 0.0
        if gamma <= 0.0:
            break
        if sign > 0:
            w *= 1.0 - gamma
            w[step_to] += gamma
            Kw = (1.0 - gamma) * Kw + gamma * K[:, step_to]
        else:
            w *= 1.0 + gamma
            w[step_to] -= gamma
            if gamma == gmax:
                w[step_to] = 0.0
            Kw = (1.0 + gamma) * Kw - gamma * K[:, step_to]
        w = np.maximum(w, 0.0)
        w /= w.sum()
        # refresh Kw now and then to stop drift from the rank-one updates
        if it % 64 == 0:
            Kw = K @ w
        E_new = float(w @ Kw)
        energies.append(E_new)
        E = E_new
    Kw = K @ w
    E = float(w @ Kw)
    g = 2.0 * Kw
    gap = float(g @ w - g.min())
    converged = gap <= cfg.tol or gap <= 1e-12 * max(1.0, E)
    return EnergyMinimum(WeightedMeasure(w / w.sum()), E, gap, it, converged, energies)


def capacity(cloud: PointCloud, alpha: float, h: float | None = None,
             cfg: SolverConfig | None = None) -> float:
    """``1 / min energy``."""
    return minimize_energy(cloud, alpha, h, cfg).capacity


# ---------------------------------------------------------------------------
# generators


def segment_cloud(h: float, length: float = 0.5, start=(0.0, 0.0)) -> PointCloud:
    """Points spaced ``h`` along a horizontal segment."""
    n = max(int(round(length / h)), 1) + 1
    x = start[0] + np.linspace(0.0, length, n)
    return PointCloud(np.column_stack([x, np.full(n, float(start[1]))]), h)


def circle_cloud(h: float, radius: float = 0.25, center=(0.0, 0.0)) -> PointCloud:
    # chord spacing at least h so neighbours stay off the diagonal floor
    n = max(int(math.pi / math.asin(min(h / (2 * radius), 1.0))), 3)
    t = 2 * math.pi * np.arange(n) / n
    return PointCloud(np.column_stack([center[0] + radius * np.cos(t),
                                       center[1] + radius * np.sin(t)]), h)


def cantor_cloud(h: float, ratio: float = 1 / 3, length: float = 0.5) -> PointCloud:
    """Centres of the level-k intervals of a middle-cut Cantor set, intervals of size ~h."""
    if not 0 < ratio < 0.5:
        raise DomainError("Cantor ratio must lie in (0, 1/2)")
    k = max(int(math.ceil(math.log(h / length) / math.log(ratio))), 0)
    lefts = np.array([0.0])
    size = length
    for _ in range(k):
        # keep the outer pieces of relative size ratio
        lefts = np.concatenate([lefts, lefts + (1.0 - ratio) * size])
        size *= ratio
    x = lefts + 0.5 * size
    return PointCloud(np.column_stack([x, np.zeros_like(x)]), h)


def point_cloud(h: float, at=(0.0, 0.0)) -> PointCloud:
    return PointCloud(np.array([at], dtype=float), h)


GENERATORS = {"segment": segment_cloud, "circle": circle_cloud, "cantor": cantor_cloud,
              "point": point_cloud}


# ---------------------------------------------------------------------------
# polarity report


@dataclass
class PolarityRow:
    alpha: float
    h: float
    n_points: int
    min_energy: float
    capacity: float
    gap: float
    iterations: int

    def row(self) -> dict:
        return dict(self.__dict__)


@dataclass
class PolarityReport:
    rows: list
    trends: dict
    verdicts: dict
    theta: float | None
    criterion: str


CRITERION = ("clusters of the soup at intensity theta in (0, 1/2]: a set with Cap_log^alpha > 0 "
             "for some alpha > 1 - theta is not polar; a set with Cap_log^alpha = 0 for some "
             "alpha < 1 - theta is polar; alpha = 1 - theta is inconclusive by the paper")


def _trend(hs, caps, alpha):
    # a single atom decays like |log h|^-alpha; call the trend decaying when the
    # log-log slope against |log h| is at least half of that
    x = np.log(np.abs(np.log(hs)))
    y = np.log(caps)
    slope = float(np.polyfit(x, y, 1)[0]) if len(hs) > 1 else 0.0
    return ("decaying" if slope < -0.5 * alpha else "bounded"), slope


def polarity_diagnostic(cloud_family, alpha_list, theta: float | None = None,
                        cfg: SolverConfig | None = None, band: float = 1e-9) -> PolarityReport:
    """Capacity against resolution for each alpha, with trend and criterion verdict.

    ``cloud_family`` maps ``h`` to a :class:`PointCloud` (or is a list of
    clouds); clouds should describe the same set at decreasing ``h``.
    """
    clouds = list(cloud_family.values()) if isinstance(cloud_family, dict) else list(cloud_family)
    if len(clouds) < 2:
        raise DomainError("need clouds at two or more resolutions")
    clouds.sort(key=lambda c: -c.h)
    if theta is not None and not 0 < theta <= 0.5:
        raise DomainError("the polarity criterion is stated for theta in (0, 1/2]")
    rows, trends, verdicts = [], {}, {}
    for alpha in alpha_list:
        caps = []
        for c in clouds:
            m = minimize_energy(c, alpha, None, cfg)
            rows.append(PolarityRow(float(alpha), c.h, len(c), m.energy, m.capacity, m.gap, m.iterations))
            caps.append(m.capacity)
        label, slope = _trend(np.array([c.h for c in clouds]), np.array(caps), alpha)
        trends[float(alpha)] = {"trend": label, "slope": slope}
        if theta is None:
            continue
        crit = 1.0 - theta
        if abs(alpha - crit) <= band:
            verdicts[float(alpha)] = "inconclusive by the paper"
        elif alpha > crit:
            verdicts[float(alpha)] = "not polar" if label == "bounded" else "no conclusion"
        else:
            verdicts[float(alpha)] = "polar" if label == "decaying" else "no conclusion"
    return PolarityReport(rows, trends, verdicts, theta, CRITERION)


def load_cloud(path: str | Path, h: float) -> PointCloud:
    return PointCloud.from_csv(path, h)
