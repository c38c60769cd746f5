"""Monte Carlo for the one-dimensional loop soup.

Loops of the 1D soup, rooted at their minimum, project onto intervals
``[a, b]`` forming a Poisson process with intensity ``theta (b - a)^-2 da db``.
Covering of ``[1, s]`` by these intervals is persistence of the local-time
field, so the covering frequency estimates ``f_infty(s)`` from below as the
length cutoff ``epsilon`` shrinks.

Replicas are simulated in fixed-size blocks; block ``k`` draws from
``rng.substream(k)``, so results do not depend on how blocks are distributed
over threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import DomainError
from .kernels import cover_scan
from .rng import RngStream

BLOCK = 500


# ---------------------------------------------------------------------------
# intensity and sampling


def _check_window(window, epsilon):
    u, v = float(window[0]), float(window[1])
    if not (0.0 < u < v) or not np.isfinite(v):
        raise DomainError(f"window must satisfy 0 < u < v, got ({u}, {v})")
    if not (epsilon > 0.0) or not np.isfinite(epsilon):
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    return u, v


def _check_theta(theta, open_unit=False):
    if not (theta > 0.0) or not np.isfinite(theta):
        raise DomainError(f"theta must be positive, got {theta}")
    if open_unit and theta >= 1.0:
        raise DomainError(f"theta must lie in (0, 1), got {theta}")


def _component_masses(u, v, epsilon):
    # length density l^-2 * (v - u + min(l, u)) splits into three pieces:
    #   A: (v-u) l^-2 on [eps, inf), B: l^-1 on [eps, u), C: u l^-2 on [max(u,eps), inf)
    m_a = (v - u) / epsilon
    m_b = math.log(u / epsilon) if epsilon < u else 0.0
    m_c = u / max(u, epsilon)
    return m_a, m_b, m_c


def soup_mass(theta: float, window, epsilon: float) -> float:
    """Intensity mass of intervals of length >= epsilon meeting ``[u, v]``."""
    _check_theta(theta)
    u, v = _check_window(window, epsilon)
    return theta * sum(_component_masses(u, v, epsilon))


def length_tail(theta: float, window, epsilon: float, ell: float) -> float:
    """Fraction of the mass carried by intervals of length >= ``ell``."""
    u, v = _check_window(window, epsilon)
    if ell <= epsilon:
        return 1.0
    return soup_mass(theta, window, ell) / soup_mass(theta, window, epsilon)


def _draw_block(gen, theta, u, v, epsilon, n_rep):
    """Intervals for ``n_rep`` replicas, grouped by replica.

    Returns ``(a, b, starts)`` with replica ``r`` owning ``starts[r]:starts[r+1]``.
    """
    m_a, m_b, m_c = _component_masses(u, v, epsilon)
    counts = gen.poisson(theta * np.array([m_a, m_b, m_c]), size=(n_rep, 3))
    n_a, n_b, n_c = counts.sum(axis=0)
    # 1 - random() lies in (0, 1], keeping lengths finite
    l_a = epsilon / (1.0 - gen.random(n_a))
    l_b = epsilon * (u / epsilon) ** gen.random(n_b) if n_b else np.empty(0)
    l_c = max(u, epsilon) / (1.0 - gen.random(n_c))
    starts = np.zeros(n_rep + 1, dtype=np.int64)
    np.cumsum(counts.sum(axis=1), out=starts[1:])
    # scatter each component into its replica's slot, components in order A, B, C
    ell = np.empty(starts[-1])
    offset = starts[:-1].copy()
    for c, lengths in enumerate((l_a, l_b, l_c)):
        k = counts[:, c]
        first = np.cumsum(k) - k
        dest = np.repeat(offset - first, k) + np.arange(lengths.size)
        ell[dest] = lengths
        offset += k
    lo = np.maximum(0.0, u - ell)
    a = v - (v - lo) * (1.0 - gen.random(ell.size))
    return a, a + ell, starts


@dataclass(frozen=True)
class IntervalSoupSample:
    """One realisation of the interval soup restricted to a window."""

    a: np.ndarray
    b: np.ndarray
    epsilon: float
    window: tuple[float, float]

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.shape != b.shape or a.ndim != 1:
            raise DomainError("interval endpoint arrays must be 1D and equal length")
        u, v = self.window
        if a.size and (np.any(a <= 0) or np.any(b - a < self.epsilon * (1 - 1e-12))
                       or np.any(b < u) or np.any(a > v)):
            raise DomainError("intervals violate the sample invariants")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def intervals(self) -> list[tuple[float, float]]:
        return list(zip(self.a.tolist(), self.b.tolist()))

    def __len__(self):
        return self.a.size

    def thin(self, epsilon: float) -> "IntervalSoupSample":
        """Keep intervals of length >= ``epsilon`` (the coupled coarser soup)."""
        if epsilon < self.epsilon:
            raise DomainError("thinning can only raise the cutoff")
        keep = self.b - self.a >= epsilon
        return IntervalSoupSample(self.a[keep], self.b[keep], epsilon, self.window)


def sample_interval_soup(theta: float, window, epsilon: float, rng: RngStream) -> IntervalSoupSample:
    """Exact Poisson sample of intervals of length >= epsilon meeting the window."""
    _check_theta(theta)
    u, v = _check_window(window, epsilon)
    a, b, _ = _draw_block(rng.generator(), theta, u, v, epsilon, 1)
    return IntervalSoupSample(a, b, float(epsilon), (u, v))


def covers_window(sample: IntervalSoupSample, target) -> bool:
    p, q = float(target[0]), float(target[1])
    u, v = sample.window
    if not (u <= p <= q <= v):
        raise DomainError("target must lie inside the sample window")
    covered, _ = cover_scan(np.ascontiguousarray(sample.a), np.ascontiguousarray(sample.b),
                            np.array([0, len(sample)], dtype=np.int64), p, q)
    return bool(covered[0])


# ---------------------------------------------------------------------------
# block drivers


def _run_blocks(fn, n_samples, rng, threads):
    n_blocks = -(-n_samples // BLOCK)
    sizes = [min(BLOCK, n_samples - k * BLOCK) for k in range(n_blocks)]
    jobs = [(rng.substream(k), sizes[k]) for k in range(n_blocks)]
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda job: fn(*job), jobs))
    return [fn(*job) for job in jobs]


def _thin_block(a, b, starts, epsilon):
    keep = b - a >= epsilon
    rid = np.repeat(np.arange(len(starts) - 1), np.diff(starts))
    new_starts = np.zeros_like(starts)
    np.cumsum(np.bincount(rid[keep], minlength=len(starts) - 1), out=new_starts[1:])
    return np.ascontiguousarray(a[keep]), np.ascontiguousarray(b[keep]), new_starts


@dataclass(frozen=True)
class CoveringEstimate:
    theta: float
    s: float
    epsilon: float
    n: int
    hits: int

    @property
    def estimate(self) -> float:
        return self.hits / self.n

    @property
    def stderr(self) -> float:
        p = self.estimate
        return math.sqrt(max(p * (1.0 - p), 0.0) / self.n)

    def row(self) -> dict:
        return {"theta": self.theta, "s": self.s, "epsilon": self.epsilon, "n": self.n,
                "estimate": self.estimate, "stderr": self.stderr}


def covering_sweep(theta: float, s: float, epsilons, n_samples: int, rng: RngStream,
                   threads: int = 1) -> list[CoveringEstimate]:
    """Coupled covering frequencies of ``[1, s]`` at several cutoffs.

    The soup is drawn once at the smallest cutoff and thinned for the others,
    so covering at a larger cutoff implies covering at every smaller one.
    """
    _check_theta(theta, open_unit=True)
    eps = sorted({float(e) for e in epsilons}, reverse=True)
    if not eps:
        raise DomainError("at least one epsilon is required")
    if not s > 1.0:
        raise DomainError(f"s must exceed 1, got {s}")
    if eps[-1] <= 0 or eps[0] >= 1.0:
        raise DomainError("epsilon must lie in (0, 1)")
    if n_samples < 1:
        raise DomainError("n_samples must be positive")
    e_min = eps[-1]

    def block(sub, n_rep):
        a, b, starts = _draw_block(sub.generator(), theta, 1.0, s, e_min, n_rep)
        hits = []
        for e in eps:
            aa, bb, st = _thin_block(a, b, starts, e) if e > e_min else (a, b, starts)
            covered, _ = cover_scan(aa, bb, st, 1.0, s)
            hits.append(int(covered.sum()))
        return hits

    totals = np.sum(_run_blocks(block, n_samples, rng, threads), axis=0)
    return [CoveringEstimate(theta, s, e, n_samples, int(h)) for e, h in zip(eps, totals)]


def covering_probability(theta: float, s: float, epsilon: float, n_samples: int,
                         rng: RngStream, threads: int = 1) -> tuple[float, float]:
    """Frequency that ``[1, s]`` is covered, with binomial standard error."""
    est = covering_sweep(theta, s, [epsilon], n_samples, rng, threads)[0]
    return est.estimate, est.stderr


def last_uncovered_statistic(theta: float, s: float, epsilon: float, n_samples: int,
                             rng: RngStream, delta0: float | None = None,
                             threads: int = 1) -> np.ndarray:
    """Samples of g/s, g the last point of ``[delta0, s]`` left uncovered.

    Replicas where all of ``[delta0, s]`` is covered report ``delta0 / s``.
    """
    _check_theta(theta, open_unit=True)
    if delta0 is None:
        delta0 = 10.0 * epsilon
    if not (0 < epsilon < 1) or not (0 < delta0 < s):
        raise DomainError("need 0 < epsilon < 1 and 0 < delta0 < s")

    def block(sub, n_rep):
        a, b, starts = _draw_block(sub.generator(), theta, delta0, s, epsilon, n_rep)
        _, last = cover_scan(a, b, starts, delta0, s)
        return np.where(np.isnan(last), delta0, last) / s

    return np.concatenate(_run_blocks(block, n_samples, rng, threads))


# ---------------------------------------------------------------------------
# squared Bessel processes


@dataclass(frozen=True)
class BesqPath:
    times: np.ndarray
    values: np.ndarray
    theta: float
    start: float

    @property
    def dimension(self) -> float:
        return 2.0 * self.theta

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        x = np.asarray(self.values, dtype=float)
        if t.shape != x.shape or t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise DomainError("times must start at 0 and increase strictly")
        if np.any(x < 0) or x[0] != self.start:
            raise DomainError("values must be nonnegative and start at x0")


def _besq_grid(time_grid):
    t = np.asarray(time_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or np.any(t < 0) or np.any(np.diff(t) <= 0):
        raise DomainError("time grid must be nonnegative and strictly increasing")
    return t if t[0] == 0.0 else np.concatenate(([0.0], t))


def besq_marginals(theta: float, x0: float, time_grid, n_paths: int, rng: RngStream) -> np.ndarray:
    """Exact BESQ(2 theta) values at the grid times for ``n_paths`` paths.

    Row ``i`` is a path; column 0 is time 0.
    """
    if theta < 0 or x0 < 0:
        raise DomainError("need theta >= 0 and x0 >= 0")
    t = _besq_grid(time_grid)
    gen = rng.generator()
    out = np.empty((n_paths, t.size))
    out[:, 0] = x0
    x = np.full(n_paths, float(x0))
    for k, h in enumerate(np.diff(t), start=1):
        j = gen.poisson(x / (2.0 * h))
        shape = theta + j
        x = np.where(shape > 0, 2.0 * h * gen.gamma(np.where(shape > 0, shape, 1.0)), 0.0)
        out[:, k] = x
    return out


def besq_sample_path(theta: float, x0: float, time_grid, rng: RngStream) -> BesqPath:
    t = _besq_grid(time_grid)
    values = besq_marginals(theta, x0, t, 1, rng)[0]
    return BesqPath(t, values, float(theta), float(x0))


def besq_moments(theta: float, x0: float, t: float) -> tuple[float, float]:
    """Mean and variance of BESQ(2 theta) at time t started from x0."""
    return x0 + 2.0 * theta * t, 4.0 * theta * t * t + 4.0 * x0 * t


def excursion_death_time_samples(theta: float, n_samples: int, rng: RngStream) -> np.ndarray:
    """Samples of tau = X/(2E), X ~ Gamma(theta, scale 2), E ~ Exp(1)."""
    _check_theta(theta, open_unit=True)
    gen = rng.generator()
    x = gen.gamma(theta, 2.0, n_samples)
    e = gen.exponential(1.0, n_samples)
    tau = x / (2.0 * e)
    # gamma draws can underflow to 0 for small theta
    return np.maximum(tau, np.finfo(float).tiny)


# ---------------------------------------------------------------------------
# Brownian hitting time tail


@dataclass
class HittingTail:
    level: float
    t: np.ndarray
    exact: np.ndarray
    mc: np.ndarray
    mc_stderr: np.ndarray
    asymptotic: np.ndarray
    n: int
    slope_exact: float
    slope_mc: float
    slope_mc_stderr: float
    fit_range: tuple[float, float] = field(default=(1e2, 1e4))

    def rows(self) -> list[dict]:
        return [{"t": float(t), "exact": float(e), "estimate": float(m), "stderr": float(se),
                 "asymptotic": float(a), "n": self.n}
                for t, e, m, se, a in zip(self.t, self.exact, self.mc, self.mc_stderr, self.asymptotic)]


def _loglog_slope(t, p, w=None):
    x, y = np.log(t), np.log(p)
    if w is None:
        return float(np.polyfit(x, y, 1)[0]), 0.0
    coef, cov = np.polyfit(x, y, 1, w=w, cov="unscaled")
    return float(coef[0]), float(math.sqrt(cov[0, 0]))


def bm_hitting_time_tail(level: float, horizon: float, n_samples: int, rng: RngStream,
                         n_points: int = 13, dt: float = 1.0,
                         fit_range=(1e2, 1e4)) -> HittingTail:
    """P(T_{-level} >= t) by reflection and by path simulation.

    Paths run on a grid of step ``dt``; survival between grid points is decided
    by the exact Brownian-bridge crossing probability
    ``exp(-2 (x_k + L)(x_{k+1} + L) / dt)``, so the estimate has no
    discretisation bias.
    """
    if not level > 0 or not horizon > dt:
        raise DomainError("need level > 0 and horizon > dt")
    n_steps = int(round(horizon / dt))
    t_eval = np.unique(np.round(np.geomspace(1.0, n_steps, n_points)).astype(np.int64))
    gen = rng.generator()
    death = np.full(n_samples, n_steps + 1, dtype=np.int64)
    pos = np.zeros(n_samples)
    alive = np.arange(n_samples)
    sd = math.sqrt(dt)
    for k in range(1, n_steps + 1):
        if alive.size == 0:
            break
        x0 = pos[alive] + level
        x1 = x0 + sd * gen.standard_normal(alive.size)
        u = gen.random(alive.size)
        killed = (x1 <= 0) | (u < np.exp(-2.0 * x0 * np.maximum(x1, 0.0) / dt))
        death[alive[killed]] = k
        pos[alive] = x1 - level
        alive = alive[~killed]
    # survival to time t <=> not killed in any step up to t
    surv = np.array([(death > k).mean() for k in t_eval])
    se = np.sqrt(surv * (1 - surv) / n_samples)
    t = t_eval * dt
    exact = special.erf(level / np.sqrt(2.0 * t))
    asym = level * np.sqrt(2.0 / (np.pi * t))
    sel = (t >= fit_range[0]) & (t <= fit_range[1])
    slope_exact, _ = _loglog_slope(t[sel], exact[sel])
    ok = sel & (surv > 0)
    slope_mc, slope_se = _loglog_slope(t[ok], surv[ok], w=surv[ok] / np.maximum(se[ok], 1e-300))
    return HittingTail(level, t, exact, surv, se, asym, n_samples,
                       slope_exact, slope_mc, slope_se, tuple(fit_range))
