"""Banach iteration for the crossing-law integral operator.

The operator acts on functions ``f: [1, inf) -> [0, 1]``::

    T(f)(s) = 1 - (1 - 1/s)^theta
              + theta (s-1)^theta * int_1^inf (s + t - 1)^(-theta-1) f(t) dt

Functions are carried as :class:`GridFunction` objects: values on a
logarithmic grid ``[1, S_max]`` plus a power-law tail beyond ``S_max``.  The
integral over the grid uses Gauss-Legendre nodes in ``log t`` on every knot
interval with a shape-preserving cubic interpolant of ``f``; the tail integral
has a closed form through a Pfaff-transformed ``2F1``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from . import special_fn
from .errors import ClampWarning, ConvergenceError, DomainError, InsufficientDataError

CLAMP_SLACK = 1e-10  # quadrature noise level of the discretized operator


# ---------------------------------------------------------------------------
# grid functions

def make_grid(s_max: float = 1e4, per_decade: int = 200,
              boundary_from: float = 1e-8, boundary_per_decade: int = 8) -> np.ndarray:
    """Log-spaced knots on ``[1, s_max]`` refined near ``s = 1``.

    Near 1 the fixed point behaves like ``1 - C (s-1)^theta``, so extra knots
    are placed at ``1 + 10^k`` for ``k`` from ``log10(boundary_from)`` up to
    the first regular knot.
    """
    if not s_max > 1:
        raise DomainError("s_max must exceed 1")
    n = max(2, int(round(per_decade * math.log10(s_max))) + 1)
    knots = np.logspace(0.0, math.log10(s_max), n)
    knots[0], knots[-1] = 1.0, s_max
    if boundary_per_decade > 0 and knots[1] - 1.0 > boundary_from:
        lo, hi = math.log10(boundary_from), math.log10(knots[1] - 1.0)
        m = max(2, int(math.ceil((hi - lo) * boundary_per_decade)))
        extra = 1.0 + np.logspace(lo, hi, m, endpoint=False)
        knots = np.union1d(knots, extra)
    return knots


@dataclass(frozen=True)
class GridFunction:
    """Function on ``[1, S_max]`` given by knot values and a power-law tail.

    Beyond the last knot the function is ``values[-1] * (s / S_max)**tail_exponent``.
    """

    knots: np.ndarray
    values: np.ndarray
    tail_exponent: float = 0.0

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if knots.ndim != 1 or knots.size < 2 or knots.shape != values.shape:
            raise DomainError("knots and values must be 1-d arrays of equal length >= 2")
        if knots[0] != 1.0:
            raise DomainError("the first knot must be exactly 1")
        if np.any(np.diff(knots) <= 0):
            raise DomainError("knots must be strictly increasing")
        if np.any((values < 0) | (values > 1)) or not np.all(np.isfinite(values)):
            raise DomainError("grid function values must lie in [0, 1]")
        knots.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "tail_exponent", float(self.tail_exponent))

    @classmethod
    def constant(cls, knots, c: float, tail_exponent: float = 0.0) -> "GridFunction":
        knots = np.asarray(knots, dtype=float)
        return cls(knots, np.full(knots.shape, float(c)), tail_exponent)

    @classmethod
    def from_function(cls, knots, fn: Callable, tail_exponent: float = 0.0) -> "GridFunction":
        knots = np.asarray(knots, dtype=float)
        return cls(knots, np.asarray(fn(knots), dtype=float), tail_exponent)

    def with_values(self, values, tail_exponent: float | None = None) -> "GridFunction":
        tail = self.tail_exponent if tail_exponent is None else tail_exponent
        return GridFunction(self.knots, values, tail)

    @property
    def s_max(self) -> float:
        return float(self.knots[-1])

    @cached_property
    def _interp(self):
        return PchipInterpolator(np.log(self.knots), self.values, extrapolate=False)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < 1.0):
            raise DomainError("grid functions live on [1, inf)")
        out = np.empty_like(s)
        inside = s <= self.s_max
        out[inside] = self._interp(np.log(s[inside]))
        out[~inside] = self.values[-1] * (s[~inside] / self.s_max) ** self.tail_exponent
        return float(out) if out.ndim == 0 else out


def weighted_norm(f: GridFunction, alpha: float) -> float:
    """``sup_s s^alpha |f(s)|`` over the knots and the tail model.

    Returns ``math.inf`` when the tail makes the supremum diverge.
    """
    w = f.knots ** alpha * np.abs(f.values)
    if f.values[-1] != 0 and alpha + f.tail_exponent > 0:
        return math.inf
    return float(np.max(w))


# ---------------------------------------------------------------------------
# the operator

def _tail_coefficients(c: np.ndarray, s_max: float, theta: float, p: float) -> np.ndarray:
    """``int_{S}^inf (c + t)^(-theta-1) (t/S)^p dt`` for each ``c = s - 1``.

    Substituting ``x = S/t`` gives an Euler integral of ``2F1(theta+1, theta-p;
    theta-p+1; -c/S)``; Pfaff's transformation maps the argument into [0, 1/2).
    """
    if not p < theta:
        raise DomainError("tail exponent must be below theta for the tail integral to converge")
    k = theta - p
    out = np.empty_like(c)
    for i, ci in enumerate(c):
        z = ci / (s_max + ci)
        out[i] = s_max ** (-theta) / k * (s_max / (s_max + ci)) ** k * \
            special_fn.hyp2f1(-p, k, k + 1.0, z)
    return out


class TOperator:
    """Discretized ``T`` for one grid, one intensity and one input tail exponent."""

    def __init__(self, knots: np.ndarray, theta: float, tail_exponent: float, order: int = 6):
        if not theta > 0:
            raise DomainError("theta must be positive")
        self.knots = np.asarray(knots, dtype=float)
        self.theta = float(theta)
        self.tail_exponent = float(tail_exponent)
        self.order = order
        s = self.knots
        c = s - 1.0

        xg, wg = np.polynomial.legendre.leggauss(order)
        u = np.log(s)
        lo, hi = u[:-1], u[1:]
        half = 0.5 * (hi - lo)
        nodes_u = (0.5 * (hi + lo))[:, None] + half[:, None] * xg[None, :]
        weights_u = half[:, None] * wg[None, :]
        self.nodes_u = nodes_u.ravel()
        t = np.exp(self.nodes_u)
        w = weights_u.ravel() * t  # dt = t du

        self.kernel = (s[:, None] + t[None, :] - 1.0) ** (-theta - 1.0) * w[None, :]
        self.tail = _tail_coefficients(c, s[-1], theta, self.tail_exponent)
        with np.errstate(divide="ignore"):
            self.head = np.where(s > 1.0, -np.expm1(theta * np.log1p(-1.0 / s)), 1.0)
        self.pref = theta * c ** theta

    def apply_values(self, f: GridFunction):
        """Return ``(values, n_clamped, max_excursion)`` of ``T f`` at the knots."""
        fn = f._interp(self.nodes_u)
        integral = self.kernel @ fn + f.values[-1] * self.tail
        g = self.head + self.pref * integral
        g[0] = 1.0
        low, high = g < 0.0, g > 1.0
        n_clamped = int(np.count_nonzero(low | high))
        excursion = float(max(np.max(-g[low], initial=0.0), np.max(g[high] - 1.0, initial=0.0)))
        if n_clamped:
            np.clip(g, 0.0, 1.0, out=g)
        return g, n_clamped, excursion


_OPERATOR_CACHE: dict = {}


def get_operator(knots: np.ndarray, theta: float, tail_exponent: float, order: int = 6) -> TOperator:
    key = (hash(np.asarray(knots).tobytes()), len(knots), float(theta), float(tail_exponent), order)
    op = _OPERATOR_CACHE.get(key)
    if op is None:
        if len(_OPERATOR_CACHE) > 16:
            _OPERATOR_CACHE.clear()
        op = TOperator(knots, theta, tail_exponent, order)
        _OPERATOR_CACHE[key] = op
    return op


def apply_T(f: GridFunction, theta: float, tail_exponent: float | None = None,
            order: int = 6) -> GridFunction:
    """One application of ``T``; the result carries ``tail_exponent`` (default: f's).

    Values pushed outside ``[0, 1]`` by quadrature noise are clamped and a
    :class:`ClampWarning` is issued when the excursion exceeds round-off.
    """
    op = get_operator(f.knots, theta, f.tail_exponent, order)
    g, n_clamped, excursion = op.apply_values(f)
    if n_clamped and excursion > CLAMP_SLACK:
        warnings.warn(f"apply_T clamped {n_clamped} values (max excursion {excursion:.3g})",
                      ClampWarning, stacklevel=2)
    tail = f.tail_exponent if tail_exponent is None else tail_exponent
    return GridFunction(f.knots, g, tail)


# ---------------------------------------------------------------------------
# iteration

def contraction_range(theta: float):
    """Open interval of alpha on which ``T`` contracts, or None at theta = 1."""
    if theta <= 0:
        raise DomainError("theta must be positive")
    if theta < 1:
        return (0.0, 1.0 - theta)
    if theta > 1:
        return (1.0 - theta, 0.0)
    return None


def check_alpha(theta: float, alpha: float) -> None:
    rng = contraction_range(theta)
    if rng is None:
        if not -theta < alpha < 1:
            raise DomainError(f"alpha must lie in (-theta, 1) for theta = 1, got {alpha}")
        return
    lo, hi = rng
    if not lo < alpha < hi:
        raise DomainError(
            f"alpha = {alpha} is outside the contraction range ({lo:g}, {hi:g}) for theta = {theta}; "
            "T is a contraction on F_alpha only for alpha in (0, 1-theta) when theta < 1 "
            "and alpha in (1-theta, 0) when theta > 1")


def default_tail_exponent(theta: float) -> float:
    """Decay exponent used past ``S_max``: ``theta - 1`` below one, flat otherwise."""
    return min(theta - 1.0, 0.0)


@dataclass
class IterationDiagnostics:
    increments: list = field(default_factory=list)
    sup_increments: list = field(default_factory=list)
    iterations: int = 0
    final_residual: float = math.nan
    tol: float = math.nan
    alpha: float = math.nan
    theta: float = math.nan
    clamp_events: int = 0
    converged: bool = False

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "increment_weighted_norm", "residual"])
            for k, (inc, sup) in enumerate(zip(self.increments, self.sup_increments), start=1):
                w.writerow([k, repr(inc), repr(sup)])


class NonConvergenceError(ConvergenceError):
    def __init__(self, msg, result=None, diagnostics=None):
        super().__init__(msg)
        self.result = result
        self.diagnostics = diagnostics


def iterate_to_fixed_point(theta: float, alpha: float, start: GridFunction,
                           tol: float = 1e-10, max_iter: int = 20000,
                           tail_exponent: float | None = None, order: int = 6):
    """Iterate ``f_{k+1} = T f_k`` until ``||f_{k+1} - f_k||_alpha < tol``.

    Returns ``(f, diagnostics)``.  The first application integrates the start's
    own tail; later iterates use ``tail_exponent`` (``theta - 1`` for
    ``theta < 1`` and 0 otherwise).
    """
    check_alpha(theta, alpha)
    if not tol > 0:
        raise DomainError("tol must be positive")
    tail = default_tail_exponent(theta) if tail_exponent is None else tail_exponent
    diag = IterationDiagnostics(tol=tol, alpha=alpha, theta=theta)
    f = start
    for _ in range(max_iter):
        op = get_operator(f.knots, theta, f.tail_exponent, order)
        vals, n_clamped, excursion = op.apply_values(f)
        if n_clamped and excursion > CLAMP_SLACK:
            diag.clamp_events += n_clamped
        g = GridFunction(f.knots, vals, tail)
        diff = np.abs(vals - f.values)
        inc = float(np.max(f.knots ** alpha * diff))
        diag.increments.append(inc)
        diag.sup_increments.append(float(np.max(diff)))
        diag.iterations += 1
        f = g
        if inc < tol:
            diag.converged = True
            break
    op = get_operator(f.knots, theta, f.tail_exponent, order)
    vals, _, _ = op.apply_values(f)
    diag.final_residual = float(np.max(f.knots ** alpha * np.abs(vals - f.values)))
    if not diag.converged:
        raise NonConvergenceError(
            f"no convergence after {max_iter} iterations (last increment {diag.increments[-1]:.3g})",
            result=f, diagnostics=diag)
    return f, diag


def contraction_ratio(diag: IterationDiagnostics, floor: float | None = None) -> float:
    """Largest ratio of consecutive increments above the noise floor (default 10 tol)."""
    floor = 10.0 * diag.tol if floor is None else floor
    inc = np.asarray(diag.increments, dtype=float)
    window = []
    for v in inc:
        if v <= floor:
            break
        window.append(v)
    if len(inc) < 3 or len(window) < 3:
        raise InsufficientDataError("need at least 3 increments above the noise floor")
    w = np.asarray(window)
    return float(np.max(w[1:] / w[:-1]))


# ---------------------------------------------------------------------------
# properties of the fixed point

@dataclass
class SupermultiplicativityReport:
    pairs: list
    differences: np.ndarray
    tol: float

    @property
    def worst(self) -> float:
        return float(np.max(self.differences)) if len(self.differences) else -math.inf

    @property
    def passed(self) -> bool:
        return self.worst <= self.tol


def check_supermultiplicative(f, pairs: Iterable[Sequence[float]], tol: float = 1e-10):
    """Report ``f(s) f(t) - f(st)`` for every pair; a pass needs all ``<= tol``."""
    pairs = [(float(s), float(t)) for s, t in pairs]
    if any(s < 1 or t < 1 for s, t in pairs):
        raise DomainError("pairs must satisfy s, t >= 1")
    s = np.array([p[0] for p in pairs])
    t = np.array([p[1] for p in pairs])
    diffs = np.asarray(f(s), dtype=float) * np.asarray(f(t), dtype=float) - np.asarray(f(s * t), dtype=float)
    return SupermultiplicativityReport(pairs, diffs, tol)


@dataclass
class TailScan:
    theta: float
    S: np.ndarray
    integrals: np.ndarray
    slope: float
    intercept: float
    max_fit_rel_error: float
    predicted_slope: float

    @property
    def slope_rel_error(self) -> float:
        return abs(self.slope / self.predicted_slope - 1.0)

    @property
    def passed(self) -> bool:
        return (self.max_fit_rel_error <= 0.05 and self.slope_rel_error <= 0.10
                and bool(np.all(np.diff(self.integrals) > 0)))


def tail_divergence_scan(theta: float, S_list: Sequence[float], fit_decades: float = 2.0) -> TailScan:
    """Partial integrals ``I(S) = int_1^S f_infty(s) s^(-theta) ds``.

    ``I`` grows like ``C ln S`` with ``C = sin(pi theta)/(pi (1-theta))``; the
    scan fits ``a ln S + b`` over the last ``fit_decades`` decades.
    """
    special_fn._check_theta_open_unit(theta)
    S = np.asarray(S_list, dtype=float)
    if S.size == 0 or np.any(S < 1) or np.any(np.diff(S) <= 0):
        raise DomainError("S_list must be increasing and >= 1")

    def integrand(u):
        s = math.exp(u)
        return special_fn.f_infty(s, theta) * s ** (1.0 - theta)

    vals = np.empty_like(S)
    acc = 0.0
    prev = 0.0
    for i, Si in enumerate(S):
        u = math.log(Si)
        if u > prev:
            piece, err = integrate.quad(integrand, prev, u, epsabs=1e-13, epsrel=1e-12, limit=400)
            if not np.isfinite(piece) or err > 1e-8 * max(1.0, abs(piece)):
                raise ConvergenceError(f"quadrature failed on [{math.exp(prev)}, {Si}]")
            acc += piece
        vals[i] = acc
        prev = u
    sel = S >= S[-1] / 10 ** fit_decades
    if np.count_nonzero(sel) >= 2:
        a, b = np.polyfit(np.log(S[sel]), vals[sel], 1)
        fit = a * np.log(S[sel]) + b
        rel = float(np.max(np.abs(fit - vals[sel]) / np.abs(vals[sel])))
    else:
        a, b, rel = math.nan, math.nan, math.nan
    return TailScan(theta, S, vals, float(a), float(b), rel,
                    special_fn.f_infty_asymptotic_constant(theta))


@dataclass
class BesselResidual:
    theta: float
    residual: float
    s_at_max: float
    grid_size: int
    threshold: float = 1e-6

    @property
    def passed(self) -> bool:
        return self.residual <= self.threshold


def bessel_grid_function(theta: float, knots=None, **grid_kw) -> GridFunction:
    """Closed-form persistence probability of BESQ(2 theta) sampled on a grid."""
    knots = make_grid(**grid_kw) if knots is None else np.asarray(knots, dtype=float)
    return GridFunction.from_function(knots, lambda s: special_fn.f_infty(s, theta), theta - 1.0)


def verify_bessel_fixed_point(theta: float, knots=None, perturbation: Callable | None = None,
                              order: int = 6, **grid_kw) -> BesselResidual:
    """Apply ``T`` once to the Bessel persistence law and report ``sup |T f - f|``."""
    special_fn._check_theta_open_unit(theta)
    f = bessel_grid_function(theta, knots, **grid_kw)
    if perturbation is not None:
        f = f.with_values(np.clip(f.values + perturbation(f.knots), 0.0, 1.0))
    g = apply_T(f, theta, order=order)
    diff = np.abs(g.values - f.values)
    i = int(np.argmax(diff))
    return BesselResidual(theta, float(diff[i]), float(f.knots[i]), f.knots.size)


def fixed_point_table(f: GridFunction, theta: float, s_values=None):
    """Rows ``(s, f_value, closed_form, abs_error)``."""
    s_values = f.knots if s_values is None else np.asarray(s_values, dtype=float)
    fv = np.asarray(f(s_values), dtype=float)
    cf = special_fn.f_infty(s_values, theta)
    return [(float(s), float(a), float(b), float(abs(a - b))) for s, a, b in zip(s_values, fv, cf)]
