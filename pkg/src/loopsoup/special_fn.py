"""Special functions behind the crossing law.

Gamma machinery, the Gauss hypergeometric function on ``[0, 1]``, the
regularized incomplete Beta function, the limiting crossing law ``f_infty``
and the laws derived from it, and the heat trace of Brownian motion on the
unit circle together with the large-loop threshold ``tau_theta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError


@dataclass(frozen=True)
class Tolerances:
    hyp2f1: float = 1e-14
    hyp2f1_series_zmax: float = 0.75
    hyp2f1_max_terms: int = 20000
    betainc: float = 1e-15
    betainc_max_iter: int = 2000
    heat_term_floor: float = 1e-16
    bisection: float = 1e-10


TOL = Tolerances()


# ---------------------------------------------------------------------------
# gamma / beta

def log_gamma(x: float) -> float:
    """``ln Gamma(x)`` for ``x > 0``."""
    if not x > 0:
        raise DomainError(f"log_gamma requires x > 0, got {x!r}")
    return math.lgamma(x)


def _gamma_ratio(num, den) -> float:
    """prod Gamma(num) / prod Gamma(den), arguments possibly negative."""
    sign = 1.0
    logv = 0.0
    for x, s in [(x, 1.0) for x in num] + [(x, -1.0) for x in den]:
        if x <= 0 and float(x).is_integer():
            if s > 0:
                raise DomainError(f"Gamma pole at {x}")
            return 0.0
        logv += s * math.lgamma(x)
        if x < 0 and math.floor(x) % 2 == 1:
            sign = -sign
    return sign * math.exp(logv)


def log_beta(a: float, b: float) -> float:
    return log_gamma(a) + log_gamma(b) - log_gamma(a + b)


def _betacf(a: float, b: float, x: float, tol: float, max_iter: int) -> float:
    # modified Lentz evaluation of the incomplete Beta continued fraction
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    raise ConvergenceError(f"incomplete Beta continued fraction stalled (a={a}, b={b}, x={x})")


def betainc_reg(a: float, b: float, x: float, xc: float | None = None) -> float:
    """Regularized incomplete Beta ``I_x(a, b)``.

    ``xc`` may carry ``1 - x`` when the caller knows it more accurately than
    the subtraction would give.
    """
    if a <= 0 or b <= 0:
        raise DomainError("betainc_reg requires a, b > 0")
    if xc is None:
        xc = 1.0 - x
    if x < 0 or xc < 0:
        raise DomainError(f"betainc_reg requires x in [0, 1], got {x!r}")
    if x == 0:
        return 0.0
    if xc == 0:
        return 1.0
    lfront = a * math.log(x) + b * math.log(xc) - log_beta(a, b)
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(lfront) * _betacf(a, b, x, TOL.betainc, TOL.betainc_max_iter) / a
    return 1.0 - math.exp(lfront) * _betacf(b, a, xc, TOL.betainc, TOL.betainc_max_iter) / b


# ---------------------------------------------------------------------------
# hypergeometric

def _hyp2f1_series(a, b, c, z, tol, max_terms):
    term = 1.0
    total = 1.0
    for n in range(max_terms):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * z
        total += term
        if abs(term) <= tol * abs(total):
            # a second small term guards against accidental cancellation
            nxt = term * (a + n + 1) * (b + n + 1) / ((c + n + 1) * (n + 2.0)) * z
            if abs(nxt) <= tol * abs(total):
                return total
    raise ConvergenceError(f"2F1 power series did not converge at z={z}")


def tanh_sinh(fn, tol: float = 1e-14, max_level: int = 12):
    """Integrate ``fn(x, 1 - x)`` over ``[0, 1]`` by double-exponential quadrature.

    ``fn`` receives both ``x`` and ``1 - x`` so that endpoint singularities of
    the form ``x**p (1 - x)**q`` are evaluated without cancellation.
    """
    h = 1.0
    tmax = 6.0

    def level_sum(ts):
        sh = np.sinh(ts)
        ch = np.cosh(ts)
        u = 0.5 * np.pi * sh
        x = 1.0 / (1.0 + np.exp(-2.0 * u))
        xc = 1.0 / (1.0 + np.exp(2.0 * u))
        w = 0.5 * np.pi * ch / (2.0 * np.cosh(u) ** 2)
        keep = (x > 0) & (xc > 0) & (w > 0)
        vals = fn(x[keep], xc[keep])
        return float(np.sum(w[keep] * vals))

    ts = np.arange(-tmax, tmax + 0.5 * h, h)
    acc = level_sum(ts)
    est = h * acc
    for _ in range(max_level):
        h /= 2.0
        odd = np.arange(-tmax + h, tmax, 2 * h)
        acc += level_sum(odd)
        new = h * acc
        rel = abs(new - est) / max(abs(new), 1e-300)
        # halving h squares the error, so the next difference bounds the current error
        if rel <= tol or rel * rel <= tol:
            return new
        est = new
    raise ConvergenceError("tanh-sinh quadrature did not reach tolerance")


def hyp2f1(a: float, b: float, c: float, z: float) -> float:
    """Gauss hypergeometric ``2F1(a, b; c; z)`` for ``z`` in ``[0, 1]``.

    Power series up to ``z = 0.75``, the Euler integral representation with
    tanh-sinh quadrature on ``(0.75, 1)`` and Gauss's value at ``z = 1``.
    """
    if not c > 0:
        raise DomainError("hyp2f1 requires c > 0")
    if not 0.0 <= z <= 1.0:
        raise DomainError(f"hyp2f1 is implemented for z in [0, 1], got {z!r}")
    if z == 0.0:
        return 1.0
    if z == 1.0:
        if not c - a - b > 0:
            raise DomainError("2F1 at z=1 diverges unless c - a - b > 0")
        return _gamma_ratio([c, c - a - b], [c - a, c - b])
    if z <= TOL.hyp2f1_series_zmax:
        return _hyp2f1_series(a, b, c, z, TOL.hyp2f1, TOL.hyp2f1_max_terms)
    # Euler integral needs c > b > 0; 2F1 is symmetric in (a, b)
    if not c > b > 0:
        a, b = b, a
    if not c > b > 0:
        try:
            return _hyp2f1_series(a, b, c, z, TOL.hyp2f1, TOL.hyp2f1_max_terms)
        except ConvergenceError as exc:
            raise ConvergenceError(
                "2F1 near z=1 needs c > b > 0 for the integral representation") from exc
    pref = _gamma_ratio([c], [b, c - b])

    def integrand(x, xc):
        return x ** (b - 1.0) * xc ** (c - b - 1.0) * (1.0 - z * x) ** (-a)

    return pref * tanh_sinh(integrand, tol=TOL.hyp2f1)


# ---------------------------------------------------------------------------
# crossing law and related laws

def _check_theta_open_unit(theta):
    if not 0.0 < theta < 1.0:
        raise DomainError(f"theta must lie in (0, 1), got {theta!r}")


def lipschitz_constant(alpha: float, theta: float) -> float:
    """Lipschitz constant ``Gamma(1-a) Gamma(a+theta) / Gamma(theta)`` of T on F_alpha."""
    if not theta > 0:
        raise DomainError("theta must be positive")
    if not -theta < alpha < 1.0:
        raise DomainError(f"alpha must lie in (-theta, 1) = ({-theta}, 1), got {alpha!r}")
    return math.exp(log_gamma(1.0 - alpha) + log_gamma(alpha + theta) - log_gamma(theta))


def _f_infty_scalar(s: float, theta: float) -> float:
    if s == 1.0:
        return 1.0
    # substitution u = 1/(1+t) turns the tail integral into I_{1/s}(1-theta, theta)
    return betainc_reg(1.0 - theta, theta, 1.0 / s, (s - 1.0) / s)


def f_infty(s, theta: float):
    """Limiting crossing probability ``sin(pi theta)/pi * int_{s-1}^inf t^(theta-1)/(t+1) dt``.

    Accepts a scalar or an array of ``s >= 1``.
    """
    _check_theta_open_unit(theta)
    arr = np.asarray(s, dtype=float)
    if np.any(~(arr >= 1.0)):
        raise DomainError("f_infty requires s >= 1")
    if arr.ndim == 0:
        return _f_infty_scalar(float(arr), theta)
    out = np.empty_like(arr)
    flat = out.reshape(-1)
    for i, v in enumerate(arr.reshape(-1)):
        flat[i] = _f_infty_scalar(float(v), theta)
    return out


def f_infty_asymptotic_constant(theta: float) -> float:
    """Constant ``C`` in ``f_infty(s) ~ C s^(theta-1)``."""
    _check_theta_open_unit(theta)
    return math.sin(math.pi * theta) / (math.pi * (1.0 - theta))


def arcsine_density(t: float, theta: float) -> float:
    """Density of the generalized arcsine law Beta(1 - theta, theta)."""
    _check_theta_open_unit(theta)
    if not 0.0 < t < 1.0:
        raise DomainError("arcsine density diverges at the endpoints; need t in (0, 1)")
    return math.sin(math.pi * theta) / math.pi * t ** (-theta) * (1.0 - t) ** (theta - 1.0)


def arcsine_cdf(t, theta: float):
    _check_theta_open_unit(theta)
    arr = np.asarray(t, dtype=float)
    if np.any((arr < 0) | (arr > 1)):
        raise DomainError("arcsine_cdf requires t in [0, 1]")
    vals = [betainc_reg(1.0 - theta, theta, float(v)) for v in arr.reshape(-1)]
    if arr.ndim == 0:
        return vals[0]
    return np.asarray(vals).reshape(arr.shape)


def death_time_cdf(u, theta: float):
    """CDF ``(u/(1+u))^theta`` of the extinction time of the excursion part."""
    _check_theta_open_unit(theta)
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise DomainError("death_time_cdf requires u >= 0")
    out = np.power(u / (1.0 + u), theta)
    return float(out) if out.ndim == 0 else out


def death_time_density(u, theta: float):
    _check_theta_open_unit(theta)
    u = np.asarray(u, dtype=float)
    out = theta * u ** (theta - 1.0) * (u + 1.0) ** (-1.0 - theta)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# heat trace on the circle

def _theta_sum(q_exp: float, floor: float):
    """1 + 2 sum_{n>=1} exp(-n^2 q_exp), with a geometric remainder bound."""
    total = 1.0
    n = 1
    while True:
        term = math.exp(-n * n * q_exp)
        total += 2.0 * term
        nxt = math.exp(-(n + 1) ** 2 * q_exp)
        if nxt < floor:
            ratio = math.exp(-(2 * n + 3) * q_exp)
            return total, 2.0 * nxt / (1.0 - ratio)
        n += 1


def circle_heat_trace_with_bound(t: float, method: str = "auto"):
    """Return ``(2 pi p_{S^1}(t, 1, 1), remainder_bound)``."""
    if not t > 0:
        raise DomainError("circle_heat_trace requires t > 0")
    if method == "auto":
        method = "direct" if t >= 1.0 else "dual"
    floor = TOL.heat_term_floor
    if method == "direct":
        return _theta_sum(0.5 * t, floor)
    if method == "dual":
        pref = math.sqrt(2.0 * math.pi / t)
        val, rem = _theta_sum(2.0 * math.pi ** 2 / t, floor)
        return pref * val, pref * rem
    raise ValueError(f"unknown method {method!r}")


def circle_heat_trace(t: float, method: str = "auto") -> float:
    """``sum_n exp(-n^2 t / 2)``, i.e. ``2 pi`` times the circle heat kernel on the diagonal."""
    return circle_heat_trace_with_bound(t, method)[0]


def tau_theta(theta: float, tol: float | None = None) -> float:
    """Root of ``circle_heat_trace(tau) = 1/theta`` for ``theta`` in (1/2, 1)."""
    if not 0.5 < theta < 1.0:
        raise DomainError(f"tau_theta requires theta in (1/2, 1), got {theta!r}")
    tol = TOL.bisection if tol is None else tol
    target = 1.0 / theta
    lo, hi = 1e-3, 1.0
    while circle_heat_trace(lo) <= target:
        lo /= 2.0
    while circle_heat_trace(hi) > target:
        hi *= 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if circle_heat_trace(mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
