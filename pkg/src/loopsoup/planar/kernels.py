"""Exact planar kernels and leading-order loop-measure masses."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from .geometry import Point2

_ON_CIRCLE_TOL = 1e-12


def disc_poisson_kernel(x, z, boundary: bool = False) -> float:
    """Poisson kernel of the unit disc.

    Interior (``|x| < 1``): exit density ``(1/2pi)(1-|x|^2)/|x-z|^2`` at ``z``.
    Boundary (``|x| = 1``): boundary kernel ``(1/pi)/|x-z|^2``.
    """
    x, z = Point2.of(x), Point2.of(z)
    if abs(abs(z) - 1.0) > _ON_CIRCLE_TOL:
        raise DomainError("z must lie on the unit circle")
    r = abs(x)
    d2 = (x.x - z.x) ** 2 + (x.y - z.y) ** 2
    if boundary:
        if abs(r - 1.0) > _ON_CIRCLE_TOL:
            raise DomainError("boundary kernel needs |x| = 1")
        if d2 == 0.0:
            raise DomainError("boundary kernel is singular at x = z")
        return 1.0 / (math.pi * d2)
    if r >= 1.0:
        raise DomainError("interior kernel needs |x| < 1")
    return (1.0 - r * r) / (2.0 * math.pi * d2)


def bm_annulus_hit_inner(z_abs: float, r: float, R: float) -> float:
    """P(Brownian motion from |z| hits the circle r before the circle R)."""
    if not (0 < r < R) or not (r <= z_abs <= R):
        raise DomainError("need 0 < r <= |z| <= R")
    return math.log(R / z_abs) / math.log(R / r)


@dataclass(frozen=True)
class AnnulusKernel:
    value: float
    d1: float
    d2: float
    n_terms: int


def _annulus_terms(q: float, tol: float = 1e-17) -> int:
    # sech^2 decays like exp(-|t| pi/|log q|) in the shifted angle t
    L = -math.log(q)
    return 2 + int(math.ceil(-math.log(tol / 4.0) * L / (2.0 * math.pi ** 2)))


def annulus_inner_kernel_series(q: float, angle, n_terms: int | None = None,
                                derivatives: bool = False):
    """Boundary kernel of the annulus {q < |z| < 1} from ``q e^{i angle}`` to 1.

    Evaluated through the strip map as
    ``pi/(4 q log^2 q) * sum_n sech^2((angle + 2 n pi) pi / (2 log q))``.
    With ``derivatives`` the first two angular derivatives of the
    differentiated series are returned as well.
    """
    if not (0.0 < q < 1.0):
        raise DomainError(f"q must lie in (0, 1), got {q}")
    if n_terms is None:
        n_terms = _annulus_terms(q)
    if n_terms < 1:
        raise DomainError("n_terms must be positive")
    lq = math.log(q)
    c = math.pi / (2.0 * lq)
    pref = math.pi / (4.0 * q * lq * lq)
    ang = np.asarray(angle, dtype=float)
    n = np.arange(-n_terms, n_terms + 1)
    x = c * (ang[..., None] + 2.0 * math.pi * n)
    e = np.exp(-2.0 * np.abs(x))  # underflows gracefully to 0
    sech2 = 4.0 * e / (1.0 + e) ** 2
    value = pref * sech2.sum(axis=-1)
    if not derivatives:
        return float(value) if value.ndim == 0 else value
    tanh = np.sign(x) * (1.0 - e) / (1.0 + e)
    d1 = pref * (-2.0 * c) * (sech2 * tanh).sum(axis=-1)
    d2 = pref * (-2.0 * c * c) * (sech2 * (1.0 - 3.0 * tanh ** 2)).sum(axis=-1)
    if value.ndim == 0:
        return AnnulusKernel(float(value), float(d1), float(d2), n_terms)
    return value, d1, d2


def annulus_kernel_total(q: float) -> float:
    """Integral of the kernel over the outer circle: 1/(q |log q|)."""
    if not (0.0 < q < 1.0):
        raise DomainError("q must lie in (0, 1)")
    return 1.0 / (q * -math.log(q))


def _check_radii(r1, r2):
    # r2 = 1 is the degenerate annulus reaching the boundary, where mu = 0
    if not (0.0 < r1 < r2 <= 1.0) or r1 >= 1.0:
        raise DomainError(f"need 0 < r1 < r2 <= 1, got r1={r1}, r2={r2}")


def annulus_crossing_measure(r1: float, r2: float) -> float:
    """Loop-measure mass of loops in the unit disc crossing ``r2 D minus r1 D``.

    Leading order ``log(log(1/r1) / log(r2/r1))``.
    """
    _check_radii(r1, r2)
    return math.log(math.log(1.0 / r1) / math.log(r2 / r1))


def annulus_crossing_measure_dr1(r1: float, r2: float) -> float:
    """Derivative in r1: ``(1/r1)(1/log(r2/r1) - 1/log(1/r1))``."""
    _check_radii(r1, r2)
    return (1.0 / math.log(r2 / r1) - 1.0 / math.log(1.0 / r1)) / r1


def single_loop_crossing_prob(theta: float, r1: float, r2: float) -> float:
    """P(some loop of the soup crosses the annulus) = 1 - exp(-theta mu)."""
    if not theta > 0:
        raise DomainError("theta must be positive")
    return -math.expm1(-theta * annulus_crossing_measure(r1, r2))
