"""Leading-order masses for loops visiting two small discs.

The formulas are asymptotic in the separation parameter ``A``: they are only
returned inside the regime ``r_x, r_y <= |x-y|^A`` and ``A |x-y| <= R <= 1``.
Outside it a :class:`RegimeError` is raised, or a :class:`RegimeWarning` is
emitted when ``on_violation="warn"`` (``"ignore"`` skips the check).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

from ..errors import DomainError, RegimeError, RegimeWarning
from .geometry import Point2
from .kernels import annulus_crossing_measure

DEFAULT_A = 10.0
_LOG_SLACK = 1e-12


def _regime(x, y, rx, ry, R, A, on_violation):
    x, y = Point2.of(x), Point2.of(y)
    d = x.dist(y)
    if not (0 < rx and 0 < ry and 0 < d < 1):
        raise DomainError("need positive radii and 0 < |x-y| < 1")
    if A < 1:
        raise DomainError("separation parameter A must be >= 1")
    problems = []
    # compare in logs with a relative slack so exact boundary cases pass
    bound = A * math.log(d)
    for name, r in (("r_x", rx), ("r_y", ry)):
        if math.log(r) > bound * (1 - _LOG_SLACK):
            problems.append(f"{name}={r:.3g} exceeds |x-y|^A={math.exp(bound):.3g}")
    if R is not None:
        if R > 1.0:
            problems.append(f"R={R:.3g} exceeds 1")
        if A * d > R * (1 + _LOG_SLACK):
            problems.append(f"A|x-y|={A * d:.3g} exceeds R={R:.3g}")
    if problems:
        msg = f"outside the separation regime (A={A:g}): " + "; ".join(problems)
        if on_violation == "ignore":
            pass
        elif on_violation == "warn":
            warnings.warn(msg, RegimeWarning, stacklevel=3)
        else:
            raise RegimeError(msg)
    return d


def two_annuli_measure(x, y, rx: float, ry: float, A: float = DEFAULT_A,
                       on_violation: str = "raise") -> float:
    """Mass of loops visiting both D(x, rx) and D(y, ry): (log|x-y|)^2 / (log(1/rx) log(1/ry))."""
    d = _regime(x, y, rx, ry, None, A, on_violation)
    return math.log(d) ** 2 / (math.log(1 / rx) * math.log(1 / ry))


def two_annuli_measure_with_outer(x, y, rx: float, ry: float, R: float,
                                  A: float = DEFAULT_A, on_violation: str = "raise") -> float:
    """Same loops, also reaching the circle of radius R around x.

    ``log(1/R) log(R/|x-y|^2) / (log(1/rx) log(1/ry))``.
    """
    d = _regime(x, y, rx, ry, R, A, on_violation)
    return math.log(1 / R) * math.log(R / d ** 2) / (math.log(1 / rx) * math.log(1 / ry))


@dataclass
class ThreeCrossingsBound:
    theta: float
    terms: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        return sum(self.terms.values())

    def rows(self) -> list[dict]:
        return [{"scenario": k, "value": v} for k, v in self.terms.items()]


def three_crossings_bound(x, y, rx: float, ry: float, R: float, theta: float,
                          A: float = DEFAULT_A, on_violation: str = "raise") -> ThreeCrossingsBound:
    """Union bound over the five ways clusters can link D(x,rx), D(y,ry) and the R-circle.

    * ``single``: one loop does everything.
    * ``pair_xy_outer``: one loop visits both discs, another crosses from
      3|x-y|/2 out to R.
    * ``pair_x_outer`` / ``pair_y_outer``: one loop crosses from one disc to R,
      another from the other disc to |x-y|/2.
    * ``triple``: three loops, one per disc out to |x-y|/2 and one across
      3|x-y|/2 to R.
    """
    if not theta > 0:
        raise DomainError("theta must be positive")
    d = _regime(x, y, rx, ry, R, A, on_violation)
    # the regime was already checked above
    mu_polar0 = two_annuli_measure_with_outer(x, y, rx, ry, R, A, on_violation="ignore")
    mu_polar00 = two_annuli_measure(x, y, rx, ry, A, on_violation="ignore")
    far = annulus_crossing_measure(1.5 * d, R)
    x_out = annulus_crossing_measure(rx, R)
    y_out = annulus_crossing_measure(ry, R)
    x_half = annulus_crossing_measure(rx, 0.5 * d)
    y_half = annulus_crossing_measure(ry, 0.5 * d)
    terms = {
        "single": theta * mu_polar0,
        "pair_xy_outer": theta ** 2 * mu_polar00 * far,
        "pair_x_outer": theta ** 2 * x_out * y_half,
        "pair_y_outer": theta ** 2 * y_out * x_half,
        "triple": theta ** 3 * x_half * y_half * far,
    }
    return ThreeCrossingsBound(theta, terms)
