"""Small geometric value types shared by the planar modules."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import DomainError


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DomainError("point coordinates must be finite")

    @classmethod
    def of(cls, p) -> "Point2":
        if isinstance(p, Point2):
            return p
        if isinstance(p, complex):
            return cls(p.real, p.imag)
        return cls(float(p[0]), float(p[1]))

    def __abs__(self) -> float:
        return math.hypot(self.x, self.y)

    def __sub__(self, other) -> "Point2":
        o = Point2.of(other)
        return Point2(self.x - o.x, self.y - o.y)

    def dist(self, other) -> float:
        o = Point2.of(other)
        return math.hypot(self.x - o.x, self.y - o.y)


ORIGIN = Point2(0.0, 0.0)


@dataclass(frozen=True)
class Disc:
    center: Point2
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", Point2.of(self.center))
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise DomainError("disc radius must be positive and finite")

    @property
    def area(self) -> float:
        return math.pi * self.radius ** 2


UNIT_DISC = Disc(ORIGIN, 1.0)


@dataclass(frozen=True)
class AnnulusSpec:
    center: Point2
    r_inner: float
    r_outer: float

    def __post_init__(self):
        object.__setattr__(self, "center", Point2.of(self.center))
        if not (0 < self.r_inner < self.r_outer):
            raise DomainError("annulus needs 0 < r_inner < r_outer")
