"""Positions, distances and the link-angle convention used by the channel models.

Angle convention (fixed, zenith referenced):

* ``cos_zeta = (to.z - from.z) / |to - from|``
* ``sin_iota = (to.y - from.y) / max(horizontal distance, EPS_GEO)``
* sensing angle seen from the IRS: ``sin_theta = (irs.z - target.z) / |irs - target|``
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EPS_GEO = 1e-9


class DegenerateLinkError(ValueError):
    """Raised when both ends of a link coincide."""

    def __init__(self, msg: str = "degenerate link"):
        super().__init__(msg)


@dataclass(frozen=True)
class Position:
    x: float
    y: float
    z: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.x, self.y, self.z)):
            raise ValueError(f"non-finite position {self!r}")
        if self.z < 0:
            raise ValueError(f"negative altitude {self.z}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @classmethod
    def from_seq(cls, seq) -> "Position":
        vals = [float(v) for v in seq]
        if len(vals) == 2:
            vals.append(0.0)
        if len(vals) != 3:
            raise ValueError(f"position needs 2 or 3 coordinates, got {len(vals)}")
        return cls(*vals)

    def to_list(self) -> list[float]:
        return [self.x, self.y, self.z]


@dataclass(frozen=True)
class LinkAngles:
    cos_zeta: float
    sin_iota: float


def distance(p: Position, q: Position) -> float:
    return math.sqrt((p.x - q.x) ** 2 + (p.y - q.y) ** 2 + (p.z - q.z) ** 2)


def horizontal_distance(p: Position, q: Position) -> float:
    return math.hypot(p.x - q.x, p.y - q.y)


def _clip_unit(v: float) -> float:
    return min(1.0, max(-1.0, v))


def link_angles(src: Position, dst: Position) -> LinkAngles:
    d = distance(src, dst)
    if d == 0.0:
        raise DegenerateLinkError()
    h = max(horizontal_distance(src, dst), EPS_GEO)
    return LinkAngles(
        cos_zeta=_clip_unit((dst.z - src.z) / d),
        sin_iota=_clip_unit((dst.y - src.y) / h),
    )


def sensing_sin(irs: Position, target: Position) -> float:
    """Sine of the angle of interest from the IRS toward the target (1 at nadir)."""
    d = distance(irs, target)
    if d == 0.0:
        raise DegenerateLinkError()
    return _clip_unit((irs.z - target.z) / d)
