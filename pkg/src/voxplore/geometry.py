"""Shared geometric primitives: poses, axis-aligned boxes, angle helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = a - 2.0 * math.pi * math.floor((a + math.pi) / (2.0 * math.pi))
    if w <= -math.pi:
        w += 2.0 * math.pi
    return w


def yaw_distance(a: float, b: float) -> float:
    """Absolute wrapped yaw difference, in [0, pi]."""
    return abs(wrap_angle(a - b))


@dataclass
class Pose:
    """Position plus yaw; roll and pitch are fixed at zero."""

    position: np.ndarray
    yaw: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        if self.position.shape != (3,):
            raise ValueError("pose position must be a 3-vector")
        self.yaw = wrap_angle(float(self.yaw))

    def copy(self) -> "Pose":
        return Pose(self.position.copy(), self.yaw)

    def distance_to(self, other: "Pose") -> float:
        d = self.position - other.position
        return float(math.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]))


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned box given by min/max corners in meters."""

    min: tuple
    max: tuple

    @staticmethod
    def of(lo, hi) -> "Aabb":
        lo = tuple(float(v) for v in lo)
        hi = tuple(float(v) for v in hi)
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"degenerate box: min {lo} exceeds max {hi}")
        return Aabb(lo, hi)

    def size(self) -> np.ndarray:
        return np.array(self.max) - np.array(self.min)

    def center(self) -> np.ndarray:
        return (np.array(self.min) + np.array(self.max)) * 0.5

    def contains(self, p, margin: float = 0.0) -> bool:
        return all(
            self.min[i] - margin <= p[i] <= self.max[i] + margin for i in range(3)
        )

    def contains_box(self, other: "Aabb") -> bool:
        return self.contains(other.min) and self.contains(other.max)

    def inflate(self, r: float) -> "Aabb":
        return Aabb(
            tuple(v - r for v in self.min),
            tuple(v + r for v in self.max),
        )

    def hull(self, other: "Aabb") -> "Aabb":
        return Aabb(
            tuple(min(a, b) for a, b in zip(self.min, other.min)),
            tuple(max(a, b) for a, b in zip(self.max, other.max)),
        )

    def intersects(self, other: "Aabb") -> bool:
        return all(
            self.min[i] <= other.max[i] and other.min[i] <= self.max[i]
            for i in range(3)
        )

    def distance_to_point(self, p) -> float:
        """Euclidean distance from a point to the box (0 inside)."""
        d2 = 0.0
        for i in range(3):
            if p[i] < self.min[i]:
                d2 += (self.min[i] - p[i]) ** 2
            elif p[i] > self.max[i]:
                d2 += (p[i] - self.max[i]) ** 2
        return math.sqrt(d2)

    def to_json(self) -> dict:
        return {"min": list(self.min), "max": list(self.max)}

    @staticmethod
    def from_json(obj: dict) -> "Aabb":
        return Aabb.of(obj["min"], obj["max"])


@dataclass
class BoundsAccumulator:
    """Incrementally grown axis-aligned hull over added points."""

    lo: list = field(default_factory=lambda: [math.inf] * 3)
    hi: list = field(default_factory=lambda: [-math.inf] * 3)

    def add(self, p) -> None:
        for i in range(3):
            v = float(p[i])
            if v < self.lo[i]:
                self.lo[i] = v
            if v > self.hi[i]:
                self.hi[i] = v

    def merge(self, other: "BoundsAccumulator") -> None:
        for i in range(3):
            if other.lo[i] < self.lo[i]:
                self.lo[i] = other.lo[i]
            if other.hi[i] > self.hi[i]:
                self.hi[i] = other.hi[i]

    @property
    def empty(self) -> bool:
        return self.lo[0] > self.hi[0]

    def as_box(self) -> Aabb:
        if self.empty:
            raise ValueError("empty bounds")
        return Aabb(tuple(self.lo), tuple(self.hi))
