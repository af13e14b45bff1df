"""Anisotropic vector norms for layered materials.

A single material parameter ``lam`` (the in-plane/out-of-plane anisotropy
ratio) defines a diagonal metric g = diag(1, 1, lam^2).  Magnetic-field
vectors are measured either in the norm induced by g (``norm_g``) or in the
dual norm induced by g^{-1} (``norm_g_inv``); the two collapse to the
Euclidean norm at lam = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError

__all__ = [
    "AnisotropyMetric",
    "FieldVector",
    "norm_g",
    "norm_g_inv",
    "horizontal_part",
]


@dataclass(frozen=True, slots=True)
class AnisotropyMetric:
    """Diagonal anisotropy metric g = diag(1, 1, lam**2), lam > 0."""

    lam: float

    def __post_init__(self):
        if not (isinstance(self.lam, (int, float)) and math.isfinite(self.lam)):
            raise ConfigError(f"anisotropy ratio must be a finite number, got {self.lam!r}")
        if self.lam <= 0:
            raise ConfigError(f"anisotropy ratio must be positive, got {self.lam}")


@dataclass(frozen=True, slots=True)
class FieldVector:
    """A constant magnetic-field vector (h1, h2, h3)."""

    h1: float
    h2: float
    h3: float

    @staticmethod
    def from_iterable(values) -> "FieldVector":
        a, b, c = (float(v) for v in values)
        return FieldVector(a, b, c)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.h1, self.h2, self.h3)

    def __iter__(self):
        yield self.h1
        yield self.h2
        yield self.h3

    def __add__(self, other: "FieldVector") -> "FieldVector":
        return FieldVector(self.h1 + other.h1, self.h2 + other.h2, self.h3 + other.h3)

    def __sub__(self, other: "FieldVector") -> "FieldVector":
        return FieldVector(self.h1 - other.h1, self.h2 - other.h2, self.h3 - other.h3)

    def __neg__(self) -> "FieldVector":
        return FieldVector(-self.h1, -self.h2, -self.h3)

    def scaled(self, factor: float) -> "FieldVector":
        return FieldVector(factor * self.h1, factor * self.h2, factor * self.h3)

    def dot(self, other: "FieldVector") -> float:
        return self.h1 * other.h1 + self.h2 * other.h2 + self.h3 * other.h3

    def norm(self) -> float:
        """Euclidean length."""
        return math.hypot(self.h1, self.h2, self.h3)

    def horizontal_norm(self) -> float:
        """Length of the in-plane part (h1, h2)."""
        return math.hypot(self.h1, self.h2)


def norm_g(h: FieldVector, metric: AnisotropyMetric) -> float:
    """Anisotropic norm lam^{-1} * sqrt(h1^2 + h2^2 + lam^2 h3^2).

    Weighs in-plane components down by the anisotropy ratio; equals the
    Euclidean norm when lam = 1.
    """
    lam = metric.lam
    return math.hypot(h.h1 / lam, h.h2 / lam, h.h3)


def norm_g_inv(h: FieldVector, metric: AnisotropyMetric) -> float:
    """Dual norm lam * sqrt(h1^2 + h2^2 + lam^{-2} h3^2) = sqrt(lam^2(h1^2+h2^2) + h3^2)."""
    lam = metric.lam
    return math.hypot(lam * h.h1, lam * h.h2, h.h3)


def horizontal_part(h: FieldVector) -> FieldVector:
    """Project onto the layer plane: (h1, h2, 0)."""
    return FieldVector(h.h1, h.h2, 0.0)
