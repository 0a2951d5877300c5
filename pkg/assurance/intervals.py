"""
Hyperrectangles and embedding states.

A box [lower, upper] is the only set representation used by the library.
Corner lists are enumerated by binary counting: corner k takes upper_i when
bit i of k is set, so corner 0 is the lower endpoint and corner 2^n - 1 the
upper endpoint. Duplicate corners of degenerate boxes are kept.
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

from core.defs import MAX_CORNER_DIM
from core.exceptions import (
    CornerLimitExc,
    DimensionMismatchExc,
    EmbeddingOrderExc,
    IntervalOrderExc,
    UnboundedBoxExc,
)

ArrayLike = Union[Sequence[float], np.ndarray]


def _frozen(values: ArrayLike) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    arr.flags.writeable = False
    return arr


@lru_cache(maxsize=None)
def corner_mask(n: int) -> np.ndarray:
    """Boolean (2^n, n) table; True selects the upper endpoint."""
    k = np.arange(2 ** n)[:, None]
    mask = ((k >> np.arange(n)[None, :]) & 1).astype(bool)
    mask.flags.writeable = False
    return mask


def corner_points(lower: np.ndarray, upper: np.ndarray, limit: int = MAX_CORNER_DIM) -> np.ndarray:
    """
    Corners of a stack of boxes.

    lower, upper: arrays of shape (..., n)
    returns: array of shape (..., 2^n, n)
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    n = lower.shape[-1]
    if n > limit:
        raise CornerLimitExc(f"Refusing to enumerate 2^{n} corners (limit n <= {limit})")
    mask = corner_mask(n)
    return np.where(mask, upper[..., None, :], lower[..., None, :])


@dataclass(frozen=True, eq=False)
class IntervalVector:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = _frozen(self.lower)
        upper = _frozen(self.upper)
        if lower.shape != upper.shape:
            raise DimensionMismatchExc(f"Bounds of different size: {lower.size} and {upper.size}")
        if np.isnan(lower).any() or np.isnan(upper).any():
            raise IntervalOrderExc("Box endpoints must not be NaN")
        bad = np.flatnonzero(lower > upper)
        if bad.size:
            i = int(bad[0])
            raise IntervalOrderExc(f"lower > upper at coordinate {i}: {lower[i]} > {upper[i]}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def degenerate(cls, point: ArrayLike) -> "IntervalVector":
        return cls(point, point)

    @classmethod
    def symmetric(cls, half_width: ArrayLike, center: ArrayLike = None) -> "IntervalVector":
        half_width = np.asarray(half_width, dtype=float)
        center = np.zeros_like(half_width) if center is None else np.asarray(center, dtype=float)
        return cls(center - half_width, center + half_width)

    @classmethod
    def unbounded(cls, n: int) -> "IntervalVector":
        return cls(np.full(n, -np.inf), np.full(n, np.inf))

    @property
    def n(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.lower).all() and np.isfinite(self.upper).all())

    def is_degenerate(self) -> bool:
        return bool(np.array_equal(self.lower, self.upper))

    def contains(self, z: ArrayLike) -> bool:
        return contains(self, z)

    def corners(self, limit: int = MAX_CORNER_DIM) -> np.ndarray:
        return corners(self, limit)

    def inflate(self, eps: float) -> "IntervalVector":
        return IntervalVector(self.lower - eps, self.upper + eps)

    def is_subset(self, other: "IntervalVector") -> bool:
        if self.n != other.n:
            raise DimensionMismatchExc(f"Box dimensions differ: {self.n} and {other.n}")
        return bool(np.all(other.lower <= self.lower) and np.all(self.upper <= other.upper))

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if not self.is_finite():
            raise UnboundedBoxExc("Cannot sample an unbounded box")
        return rng.uniform(self.lower, self.upper, size=(count, self.n))

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}


def corners(iv: IntervalVector, limit: int = MAX_CORNER_DIM) -> np.ndarray:
    """All 2^n vertices of a finite box as rows, duplicates retained."""
    if not iv.is_finite():
        raise UnboundedBoxExc(f"Box has infinite endpoints: {iv.lower} .. {iv.upper}")
    return corner_points(iv.lower, iv.upper, limit)


def contains(iv: IntervalVector, z: ArrayLike) -> bool:
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.size != iv.n:
        raise DimensionMismatchExc(f"Point of size {z.size} checked against a box of size {iv.n}")
    return bool(np.all(iv.lower <= z) and np.all(z <= iv.upper))


@dataclass(frozen=True, eq=False)
class EmbeddingState:
    under: np.ndarray
    over: np.ndarray

    def __post_init__(self):
        under = _frozen(self.under)
        over = _frozen(self.over)
        if under.shape != over.shape:
            raise DimensionMismatchExc(f"Embedding halves of different size: {under.size} and {over.size}")
        object.__setattr__(self, "under", under)
        object.__setattr__(self, "over", over)

    @classmethod
    def from_vector(cls, a: ArrayLike) -> "EmbeddingState":
        a = np.asarray(a, dtype=float).reshape(-1)
        if a.size % 2:
            raise DimensionMismatchExc(f"Embedding vector must have even size, got {a.size}")
        n = a.size // 2
        return cls(a[:n], a[n:])

    @classmethod
    def of_box(cls, iv: IntervalVector) -> "EmbeddingState":
        return cls(iv.lower, iv.upper)

    @property
    def n(self) -> int:
        return self.under.size

    def ordered(self) -> bool:
        return bool(np.all(self.under <= self.over))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.under, self.over])

    def corners(self, limit: int = MAX_CORNER_DIM) -> np.ndarray:
        return corners(rect_of(self), limit)


def rect_of(a: EmbeddingState) -> IntervalVector:
    bad = np.flatnonzero(a.under > a.over)
    if bad.size:
        i = int(bad[0])
        raise EmbeddingOrderExc(i, float(a.under[i]), float(a.over[i]))
    return IntervalVector(a.under, a.over)
