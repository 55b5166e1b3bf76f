"""Finite grid domains and the label/real fields that live on them.

Pixels are addressed row-major (first axis slowest). Flat pixel indices,
dense-matrix realizations, and serialized output all follow that order.
Labels are 1-based throughout, including serialized output.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator

import numpy as np


class Boundary(Enum):
    """Edge handling: wrap around (torus) or treat the outside as zero."""

    CIRCULAR = "circular"
    ZERO_PADDED = "padded"


class DomainMismatchError(ValueError):
    """Raised when two objects that must share a domain do not."""


class InvalidLabelError(ValueError):
    """Raised when a label index lies outside 1..num_labels."""


@dataclass(frozen=True)
class DomainSpec:
    """A D-dimensional grid of pixels with a boundary mode."""

    dims: tuple[int, ...]
    boundary: Boundary = Boundary.CIRCULAR

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        if len(dims) < 1:
            raise ValueError("domain needs at least one axis")
        if any(n < 1 for n in dims):
            raise ValueError(f"axis lengths must be positive, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    @property
    def is_circular(self) -> bool:
        return self.boundary is Boundary.CIRCULAR

    def require_same(self, other: "DomainSpec", what: str) -> None:
        if self != other:
            raise DomainMismatchError(f"{what}: domain {other} does not match {self}")


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr).copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class RealField:
    """One real number per pixel, stored row-major over the domain dims."""

    domain: DomainSpec
    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.shape != self.domain.dims:
            if arr.size != self.domain.size:
                raise ValueError(
                    f"field needs {self.domain.size} values, got shape {arr.shape}"
                )
            arr = arr.reshape(self.domain.dims)
        object.__setattr__(self, "values", _freeze(arr))

    @classmethod
    def zeros(cls, domain: DomainSpec) -> "RealField":
        return cls(domain, np.zeros(domain.dims))

    @classmethod
    def ones(cls, domain: DomainSpec) -> "RealField":
        return cls(domain, np.ones(domain.dims))

    @property
    def flat(self) -> np.ndarray:
        """Row-major 1-D view of the values."""
        return self.values.reshape(-1)


@dataclass(frozen=True)
class LabelField:
    """A segmentation: one label in 1..num_labels per pixel."""

    domain: DomainSpec
    labels: np.ndarray
    num_labels: int

    def __post_init__(self):
        arr = np.asarray(self.labels, dtype=np.int32)
        if arr.shape != self.domain.dims:
            if arr.size != self.domain.size:
                raise ValueError(
                    f"label field needs {self.domain.size} entries, got shape {arr.shape}"
                )
            arr = arr.reshape(self.domain.dims)
        if self.num_labels < 1:
            raise InvalidLabelError(f"num_labels must be >= 1, got {self.num_labels}")
        if arr.size and (arr.min() < 1 or arr.max() > self.num_labels):
            raise InvalidLabelError(
                f"labels must lie in 1..{self.num_labels}, "
                f"got range {arr.min()}..{arr.max()}"
            )
        object.__setattr__(self, "labels", _freeze(arr))

    @classmethod
    def constant(cls, domain: DomainSpec, label: int, num_labels: int) -> "LabelField":
        return cls(domain, np.full(domain.dims, label, dtype=np.int32), num_labels)

    @property
    def flat(self) -> np.ndarray:
        return self.labels.reshape(-1)


def mask_of(state: LabelField, label: int) -> RealField:
    """Binary indicator field of the pixels currently holding ``label``."""
    if not 1 <= label <= state.num_labels:
        raise InvalidLabelError(
            f"label {label} out of range 1..{state.num_labels}"
        )
    return RealField(state.domain, (state.labels == label).astype(np.float64))


def label_masks(state: LabelField) -> np.ndarray:
    """All indicator masks stacked into shape (num_labels, *dims)."""
    rng = np.arange(1, state.num_labels + 1, dtype=np.int32)
    rng = rng.reshape((state.num_labels,) + (1,) * state.domain.ndim)
    return (state.labels[np.newaxis] == rng).astype(np.float64)


def adjacent_pairs(domain: DomainSpec) -> Iterator[tuple[int, int]]:
    """Yield each unordered axis-neighbor pixel pair exactly once, as flat indices.

    Circular axes wrap; on an axis of length 2 the left and right neighbor
    coincide, so the pair is emitted once. Axes of length 1 contribute no
    pairs (a pixel is not adjacent to itself).
    """
    idx = np.arange(domain.size).reshape(domain.dims)
    for axis, n in enumerate(domain.dims):
        if domain.is_circular:
            if n >= 3:
                left, right = idx, np.roll(idx, -1, axis=axis)
            elif n == 2:
                left = np.take(idx, [0], axis=axis)
                right = np.take(idx, [1], axis=axis)
            else:
                continue
        else:
            if n < 2:
                continue
            sl_a = [slice(None)] * domain.ndim
            sl_b = [slice(None)] * domain.ndim
            sl_a[axis] = slice(0, n - 1)
            sl_b[axis] = slice(1, n)
            left, right = idx[tuple(sl_a)], idx[tuple(sl_b)]
        for a, b in zip(left.reshape(-1), right.reshape(-1)):
            yield int(a), int(b)


def _crossings_array(labels: np.ndarray, domain: DomainSpec) -> int:
    total = 0
    for axis, n in enumerate(domain.dims):
        if domain.is_circular:
            if n >= 3:
                total += int((labels != np.roll(labels, -1, axis=axis)).sum())
            elif n == 2:
                a = np.take(labels, 0, axis=axis)
                b = np.take(labels, 1, axis=axis)
                total += int((a != b).sum())
        else:
            if n < 2:
                continue
            sl_a = [slice(None)] * domain.ndim
            sl_b = [slice(None)] * domain.ndim
            sl_a[axis] = slice(0, n - 1)
            sl_b[axis] = slice(1, n)
            total += int((labels[tuple(sl_a)] != labels[tuple(sl_b)]).sum())
    return total


def boundary_crossings(state: LabelField) -> int:
    """Count unordered adjacent pixel pairs whose labels differ."""
    return _crossings_array(state.labels, state.domain)
