"""Nested interval partitions of the real line and the level-k quantizer.

Three families are provided:

* :class:`DyadicFinite` -- ``cells(k)`` dyadic subintervals of ``[lo, hi)``
  plus the two unbounded tails ``(-inf, lo)`` and ``[hi, inf)``.  Levels are
  built by bisecting the widest (leftmost first) cell, so any nondecreasing
  cell count gives a nested family; power-of-two counts give equal widths.
* :class:`DyadicInfinite` -- the countable grid ``[i 2^-k, (i+1) 2^-k)``.
* :class:`FiniteAlphabetExact` -- point cells for a finite alphabet, no
  quantization at all.

Cells are identified by ``(level, index)``.  The vectorized :meth:`codes`
method returns the index of every sample as float64 so that block equality
in the scanner is exact integer comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

INFINITE = math.inf

# Largest cell count representable without losing exactness in float64 codes.
_MAX_CELLS = 2**52


class DomainError(ValueError):
    """Raised for inputs outside the domain of a quantizer or oracle."""


@dataclass(frozen=True)
class Cell:
    """An interval cell of the level-``level`` partition.

    Equality and hashing use ``(level, index)`` only.
    """

    lower: float = field(compare=False)
    upper: float = field(compare=False)
    lower_closed: bool = field(compare=False)
    upper_closed: bool = field(compare=False)
    level: int
    index: int

    def __contains__(self, x: float) -> bool:
        if x < self.lower or x > self.upper:
            return False
        if x == self.lower and not self.lower_closed:
            return False
        if x == self.upper and not self.upper_closed:
            return False
        return True

    @property
    def is_point(self) -> bool:
        return self.lower == self.upper

    def issubset(self, other: Cell) -> bool:
        """Interval inclusion, respecting open/closed endpoints."""
        if self.lower < other.lower or self.upper > other.upper:
            return False
        if self.lower == other.lower and self.lower_closed and not other.lower_closed:
            return False
        if self.upper == other.upper and self.upper_closed and not other.upper_closed:
            return False
        return True

    def isdisjoint(self, other: Cell) -> bool:
        lo, lo_closed = max(
            (self.lower, self.lower_closed), (other.lower, other.lower_closed),
            key=lambda p: (p[0], not p[1]),
        )
        hi, hi_closed = min(
            (self.upper, self.upper_closed), (other.upper, other.upper_closed),
            key=lambda p: (p[0], p[1]),
        )
        if lo < hi:
            return False
        return not (lo == hi and lo_closed and hi_closed)

    def __str__(self) -> str:
        if self.is_point:
            return f"{{{self.lower:g}}}"
        left = "[" if self.lower_closed else "("
        right = "]" if self.upper_closed else ")"
        return f"{left}{self.lower:g}, {self.upper:g}{right}"


def diam(c: Cell) -> float:
    """Diameter of a cell: ``upper - lower``, ``inf`` for unbounded cells."""
    if math.isinf(c.lower) or math.isinf(c.upper):
        return INFINITE
    return c.upper - c.lower


# ---------------------------------------------------------------------------
# Cell-count rules for DyadicFinite


@dataclass(frozen=True)
class CellCount:
    """Rule for the number of in-range cells at level ``k``.

    ``rule`` is one of

    * ``"fixed"``: ``count`` cells at every level;
    * ``"pow2_linear"``: ``floor(2 ** (slope * k + intercept))``;
    * ``"pow2_loglog"``: ``floor(2 ** f_k)`` with
      ``f_k = offset + log2(1 + log2(1 + k))``.
    """

    rule: str = "pow2_linear"
    count: int = 2
    slope: float = 1.0
    intercept: float = 0.0
    offset: float = 1.0

    def __post_init__(self) -> None:
        if self.rule not in ("fixed", "pow2_linear", "pow2_loglog"):
            raise ValueError(f"unknown cell-count rule {self.rule!r}")
        if self.rule == "fixed" and self.count < 1:
            raise ValueError("fixed cell count must be >= 1")
        if self.rule == "pow2_linear" and self.slope < 0:
            raise ValueError("pow2_linear slope must be >= 0 (counts must not decrease)")

    def exponent(self, k: int) -> float:
        if self.rule == "pow2_linear":
            return self.slope * k + self.intercept
        if self.rule == "pow2_loglog":
            return self.offset + math.log2(1.0 + math.log2(1.0 + k))
        return math.log2(self.count)

    def __call__(self, k: int) -> int:
        if self.rule == "fixed":
            n = self.count
        else:
            f = self.exponent(k)
            if f > 60:
                raise OverflowError(f"cell count 2**{f:g} too large at level {k}")
            n = 1 << int(f) if float(f).is_integer() else math.floor(2.0**f)
        if n < 1:
            raise ValueError(f"cell count {n} < 1 at level {k}")
        if n > _MAX_CELLS:
            raise OverflowError(f"{n} cells at level {k} exceed float64 resolution")
        return n

    def to_dict(self) -> dict[str, Any]:
        if self.rule == "fixed":
            return {"rule": "fixed", "count": self.count}
        if self.rule == "pow2_linear":
            return {"rule": "pow2_linear", "slope": self.slope, "intercept": self.intercept}
        return {"rule": "pow2_loglog", "offset": self.offset}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> CellCount:
        return cls(**dict(d))


# ---------------------------------------------------------------------------
# Families


class PartitionFamily:
    """Base class.  Subclasses are immutable and safe to share."""

    kind: str = ""
    exact_alphabet: bool = False

    def cell_of(self, x: float, k: int) -> Cell:
        raise NotImplementedError

    def codes(self, xs: np.ndarray, k: int) -> np.ndarray:
        """Cell indices of ``xs`` at level ``k`` as a float64 array."""
        raise NotImplementedError

    def cell_count(self, k: int) -> float:
        raise NotImplementedError

    @property
    def is_finite(self) -> bool:
        return not math.isinf(self.cell_count(1))

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PartitionFamily) and self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash(repr(self.to_dict()))

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.to_dict()!r})"


def _check_level(k: int) -> None:
    if k < 1:
        raise ValueError(f"level must be >= 1, got {k}")


def _check_finite(x: float) -> None:
    if not math.isfinite(x):
        raise DomainError(f"cannot quantize non-finite value {x!r}")


def _bisection_layout(n: int) -> tuple[int, int]:
    """``n = 2**a + r`` with ``0 <= r < 2**a``: the first ``r`` cells of the
    ``2**a`` grid are split in half."""
    a = n.bit_length() - 1
    return a, n - (1 << a)


class DyadicFinite(PartitionFamily):
    kind = "dyadic_finite"

    def __init__(self, lo: float = 0.0, hi: float = 1.0, cells: CellCount | None = None):
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValueError(f"need finite lo < hi, got [{lo}, {hi})")
        self.lo = float(lo)
        self.hi = float(hi)
        self.cells = cells if cells is not None else CellCount()
        self.cells(1)  # fail early on bad rules

    def cell_count(self, k: int, include_tails: bool = False) -> float:
        """Number of cells meeting ``[lo, hi)``; the two tails are added on
        request.  The growth bound uses the in-range count, since processes
        supported on the range never visit the tails."""
        _check_level(k)
        n = self.cells(k)
        return n + 2 if include_tails else n

    def _normalized_index(self, u: float, n: int) -> int:
        a, r = _bisection_layout(n)
        c = min(math.floor(u * (1 << a)), (1 << a) - 1)
        if c < r:
            return min(math.floor(u * (1 << (a + 1))), 2 * r - 1)
        return c + r

    def _bounds(self, index: int, n: int) -> tuple[float, float]:
        a, r = _bisection_layout(n)
        if index < 2 * r:
            j, width = index, 2.0 ** -(a + 1)
        else:
            j, width = index - r, 2.0**-a
        span = self.hi - self.lo
        lower = self.lo + span * j * width
        upper = self.hi if index == n - 1 else self.lo + span * (j + 1) * width
        return lower, upper

    def cell_of(self, x: float, k: int) -> Cell:
        _check_level(k)
        _check_finite(x)
        n = self.cells(k)
        if x < self.lo:
            return Cell(-INFINITE, self.lo, False, False, k, -1)
        if x >= self.hi:
            return Cell(self.hi, INFINITE, True, False, k, n)
        u = (x - self.lo) / (self.hi - self.lo)
        index = self._normalized_index(u, n)
        lower, upper = self._bounds(index, n)
        return Cell(lower, upper, True, False, k, index)

    def codes(self, xs: np.ndarray, k: int) -> np.ndarray:
        _check_level(k)
        xs = np.asarray(xs, dtype=np.float64)
        if not np.all(np.isfinite(xs)):
            raise DomainError("cannot quantize non-finite values")
        n = self.cells(k)
        a, r = _bisection_layout(n)
        u = (xs - self.lo) / (self.hi - self.lo)
        coarse = np.minimum(np.floor(u * float(1 << a)), float((1 << a) - 1))
        fine = np.minimum(np.floor(u * float(1 << (a + 1))), float(2 * r - 1))
        out = np.where(coarse < r, fine, coarse + r)
        out[xs < self.lo] = -1.0
        out[xs >= self.hi] = float(n)
        return out

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi, "cells": self.cells.to_dict()}


class DyadicInfinite(PartitionFamily):
    """Level ``k`` is the grid of half-open intervals of width ``2**-k``."""

    kind = "dyadic_infinite"

    def cell_count(self, k: int) -> float:
        _check_level(k)
        return INFINITE

    def cell_of(self, x: float, k: int) -> Cell:
        _check_level(k)
        _check_finite(x)
        index = math.floor(math.ldexp(x, k))
        return Cell(math.ldexp(index, -k), math.ldexp(index + 1, -k), True, False, k, index)

    def codes(self, xs: np.ndarray, k: int) -> np.ndarray:
        _check_level(k)
        xs = np.asarray(xs, dtype=np.float64)
        if not np.all(np.isfinite(xs)):
            raise DomainError("cannot quantize non-finite values")
        return np.floor(np.ldexp(xs, k))

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind}


class FiniteAlphabetExact(PartitionFamily):
    """Point cells ``{a}`` for each symbol; identical at every level.

    Exempt from the shrinkage requirement: the cells are already points.
    Values outside the alphabet are a :class:`DomainError`.
    """

    kind = "finite_alphabet"
    exact_alphabet = True

    def __init__(self, alphabet: Iterable[float]):
        symbols = sorted({float(a) for a in alphabet})
        if not symbols:
            raise ValueError("alphabet must be nonempty")
        if not all(math.isfinite(a) for a in symbols):
            raise ValueError("alphabet symbols must be finite")
        self.alphabet: tuple[float, ...] = tuple(symbols)
        self._arr = np.array(symbols)

    def cell_count(self, k: int) -> float:
        _check_level(k)
        return len(self.alphabet)

    def cell_of(self, x: float, k: int) -> Cell:
        _check_level(k)
        _check_finite(x)
        i = int(np.searchsorted(self._arr, x))
        if i == len(self.alphabet) or self.alphabet[i] != x:
            raise DomainError(f"{x!r} is not in the alphabet {self.alphabet}")
        return Cell(x, x, True, True, k, i)

    def codes(self, xs: np.ndarray, k: int) -> np.ndarray:
        _check_level(k)
        xs = np.asarray(xs, dtype=np.float64)
        idx = np.searchsorted(self._arr, xs)
        clipped = np.minimum(idx, len(self.alphabet) - 1)
        if not np.all(self._arr[clipped] == xs):
            bad = xs[self._arr[clipped] != xs][0]
            raise DomainError(f"{bad!r} is not in the alphabet {self.alphabet}")
        return idx.astype(np.float64)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "alphabet": list(self.alphabet)}


# ---------------------------------------------------------------------------
# Module-level operations


def cell_of(family: PartitionFamily, x: float, k: int) -> Cell:
    return family.cell_of(x, k)


def quantize_block(family: PartitionFamily, xs: Sequence[float], k: int) -> list[Cell]:
    _check_level(k)
    return [family.cell_of(x, k) for x in xs]


def cell_count(family: PartitionFamily, k: int) -> float:
    """Exact number of cells at level ``k``, or ``math.inf``."""
    return family.cell_count(k)


def loglog_family(lo: float = 0.0, hi: float = 1.0, offset: float = 1.0) -> DyadicFinite:
    """``floor(2**f_k)`` cells on ``[lo, hi)`` with ``f_k = offset + log2(1 + log2(1 + k))``."""
    return DyadicFinite(lo, hi, CellCount("pow2_loglog", offset=offset))


def family_from_dict(d: Mapping[str, Any]) -> PartitionFamily:
    d = dict(d)
    kind = d.pop("kind", None)
    if kind == DyadicFinite.kind:
        lo, hi, cells = d.pop("lo", 0.0), d.pop("hi", 1.0), d.pop("cells", None)
        _no_extra(kind, d)
        return DyadicFinite(lo, hi, CellCount.from_dict(cells) if cells is not None else None)
    if kind == DyadicInfinite.kind:
        _no_extra(kind, d)
        return DyadicInfinite()
    if kind == FiniteAlphabetExact.kind:
        alphabet = d.pop("alphabet")
        _no_extra(kind, d)
        return FiniteAlphabetExact(alphabet)
    raise ValueError(f"unknown partition family kind {kind!r}")


def _no_extra(kind: str, extra: Mapping[str, Any]) -> None:
    if extra:
        raise ValueError(f"unexpected keys for {kind}: {sorted(extra)}")
