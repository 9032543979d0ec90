"""Recursive block-recurrence stopping times and their reverse-time duals.

Forward scan.  With ``zeta_0 = 0`` and block length ``l_k`` at level ``k``::

    eta_k  = min{t > 0 : [x_{z-l_k+1+t .. z+t}]^k == [x_{z-l_k+1 .. z}]^k},  z = zeta_{k-1}
    zeta_k = zeta_{k-1} + eta_k

Because ``1 <= l_k <= k`` and ``zeta_{k-1} >= k - 1`` the scan never touches
negative indices, so a one-sided path is enough.

Reverse scan.  On a suffix ending at position 0, for ``i = 1..k`` look
backwards for the first earlier occurrence of the level-``(k-i+1)`` block of
length ``l_{k-i+1}`` ending at the current position.  If the forward scan
gives ``zeta_k = l`` on ``x_0..x_l`` then the reverse scan of that suffix
(re-indexed so that ``l`` becomes 0) ends at ``-l``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .partitions import PartitionFamily

# Sample supplier: called with a count, returns up to that many new samples
# (fewer, possibly none, once the source is exhausted).
Supplier = Callable[[int], Sequence[float]]

_FIRST_CHUNK = 64
_MAX_CHUNK = 1 << 16


class HorizonError(LookupError):
    """A finite lag table ran out before the requested level."""


class Truncated(Exception):
    """No recurrence was found within the available samples.

    ``consumed`` is the number of samples available when the search gave up
    (forward scan) and ``reached`` the reverse-scan step that failed.
    """

    def __init__(self, message: str, *, k: int, consumed: int = 0, reached: int = 0):
        super().__init__(message)
        self.k = k
        self.consumed = consumed
        self.reached = reached


# ---------------------------------------------------------------------------
# Lag schedules


@dataclass(frozen=True)
class LagSchedule:
    """Nondecreasing block lengths ``1 <= l_k <= k``.

    ``"linear"``: ``l_k = k``.  ``"log_floor"``: ``l_k = min(k, max(1,
    floor(c * log2 k)))``; the ``min`` keeps ``l_k <= k`` for small ``k``
    where ``floor(c log2 k)`` would exceed it.  ``"custom"``: an explicit
    table ``l_1, l_2, ...``, valid up to its length.
    """

    rule: str = "log_floor"
    c: float = 3.0
    table: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.rule not in ("linear", "log_floor", "custom"):
            raise ValueError(f"unknown lag rule {self.rule!r}")
        if self.rule == "log_floor" and not self.c > 0:
            raise ValueError("log_floor needs c > 0")
        if self.rule == "custom":
            table = tuple(int(v) for v in self.table)
            object.__setattr__(self, "table", table)
            if not table:
                raise ValueError("custom lag table is empty")
            prev = 1
            for k, lk in enumerate(table, start=1):
                if not 1 <= lk <= k:
                    raise ValueError(f"need 1 <= l_k <= k, got l_{k} = {lk}")
                if lk < prev:
                    raise ValueError(f"lag table decreases at k={k}")
                prev = lk

    def __call__(self, k: int) -> int:
        if k < 1:
            raise ValueError(f"level must be >= 1, got {k}")
        if self.rule == "linear":
            return k
        if self.rule == "log_floor":
            return min(k, max(1, math.floor(self.c * math.log2(k))))
        if k > len(self.table):
            raise HorizonError(f"custom lag table has {len(self.table)} entries, need l_{k}")
        return self.table[k - 1]

    @property
    def horizon(self) -> float:
        return len(self.table) if self.rule == "custom" else math.inf

    @property
    def unbounded(self) -> bool | None:
        """True for the rule-based schedules; None for a finite table,
        where unboundedness cannot be checked."""
        return None if self.rule == "custom" else True

    def to_dict(self) -> dict[str, Any]:
        if self.rule == "linear":
            return {"rule": "linear"}
        if self.rule == "log_floor":
            return {"rule": "log_floor", "c": self.c}
        return {"rule": "custom", "table": list(self.table)}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> LagSchedule:
        d = dict(d)
        if "table" in d:
            d["table"] = tuple(d["table"])
        return cls(**d)


def j_of_n(schedule: LagSchedule, n: int) -> int:
    """Smallest ``j >= 1`` with ``l_{j+1} > n``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if schedule(2) > n:
        return 1
    # exponential then binary search on the monotone predicate
    lo, hi = 1, 2
    while schedule(hi + 1) <= n:
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if schedule(mid + 1) > n:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# Sample buffer and suppliers


class SampleBuffer:
    """Growable float64 buffer indexed by absolute time.

    Samples before ``offset`` may be dropped with :meth:`discard_before` to
    bound memory on long runs.
    """

    def __init__(self, initial: Iterable[float] = ()):
        data = np.asarray(list(initial) if not isinstance(initial, np.ndarray) else initial,
                          dtype=np.float64)
        self._data = np.empty(max(256, 2 * data.size))
        self._data[: data.size] = data
        self._n = data.size
        self.offset = 0

    def __len__(self) -> int:
        """One past the last absolute index held."""
        return self.offset + self._n

    def extend(self, values: Sequence[float]) -> None:
        values = np.asarray(values, dtype=np.float64)
        need = self._n + values.size
        if need > self._data.size:
            grown = np.empty(max(need, 2 * self._data.size))
            grown[: self._n] = self._data[: self._n]
            self._data = grown
        self._data[self._n : need] = values
        self._n = need

    def view(self, start: int, stop: int) -> np.ndarray:
        """Samples at absolute indices ``start..stop-1`` (no copy)."""
        if start < self.offset or stop > len(self) or start > stop:
            raise IndexError(f"[{start}, {stop}) not held (have [{self.offset}, {len(self)}))")
        return self._data[start - self.offset : stop - self.offset]

    def __getitem__(self, i: int) -> float:
        if not self.offset <= i < len(self):
            raise IndexError(i)
        return float(self._data[i - self.offset])

    def discard_before(self, i: int) -> None:
        drop = min(max(i - self.offset, 0), self._n)
        if drop:
            self._data[: self._n - drop] = self._data[drop : self._n]
            self._n -= drop
            self.offset += drop

    def fill_to(self, stop: int, more: Supplier) -> bool:
        """Pull from ``more`` until ``len(self) >= stop``; False if it ran dry."""
        while len(self) < stop:
            got = more(max(stop - len(self), 256))
            if len(got) == 0:
                return False
            self.extend(got)
        return True


def supplier(source: Iterable[float] | np.ndarray) -> Supplier:
    """Wrap an array or iterable as a chunked sample supplier."""
    if isinstance(source, np.ndarray) or isinstance(source, (list, tuple)):
        arr = np.asarray(source, dtype=np.float64)
        pos = 0

        def take_array(n: int) -> np.ndarray:
            nonlocal pos
            out = arr[pos : pos + n]
            pos += out.size
            return out

        return take_array

    it = iter(source)

    def take_iter(n: int) -> np.ndarray:
        from itertools import islice

        return np.fromiter(islice(it, n), dtype=np.float64)

    return take_iter


def capped(more: Supplier, horizon: int) -> Supplier:
    """Limit a supplier to ``horizon`` samples in total."""
    left = horizon

    def take(n: int) -> Sequence[float]:
        nonlocal left
        if left <= 0:
            return ()
        got = more(min(n, left))
        left -= len(got)
        return got

    return take


def _no_more(n: int) -> Sequence[float]:
    return ()


# ---------------------------------------------------------------------------
# Forward scan


@dataclass(frozen=True)
class ScanEvent:
    k: int
    eta: int
    zeta: int


@dataclass
class ScannerState:
    """``k`` is the index of the next stopping time; ``zeta_prev`` is
    ``zeta_{k-1}``; ``history`` holds at least ``x_0..x_{zeta_prev}``."""

    k: int = 1
    zeta_prev: int = 0
    history: SampleBuffer = field(default_factory=SampleBuffer)


def _first_match_forward(codes: np.ndarray, pattern: np.ndarray, n_windows: int) -> int:
    """Index of the first window ``codes[s:s+l] == pattern`` with
    ``s < n_windows``, or -1."""
    l = pattern.size
    cand = np.flatnonzero(codes[l - 1 : l - 1 + n_windows] == pattern[l - 1])
    for j in range(l - 2, -1, -1):
        if cand.size == 0:
            return -1
        cand = cand[codes[cand + j] == pattern[j]]
    return int(cand[0]) if cand.size else -1


def scan_next(
    state: ScannerState,
    family: PartitionFamily,
    schedule: LagSchedule,
    more: Supplier = _no_more,
) -> ScanEvent:
    """Find ``eta_k`` and advance ``state`` to ``(k + 1, zeta_k)``.

    Raises :class:`Truncated` if ``more`` runs dry first; the state is then
    left at ``(k, zeta_{k-1})`` with the extra samples kept, so the call can
    be retried after extending the source.
    """
    hist = state.history
    k, z = state.k, state.zeta_prev
    if not hist.fill_to(z + 1, more):
        raise Truncated(f"need x_{z} to start level {k}", k=k, consumed=len(hist))
    l = schedule(k)
    if not 1 <= l <= k or z - l + 1 < 0:
        raise ValueError(f"block x_{z - l + 1}..x_{z} is out of range (l_{k} = {l})")
    start = z - l + 1
    pattern = family.codes(hist.view(start, z + 1), k)

    t_lo, chunk = 1, _FIRST_CHUNK
    while True:
        hist.fill_to(z + t_lo + chunk, more)
        t_hi = min(t_lo + chunk, len(hist) - z)  # exclusive
        if t_hi <= t_lo:
            raise Truncated(
                f"no recurrence at level {k} within {len(hist)} samples",
                k=k, consumed=len(hist),
            )
        region = family.codes(hist.view(start + t_lo, z + t_hi), k)
        s = _first_match_forward(region, pattern, t_hi - t_lo)
        if s >= 0:
            eta = t_lo + s
            state.k, state.zeta_prev = k + 1, z + eta
            return ScanEvent(k, eta, z + eta)
        t_lo, chunk = t_hi, min(2 * chunk, _MAX_CHUNK)


def scan(
    path: Iterable[float] | np.ndarray | Supplier,
    family: PartitionFamily,
    schedule: LagSchedule,
    k_max: int | None = None,
    state: ScannerState | None = None,
) -> Iterator[ScanEvent]:
    """Yield stopping-time events until ``k_max`` or until the path runs out."""
    more = path if callable(path) else supplier(path)
    state = state if state is not None else ScannerState()
    while k_max is None or state.k <= k_max:
        try:
            yield scan_next(state, family, schedule, more)
        except Truncated:
            return


def stopping_times(
    path: Sequence[float] | np.ndarray,
    family: PartitionFamily,
    schedule: LagSchedule,
    k_max: int | None = None,
) -> list[int]:
    """``[zeta_1, zeta_2, ...]`` over a finite path."""
    return [ev.zeta for ev in scan(path, family, schedule, k_max)]


# ---------------------------------------------------------------------------
# Reverse scan


def _last_match_backward(codes: np.ndarray, pattern: np.ndarray) -> int:
    """Start index of the last window equal to ``pattern``, or -1."""
    l = pattern.size
    n_windows = codes.size - l + 1
    if n_windows <= 0:
        return -1
    cand = np.flatnonzero(codes[:n_windows] == pattern[0])
    for j in range(1, l):
        if cand.size == 0:
            return -1
        cand = cand[codes[cand + j] == pattern[j]]
    return int(cand[-1]) if cand.size else -1


def reverse_scan(
    suffix: Sequence[float] | np.ndarray,
    family: PartitionFamily,
    schedule: LagSchedule,
    k: int,
) -> list[tuple[int, int]]:
    """Reverse stopping times ``[(eta_hat_i, zeta_hat_i)]`` for ``i = 1..k``.

    ``suffix[-1]`` is position 0 and ``suffix[0]`` is position ``-m`` with
    ``m = len(suffix) - 1``.  ``zeta_hat_0 = 0`` is implicit.
    """
    y = np.asarray(suffix, dtype=np.float64)
    m = y.size - 1
    out: list[tuple[int, int]] = []
    if k < 0:
        raise ValueError("k must be nonnegative")
    e = m  # array index of the current position zeta_hat_{i-1}
    for i in range(1, k + 1):
        level = k - i + 1
        l = schedule(level)
        if e - l + 1 < 0:
            raise Truncated(f"block for step {i} starts before -{m}", k=k, reached=i)
        pattern = family.codes(y[e - l + 1 : e + 1], level)
        # candidate window ends at e - t for t = t_lo..t_hi-1
        t_lo, chunk, found = 1, _FIRST_CHUNK, -1
        while found < 0:
            t_hi = min(t_lo + chunk, e - l + 2)
            if t_hi <= t_lo:
                raise Truncated(f"no earlier occurrence at step {i}", k=k, reached=i)
            lo_idx = e - (t_hi - 1) - l + 1
            region = family.codes(y[lo_idx : e - t_lo + 1], level)
            s = _last_match_backward(region, pattern)
            if s >= 0:
                found = (e - l + 1) - (lo_idx + s)
            t_lo, chunk = t_hi, min(2 * chunk, _MAX_CHUNK)
        e -= found
        out.append((found, e - m))
    return out
