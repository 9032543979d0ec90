"""The intermittent estimator ``g_k = (1/k) * sum_{j<k} x_{zeta_j + 1}``.

``g_k`` is issued at time ``zeta_k`` as the estimate of
``E(X_{zeta_k+1} | X_0..X_{zeta_k})``.  It only uses targets at
``zeta_j + 1 <= zeta_{j+1} <= zeta_k``, so it is available then.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .partitions import PartitionFamily
from .stopping import (
    LagSchedule,
    ScannerState,
    SampleBuffer,
    Supplier,
    Truncated,
    scan_next,
    supplier,
)


class NoPrediction(LookupError):
    """No stopping time has been reached yet."""


@dataclass(frozen=True)
class PredictionEvent:
    k: int
    zeta: int
    g: float
    at_time: int
    eta: int = 0
    #: index of the newest target in the average, ``zeta_{k-1} + 1``
    target_index: int = 0


class CompensatedSum:
    """Neumaier summation; exact for integer-valued terms below 2**53."""

    __slots__ = ("total", "_comp")

    def __init__(self) -> None:
        self.total = 0.0
        self._comp = 0.0

    def add(self, x: float) -> None:
        t = self.total + x
        if abs(self.total) >= abs(x):
            self._comp += (self.total - t) + x
        else:
            self._comp += (x - t) + self.total
        self.total = t

    @property
    def value(self) -> float:
        return self.total + self._comp


class IntermittentEstimator:
    """Online estimator fed one sample at a time via :meth:`push`."""

    def __init__(self, family: PartitionFamily, schedule: LagSchedule):
        self.family = family
        self.schedule = schedule
        self.k = 0  # completed predictions
        self.n = 0  # samples seen
        self.zeta_prev = 0
        self.sum_targets = CompensatedSum()
        self.pending: int | None = 1  # index of the target still awaited
        self._last: tuple[int, float] | None = None
        self._recent: deque[float] = deque()
        self._codes: deque[float] = deque()
        self._pattern: tuple[float, ...] = ()
        self._level = 0
        self._lag = 0

    def _code(self, x: float, level: int) -> float:
        return float(self.family.codes(np.array([x]), level)[0])

    def _arm(self) -> None:
        """Set up the pattern for the next level once ``x_{zeta_prev}`` is in."""
        self._level = self.k + 1
        self._lag = self.schedule(self._level)
        # l_j <= j, so level + 1 raw samples always cover the next block
        self._recent = deque(self._recent, maxlen=self._level + 1)
        block = list(self._recent)[-self._lag :]
        if len(block) < self._lag:
            raise ValueError(f"l_{self._level} = {self._lag} exceeds the available history")
        self._pattern = tuple(self.family.codes(np.asarray(block), self._level))
        # codes of the last l-1 samples seed the rolling window
        self._codes = deque(self._pattern[1:], maxlen=self._lag)

    def push(self, x: float, index: int | None = None) -> PredictionEvent | None:
        """Consume ``x_n`` (``n`` = samples pushed so far).

        If ``index`` is given it must equal ``n``; anything else is a usage
        error.  At most one event is returned per sample.
        """
        n = self.n
        if index is not None and index != n:
            raise ValueError(f"expected sample x_{n}, got x_{index}")
        x = float(x)
        code = self._code(x, self._level if n > 0 else 1)  # validates x first
        self.n += 1
        self._recent.append(x)
        if n == 0:
            self._arm()
            return None
        if self.pending == n:
            self.sum_targets.add(x)
            self.pending = None
        self._codes.append(code)
        if len(self._codes) < self._lag or tuple(self._codes) != self._pattern:
            return None
        # x_n closes a recurrence: zeta_{k+1} = n
        assert self.pending is None, "target must precede its stopping time"
        self.k += 1
        eta = n - self.zeta_prev
        target = self.zeta_prev + 1
        self.zeta_prev = n
        g = self.sum_targets.value / self.k
        self._last = (self.k, g)
        self.pending = n + 1
        self._arm()
        return PredictionEvent(self.k, n, g, at_time=n, eta=eta, target_index=target)

    def predict(self) -> tuple[int, float]:
        """Most recent ``(k, g_k)``."""
        if self._last is None:
            raise NoPrediction("no stopping time reached yet")
        return self._last


def predict_at(est: IntermittentEstimator) -> tuple[int, float]:
    return est.predict()


def push(est: IntermittentEstimator, x: float) -> PredictionEvent | None:
    return est.push(x)


def estimate(
    path: np.ndarray | Supplier,
    family: PartitionFamily,
    schedule: LagSchedule,
    k_max: int | None = None,
    state: ScannerState | None = None,
) -> Iterator[PredictionEvent]:
    """Bulk driver: the same events as repeated :meth:`push`, produced with
    the vectorized scanner.  Stops quietly when the path runs out."""
    more = path if callable(path) else supplier(path)
    state = state if state is not None else ScannerState(history=SampleBuffer())
    hist = state.history
    total = CompensatedSum()
    while k_max is None or state.k <= k_max:
        z = state.zeta_prev
        try:
            ev = scan_next(state, family, schedule, more)
        except Truncated:
            return
        total.add(hist[z + 1])
        yield PredictionEvent(ev.k, ev.zeta, total.value / ev.k, at_time=ev.zeta,
                              eta=ev.eta, target_index=z + 1)
