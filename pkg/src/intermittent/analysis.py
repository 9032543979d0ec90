"""Metrics and aggregates over stopping-time/estimator runs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .partitions import PartitionFamily
from .stopping import LagSchedule


class UnsupportedFamily(ValueError):
    """The operation needs a partition family with finitely many cells."""


# ---------------------------------------------------------------------------
# d* metric on one-sided sequences


class DStar(NamedTuple):
    value: float
    #: bound on the omitted terms beyond the evaluated depth
    tail_bound: float


def dstar(a: Sequence[float], b: Sequence[float], depth: int | None = None,
          eventually_equal: bool = False) -> DStar:
    """Truncated ``d*`` between ``(..., a_{-1}, a_0)`` and ``(..., b_{-1}, b_0)``.

    ``a[i]`` is the coordinate at time ``-i``.  Terms ``i = 0..depth`` are
    summed; every omitted term is below ``2**-(i+1)`` so the remainder is
    at most ``2**-(depth+1)``, or 0 if the caller knows the sequences agree
    beyond ``depth``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if depth is None:
        if a.size != b.size:
            raise ValueError(f"sequences have different depths ({a.size} vs {b.size})")
        depth = a.size - 1
    if depth < 0 or a.size < depth + 1 or b.size < depth + 1:
        raise ValueError(f"both sequences must provide coordinates 0..-{depth}")
    diff = np.abs(a[: depth + 1] - b[: depth + 1])
    weights = np.ldexp(1.0, -np.arange(1, depth + 2))
    value = float(np.sum(weights * diff / (1.0 + diff)))
    return DStar(value, 0.0 if eventually_equal else math.ldexp(1.0, -depth - 1))


# ---------------------------------------------------------------------------
# Growth bound on zeta_k for finite partitions


class GrowthBound(NamedTuple):
    log2: float
    #: ``2**log2``, saturating at ``inf``
    value: float


@dataclass(frozen=True)
class GrowthBoundSpec:
    epsilon: float
    family: PartitionFamily
    schedule: LagSchedule

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.family.is_finite:
            raise UnsupportedFamily("the growth bound needs finite partitions")
        if self.summable() is False:
            raise ValueError(
                f"sum (k+1) 2^(-l_k eps) diverges for {self.schedule.to_dict()} "
                f"with eps={self.epsilon}"
            )

    def summable(self) -> bool | None:
        """Whether ``sum_k (k+1) 2**(-l_k eps)`` converges; None if unknown.

        ``log_floor`` gives terms of order ``k**(1 - c eps)``, so the sum
        converges iff ``c eps > 2``.
        """
        rule = self.schedule.rule
        if rule == "linear":
            return True
        if rule == "log_floor":
            return self.schedule.c * self.epsilon > 2
        return None

    def partial_sum(self, horizon: int) -> float:
        horizon = int(min(horizon, self.schedule.horizon))
        return math.fsum((k + 1) * 2.0 ** (-self.schedule(k) * self.epsilon)
                         for k in range(1, horizon + 1))


def growth_bound(spec: GrowthBoundSpec, k: int) -> GrowthBound:
    """``|P_k|**l_k * 2**(l_k eps)``, computed in log space."""
    lk = spec.schedule(k)
    if lk < 1:
        raise ValueError(f"l_{k} must be >= 1")
    n = spec.family.cell_count(k)
    if math.isinf(n):
        raise UnsupportedFamily(f"infinite partition at level {k}")
    log2 = lk * (math.log2(n) + spec.epsilon)
    return GrowthBound(log2, 2.0**log2 if log2 < 1023 else math.inf)


def violation_ceiling(spec: GrowthBoundSpec, k: int) -> float:
    """``(k+1) 2**(-l_k eps)``: bound on ``P(zeta_k >= growth bound)``."""
    return (k + 1) * 2.0 ** (-spec.schedule(k) * spec.epsilon)


@dataclass(frozen=True)
class ViolationRow:
    k: int
    n_seeds: int
    violations: int
    rate: float
    ceiling: float
    #: binomial standard error at the ceiling, ``sqrt(p (1-p) / n)``
    stderr: float
    bound_log2: float
    n_censored: int = 0

    @property
    def ok(self) -> bool:
        return self.rate <= self.ceiling + 3.0 * self.stderr


def bound_violation_rate(
    zetas: Sequence[Sequence[int]],
    spec: GrowthBoundSpec,
    ks: Iterable[int],
    consumed: Sequence[int] | None = None,
) -> list[ViolationRow]:
    """Per-``k`` fraction of seeds with ``zeta_k >= |P_k|**l_k 2**(l_k eps)``.

    ``zetas[s]`` lists ``zeta_1, zeta_2, ...`` for seed ``s``.  A seed whose
    stream stops before ``k`` is censored; if ``consumed[s]`` (samples seen
    when it stopped) already reaches the bound it counts as a violation,
    otherwise it is left out.
    """
    rows = []
    for k in ks:
        bound = growth_bound(spec, k)
        hits = n = censored = 0
        for s, zs in enumerate(zetas):
            if len(zs) >= k:
                n += 1
                hits += zs[k - 1] >= bound.value
            elif consumed is not None and consumed[s] >= bound.value:
                n += 1
                hits += 1
            else:
                censored += 1
        ceiling = violation_ceiling(spec, k)
        p = min(ceiling, 1.0)
        rate = hits / n if n else math.nan
        stderr = math.sqrt(p * (1 - p) / n) if n else math.nan
        rows.append(ViolationRow(k, n, hits, rate, ceiling, stderr, bound.log2, censored))
    return rows


# ---------------------------------------------------------------------------
# Two-sample Kolmogorov-Smirnov distance


def ks_distance(a: Sequence[float], b: Sequence[float]) -> float:
    """``sup_x |F_a(x) - F_b(x)|`` for the empirical CDFs."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


# ---------------------------------------------------------------------------
# Per-seed logs and error curves


@dataclass
class SeedLog:
    """Everything recorded for one seed; arrays are indexed by ``k - 1``."""

    seed: int
    k: np.ndarray
    eta: np.ndarray
    zeta: np.ndarray
    g: np.ndarray
    #: ``E(X_{zeta_k+1} | X_0..X_{zeta_k})`` from the model, NaN without oracle
    oracle: np.ndarray
    #: realized ``x_{zeta_k + 1}``, NaN if the path ended at ``zeta_k``
    target: np.ndarray
    truncated: bool = False
    consumed: int = 0
    degenerate_steps: int = 0

    @property
    def abs_err(self) -> np.ndarray:
        return np.abs(self.g - self.oracle)


@dataclass
class ErrorCurve:
    k: np.ndarray
    n_seeds: np.ndarray
    median_abs_err: np.ndarray
    mean_abs_err: np.ndarray
    q10_abs_err: np.ndarray
    q90_abs_err: np.ndarray
    mean_sq_err: np.ndarray
    #: mean of ``(g_k - g*_k)**2`` with ``g*_k`` the exact conditional mean;
    #: equals the conditional excess squared loss of ``g_k`` over ``g*_k``
    bayes_gap_sq: np.ndarray
    #: mean realized excess loss ``(x - g)**2 - (x - g*)**2``, x = x_{zeta_k+1}
    excess_loss: np.ndarray
    zeta_median: np.ndarray
    seeds: tuple[int, ...] = field(default=())

    def row(self, k: int) -> dict[str, float]:
        i = int(np.searchsorted(self.k, k))
        if i >= self.k.size or self.k[i] != k:
            raise KeyError(k)
        return {name: getattr(self, name)[i] for name in (
            "n_seeds", "median_abs_err", "mean_abs_err", "q10_abs_err", "q90_abs_err",
            "mean_sq_err", "bayes_gap_sq", "excess_loss", "zeta_median")}


def error_curves(logs: Sequence[SeedLog], k_max: int | None = None) -> ErrorCurve:
    """Aggregate over seeds, per ``k``, using the seeds that reached ``k``.

    Without an oracle the error columns are NaN and only ``zeta_median``
    is informative.
    """
    reached = max((log.k.size for log in logs), default=0)
    k_top = reached if k_max is None else min(k_max, reached)
    ks = np.arange(1, k_top + 1)
    cols: dict[str, list[float]] = {c: [] for c in (
        "n", "med", "mean", "q10", "q90", "mse", "gap", "excess", "zeta")}
    for k in ks:
        live = [log for log in logs if log.k.size >= k]
        err = np.array([log.g[k - 1] - log.oracle[k - 1] for log in live])
        zeta = np.array([log.zeta[k - 1] for log in live], dtype=np.float64)
        x = np.array([log.target[k - 1] for log in live])
        g = np.array([log.g[k - 1] for log in live])
        g_star = np.array([log.oracle[k - 1] for log in live])
        cols["n"].append(len(live))
        cols["zeta"].append(float(np.median(zeta)))
        if np.all(np.isnan(err)):
            for c in ("med", "mean", "q10", "q90", "mse", "gap", "excess"):
                cols[c].append(math.nan)
            continue
        a = np.abs(err)
        q10, med, q90 = np.quantile(a, [0.1, 0.5, 0.9])
        cols["med"].append(float(med))
        cols["q10"].append(float(q10))
        cols["q90"].append(float(q90))
        cols["mean"].append(float(a.mean()))
        cols["mse"].append(float(np.mean(err**2)))
        cols["gap"].append(float(np.mean((g - g_star) ** 2)))
        excess = (x - g) ** 2 - (x - g_star) ** 2
        cols["excess"].append(float(np.nanmean(excess)) if np.any(~np.isnan(excess)) else math.nan)
    return ErrorCurve(
        k=ks,
        n_seeds=np.array(cols["n"], dtype=np.int64),
        median_abs_err=np.array(cols["med"]),
        mean_abs_err=np.array(cols["mean"]),
        q10_abs_err=np.array(cols["q10"]),
        q90_abs_err=np.array(cols["q90"]),
        mean_sq_err=np.array(cols["mse"]),
        bayes_gap_sq=np.array(cols["gap"]),
        excess_loss=np.array(cols["excess"]),
        zeta_median=np.array(cols["zeta"]),
        seeds=tuple(log.seed for log in logs),
    )
