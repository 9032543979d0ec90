"""Deterministic multi-seed runs.

Each seed is independent: its path is generated lazily from
``model.sampler(seed)``, capped at ``horizon`` samples, and fed to the
scanner/estimator.  Seeds may run in worker processes; results are joined
in seed order, so the output never depends on scheduling.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.stats import spearmanr

from ..analysis import (
    ErrorCurve,
    GrowthBoundSpec,
    SeedLog,
    ViolationRow,
    bound_violation_rate,
    error_curves,
    ks_distance,
)
from ..estimator import estimate
from ..processes import sample_path
from ..stopping import ScannerState, capped
from .config import ExperimentConfig

log = logging.getLogger(__name__)


def run_seed(config: ExperimentConfig, seed: int) -> SeedLog:
    model = config.model
    sampler = model.sampler(seed)
    more = capped(sampler, config.horizon)
    state = ScannerState()
    hist = state.history
    rows: list[tuple[int, int, int, float, float, float]] = []
    for ev in estimate(more, config.family, config.schedule, config.k_max, state):
        z = ev.zeta
        if model.has_oracle:
            start = 0 if model.memory is None else z + 1 - max(model.memory, 1)
            oracle = model.cond_exp(hist.view(start, z + 1))
        else:
            oracle = math.nan
        target = hist[z + 1] if hist.fill_to(z + 2, more) else math.nan
        rows.append((ev.k, ev.eta, z, ev.g, oracle, target))
        # keep what the next scan (l_{k+1} <= k+1) and the oracle still need
        keep = z - ev.k
        if model.memory is not None:
            keep = min(keep, z + 1 - max(model.memory, 1))
        hist.discard_before(keep)
    cols = list(zip(*rows)) if rows else [()] * 6
    return SeedLog(
        seed=seed,
        k=np.array(cols[0], dtype=np.int64),
        eta=np.array(cols[1], dtype=np.int64),
        zeta=np.array(cols[2], dtype=np.int64),
        g=np.array(cols[3], dtype=np.float64),
        oracle=np.array(cols[4], dtype=np.float64),
        target=np.array(cols[5], dtype=np.float64),
        truncated=len(rows) < config.k_max,
        consumed=len(hist),
        degenerate_steps=getattr(sampler, "degenerate_steps", 0),
    )


def run_seeds(config: ExperimentConfig, seeds: Sequence[int] | None = None) -> list[SeedLog]:
    seeds = config.seeds if seeds is None else tuple(seeds)
    if config.workers == 1 or len(seeds) == 1:
        return [run_seed(config, s) for s in seeds]
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(run_seed, [config] * len(seeds), seeds,
                             chunksize=max(1, len(seeds) // (4 * config.workers))))


# ---------------------------------------------------------------------------
# Checks


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: dict[str, Any] = field(default_factory=dict)


def reference_level(k_max: int) -> int:
    return max(1, k_max // 10)


def spearman_fraction(logs: Sequence[SeedLog], k_max: int) -> float:
    """Fraction of seeds whose ``|g_k - oracle_k|``, ``k = 1..k_max``, has
    negative rank correlation with ``k``."""
    neg = 0
    for s in logs:
        err = s.abs_err[:k_max]
        if err.size >= 3 and np.ptp(err) > 0:
            rho = spearmanr(np.arange(1, err.size + 1), err)[0]
            neg += bool(rho < 0)
    return neg / len(logs)


def consistency_checks(config: ExperimentConfig, logs: Sequence[SeedLog],
                       curve: ErrorCurve) -> list[Check]:
    """Trend checks between ``k_ref = k_max // 10`` and ``k_max``."""
    k_hi = config.k_max
    k_lo = reference_level(k_hi)
    out = []
    try:
        hi, lo = curve.row(k_hi), curve.row(k_lo)
    except KeyError:
        return [Check(name, False, {"reason": f"k={k_hi} not reached"}) for name in config.checks]
    for name in config.checks:
        if name == "mse_decrease":
            out.append(Check(name, bool(hi["mean_sq_err"] < lo["mean_sq_err"]),
                             {"k_ref": k_lo, "mse_ref": lo["mean_sq_err"], "mse": hi["mean_sq_err"]}))
        elif name == "median_halving":
            out.append(Check(name, bool(hi["median_abs_err"] <= 0.5 * lo["median_abs_err"]),
                             {"k_ref": k_lo, "median_ref": lo["median_abs_err"],
                              "median": hi["median_abs_err"]}))
        elif name == "spearman_negative":
            frac = spearman_fraction(logs, k_hi)
            out.append(Check(name, frac >= 0.8, {"fraction": frac, "threshold": 0.8}))
    return out


# ---------------------------------------------------------------------------
# Reports


@dataclass
class RunReport:
    config: ExperimentConfig
    logs: list[SeedLog]
    curve: ErrorCurve
    bound_rows: list[ViolationRow]
    checks: list[Check]
    wall_seconds: float = 0.0

    def counters(self) -> dict[str, Any]:
        consumed = [s.consumed for s in self.logs]
        return {
            "seeds": len(self.logs),
            "truncated": sum(s.truncated for s in self.logs),
            "degenerate_steps": sum(s.degenerate_steps for s in self.logs),
            "samples_min": int(min(consumed)),
            "samples_median": float(np.median(consumed)),
            "samples_max": int(max(consumed)),
        }

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def bound_spec(config: ExperimentConfig) -> GrowthBoundSpec | None:
    if config.epsilon is None or not config.family.is_finite:
        return None
    return GrowthBoundSpec(config.epsilon, config.family, config.schedule)


def run(config: ExperimentConfig) -> RunReport:
    """Simulate every seed, aggregate error curves and, when ``epsilon`` is
    set on a finite family, growth-bound violation rates."""
    t0 = time.perf_counter()
    logs = run_seeds(config)
    curve = error_curves(logs, config.k_max)
    spec = bound_spec(config)
    rows = []
    if spec is not None:
        rows = bound_violation_rate([s.zeta for s in logs], spec,
                                    range(config.k_min, config.k_max + 1),
                                    consumed=[s.consumed for s in logs])
    checks = consistency_checks(config, logs, curve) if config.model.has_oracle else []
    report = RunReport(config, logs, curve, rows, checks, time.perf_counter() - t0)
    log.info("ran %d seeds in %.2fs", len(logs), report.wall_seconds)
    return report


def verify_bound(config: ExperimentConfig) -> RunReport:
    """Growth-bound violation rates for ``k_min..k_max``."""
    spec = bound_spec(config)
    if spec is None:
        raise ValueError("verify-bound needs epsilon and a finite partition family")
    report = run(config)
    report.checks = [Check(
        "bound_violation",
        all(r.ok for r in report.bound_rows if r.n_seeds),
        {"worst_excess": max((r.rate - r.ceiling - 3 * r.stderr for r in report.bound_rows
                              if r.n_seeds), default=math.nan)},
    )]
    return report


@dataclass(frozen=True)
class DistRow:
    k: int
    n_stopped: int
    n_reference: int
    ks: float
    threshold: float

    @property
    def ok(self) -> bool:
        return self.ks <= self.threshold


def ks_threshold(n: int, m: int) -> float:
    """Two-sample KS critical value near the 0.15% level:
    ``1.9 * sqrt((n + m) / (n m))`` (0.06 at 2000 vs 2000)."""
    return 1.9 * math.sqrt((n + m) / (n * m))


def reference_seeds(seeds: Sequence[int]) -> list[int]:
    """As many seeds again, disjoint from ``seeds``."""
    top = max(seeds) + 1
    return list(range(top, top + len(seeds)))


def dist_check(config: ExperimentConfig, ks: Sequence[int] | None = None,
               threshold: float | None = None) -> tuple[RunReport, list[DistRow]]:
    """Compare ``{X_{zeta_k+1}}`` over the seeds with ``{X_1}`` over as many
    independent seeds, for each ``k``."""
    ks = list(ks or config.dist_ks or (config.k_max,))
    if max(ks) > config.k_max:
        config = config.with_overrides(k_max=max(ks))
    report = run(config)
    x1 = np.array([sample_path(config.model, s, 2)[1] for s in reference_seeds(config.seeds)])
    rows = []
    for k in ks:
        stopped = np.array([s.target[k - 1] for s in report.logs if s.k.size >= k])
        stopped = stopped[~np.isnan(stopped)]
        if stopped.size == 0:
            rows.append(DistRow(k, 0, x1.size, math.nan, math.nan))
            continue
        thr = threshold if threshold is not None else (
            config.ks_threshold if config.ks_threshold is not None
            else ks_threshold(stopped.size, x1.size))
        rows.append(DistRow(k, int(stopped.size), int(x1.size), ks_distance(stopped, x1), thr))
    report.checks = [Check(f"dist_k{r.k}", r.ok, {"ks": r.ks, "threshold": r.threshold})
                     for r in rows]
    return report, rows
