"""CSV tables and the JSON summary.

Floats are written with ``repr`` so they round-trip exactly; NaN is
written as ``nan``.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

from .runner import DistRow, RunReport

EVENT_COLUMNS = ("seed", "k", "zeta", "g", "oracle", "abs_err")
SCAN_COLUMNS = ("seed", "k", "eta", "zeta")
CURVE_COLUMNS = ("k", "n_seeds", "median_abs_err", "mean_sq_err", "bayes_gap_sq",
                 "zeta_median", "bound_log2", "violation_rate", "ceiling")
DIST_COLUMNS = ("k", "n_stopped", "n_reference", "ks", "threshold", "ok")


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    if v is None:
        return ""
    return str(v)


def _write(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def event_rows(report: RunReport):
    for s in report.logs:
        for i in range(s.k.size):
            yield (s.seed, int(s.k[i]), int(s.zeta[i]), float(s.g[i]),
                   float(s.oracle[i]), float(abs(s.g[i] - s.oracle[i])))


def scan_rows(report: RunReport):
    for s in report.logs:
        for i in range(s.k.size):
            yield (s.seed, int(s.k[i]), int(s.eta[i]), int(s.zeta[i]))


def curve_rows(report: RunReport):
    c = report.curve
    bounds = {r.k: r for r in report.bound_rows}
    for i, k in enumerate(c.k):
        b = bounds.get(int(k))
        yield (int(k), int(c.n_seeds[i]), float(c.median_abs_err[i]), float(c.mean_sq_err[i]),
               float(c.bayes_gap_sq[i]), float(c.zeta_median[i]),
               None if b is None else float(b.bound_log2),
               None if b is None else float(b.rate),
               None if b is None else float(b.ceiling))


def summary(report: RunReport, command: str, dist_rows: Sequence[DistRow] = ()) -> dict[str, Any]:
    cfg = report.config
    return {
        "command": command,
        "config": cfg.to_dict(),
        "config_hash": cfg.digest(),
        "counters": report.counters(),
        "checks": {c.name: {"passed": c.passed, **c.detail} for c in report.checks},
        "passed": report.passed,
        "dist": [dict(zip(DIST_COLUMNS, (r.k, r.n_stopped, r.n_reference, r.ks, r.threshold, r.ok)))
                 for r in dist_rows],
        # excluded from the reproducibility contract
        "timing": {"wall_seconds": report.wall_seconds},
    }


def _json_safe(obj: Any) -> Any:
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def write_report(report: RunReport, out_dir: str | Path, command: str = "simulate",
                 dist_rows: Sequence[DistRow] = ()) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    formats = report.config.formats
    if "csv" in formats:
        _write(out / "events.csv", EVENT_COLUMNS, event_rows(report))
        _write(out / "scan.csv", SCAN_COLUMNS, scan_rows(report))
        _write(out / "curves.csv", CURVE_COLUMNS, curve_rows(report))
        if dist_rows:
            _write(out / "dist.csv", DIST_COLUMNS,
                   ((r.k, r.n_stopped, r.n_reference, r.ks, r.threshold, r.ok) for r in dist_rows))
    if "json" in formats:
        with open(out / "summary.json", "w") as f:
            json.dump(_json_safe(summary(report, command, dist_rows)), f, indent=2, sort_keys=True)
            f.write("\n")
    return out
