"""Experiment configuration: one JSON document."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

from ..partitions import PartitionFamily, loglog_family, family_from_dict
from ..processes import ProcessModel, model_from_dict
from ..stopping import LagSchedule

KNOWN_CHECKS = ("mse_decrease", "median_halving", "spearman_negative")

_KEYS = {
    "preset", "model", "family", "schedule", "seeds", "horizon", "k_max", "k_min",
    "epsilon", "workers", "outputs", "checks", "dist_ks", "ks_threshold",
}


def loglog_preset(lo: float = 0.0, hi: float = 1.0) -> dict[str, Any]:
    """``l_k = min(k, max(1, floor(3 log2 k)))``, ``floor(2**f_k)`` cells with
    ``f_k = 1 + log2(1 + log2(1 + k))``, ``eps = 1``."""
    return {
        "family": loglog_family(lo, hi).to_dict(),
        "schedule": LagSchedule("log_floor", c=3.0).to_dict(),
        "epsilon": 1.0,
    }


def _seeds(spec: Any) -> tuple[int, ...]:
    if isinstance(spec, Mapping):
        base, count = int(spec.get("base", 0)), int(spec["count"])
        if count < 1:
            raise ValueError("seed count must be >= 1")
        return tuple(range(base, base + count))
    seeds = tuple(int(s) for s in spec)
    if not seeds:
        raise ValueError("seed list is empty")
    if len(set(seeds)) != len(seeds):
        raise ValueError("seed list has duplicates")
    return seeds


@dataclass(frozen=True)
class ExperimentConfig:
    model: ProcessModel
    family: PartitionFamily
    schedule: LagSchedule
    seeds: tuple[int, ...] = (0,)
    horizon: int = 1_000_000
    k_max: int = 100
    k_min: int = 1
    epsilon: float | None = None
    workers: int = 1
    out_dir: str | None = None
    formats: tuple[str, ...] = ("csv", "json")
    checks: tuple[str, ...] = ("mse_decrease",)
    dist_ks: tuple[int, ...] = ()
    ks_threshold: float | None = None
    preset: str | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if not 1 <= self.k_min <= self.k_max:
            raise ValueError("need 1 <= k_min <= k_max")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        unknown = set(self.checks) - set(KNOWN_CHECKS)
        if unknown:
            raise ValueError(f"unknown checks {sorted(unknown)}; known: {KNOWN_CHECKS}")
        bad = set(self.formats) - {"csv", "json"}
        if bad:
            raise ValueError(f"unknown output formats {sorted(bad)}")
        if any(k < 1 for k in self.dist_ks):
            raise ValueError("dist_ks entries must be >= 1")
        # schedule must be valid up to k_max (custom tables are finite)
        if self.schedule.horizon < self.k_max:
            raise ValueError(f"lag table covers {self.schedule.horizon} levels, k_max is {self.k_max}")
        if self.schedule(1) != 1:
            raise ValueError("l_1 must be 1")
        self.family.cell_count(self.k_max)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> ExperimentConfig:
        unknown = set(d) - _KEYS
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        merged = dict(d)
        preset = merged.get("preset")
        if preset is not None:
            if preset != "loglog":
                raise ValueError(f"unknown preset {preset!r}")
            for key, value in loglog_preset().items():
                merged.setdefault(key, value)
        for key in ("model", "family", "schedule"):
            if key not in merged:
                raise ValueError(f"config needs {key!r}")
        outputs = merged.get("outputs", {})
        return cls(
            model=model_from_dict(merged["model"]),
            family=family_from_dict(merged["family"]),
            schedule=LagSchedule.from_dict(merged["schedule"]),
            seeds=_seeds(merged.get("seeds", [0])),
            horizon=int(merged.get("horizon", 1_000_000)),
            k_max=int(merged.get("k_max", 100)),
            k_min=int(merged.get("k_min", 1)),
            epsilon=None if merged.get("epsilon") is None else float(merged["epsilon"]),
            workers=int(merged.get("workers", 1)),
            out_dir=outputs.get("dir"),
            formats=tuple(outputs.get("formats", ("csv", "json"))),
            checks=tuple(merged.get("checks", ("mse_decrease",))),
            dist_ks=tuple(int(k) for k in merged.get("dist_ks", ())),
            ks_threshold=None if merged.get("ks_threshold") is None else float(merged["ks_threshold"]),
            preset=preset,
        )

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def to_dict(self) -> dict[str, Any]:
        """Fully expanded echo; re-parses to an equal config."""
        d: dict[str, Any] = {
            "model": self.model.to_dict(),
            "family": self.family.to_dict(),
            "schedule": self.schedule.to_dict(),
            "seeds": list(self.seeds),
            "horizon": self.horizon,
            "k_max": self.k_max,
            "k_min": self.k_min,
            "epsilon": self.epsilon,
            "workers": self.workers,
            "outputs": {"dir": self.out_dir, "formats": list(self.formats)},
            "checks": list(self.checks),
            "dist_ks": list(self.dist_ks),
            "ks_threshold": self.ks_threshold,
        }
        return d

    def digest(self) -> str:
        """SHA-256 of the canonical echo, ignoring ``workers`` and outputs,
        which do not change any number."""
        d = self.to_dict()
        d.pop("workers")
        d.pop("outputs")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_overrides(self, **kw: Any) -> ExperimentConfig:
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self
