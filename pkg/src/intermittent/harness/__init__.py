from .config import ExperimentConfig, loglog_preset
from .report import write_report
from .runner import (
    Check,
    DistRow,
    RunReport,
    dist_check,
    ks_threshold,
    run,
    run_seed,
    run_seeds,
    spearman_fraction,
    verify_bound,
)

__all__ = [
    "Check",
    "DistRow",
    "ExperimentConfig",
    "RunReport",
    "dist_check",
    "loglog_preset",
    "ks_threshold",
    "run",
    "run_seed",
    "run_seeds",
    "spearman_fraction",
    "verify_bound",
    "write_report",
]
