"""Intermittent estimation of the one-step conditional mean of a stationary
real-valued series along block-recurrence stopping times."""

from .estimator import IntermittentEstimator, NoPrediction, PredictionEvent, estimate
from .partitions import (
    Cell,
    CellCount,
    DomainError,
    DyadicFinite,
    DyadicInfinite,
    FiniteAlphabetExact,
    cell_count,
    cell_of,
    diam,
    loglog_family,
    quantize_block,
)
from .stopping import (
    HorizonError,
    LagSchedule,
    ScanEvent,
    ScannerState,
    Truncated,
    j_of_n,
    reverse_scan,
    scan,
    scan_next,
    stopping_times,
)

__version__ = "0.1.0"
