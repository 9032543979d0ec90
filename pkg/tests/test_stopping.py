from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intermittent.partitions import CellCount, DyadicFinite, FiniteAlphabetExact, loglog_family
from intermittent.stopping import (
    HorizonError,
    LagSchedule,
    SampleBuffer,
    ScannerState,
    Truncated,
    capped,
    j_of_n,
    reverse_scan,
    scan,
    scan_next,
    stopping_times,
    supplier,
)

WORKED = [0, 1, 0, 0, 1, 0, 1, 1]
BINARY = FiniteAlphabetExact([0, 1])
WORKED_LAGS = LagSchedule("custom", table=(1, 2, 2))


def brute_forward(x, family, schedule, k_max):
    """Literal transcription of the recursion, one cell at a time."""
    out, z = [], 0
    for k in range(1, k_max + 1):
        l = schedule(k)
        pattern = [family.cell_of(v, k) for v in x[z - l + 1 : z + 1]]
        t = 1
        while True:
            if z + t >= len(x):
                return out
            if [family.cell_of(v, k) for v in x[z - l + 1 + t : z + t + 1]] == pattern:
                break
            t += 1
        z += t
        out.append((t, z))
    return out


def brute_backward(y, family, schedule, k):
    """Reverse recursion on ``y`` where ``y[-1]`` is position 0."""
    m = len(y) - 1
    out, e = [], m
    for i in range(1, k + 1):
        level = k - i + 1
        l = schedule(level)
        pattern = [family.cell_of(v, level) for v in y[e - l + 1 : e + 1]]
        t = 1
        while [family.cell_of(v, level) for v in y[e - t - l + 1 : e - t + 1]] != pattern:
            t += 1
            assert e - t - l + 1 >= 0
        e -= t
        out.append((t, e - m))
    return out


# ---------------------------------------------------------------------------
# schedules


def test_j_of_n_examples():
    assert j_of_n(LagSchedule("linear"), 0) == 1
    assert j_of_n(LagSchedule("linear"), 3) == 3
    assert j_of_n(LagSchedule("log_floor", c=3), 0) == 1


@pytest.mark.parametrize("sched", [LagSchedule("linear"), LagSchedule("log_floor", c=3),
                                   LagSchedule("log_floor", c=2)])
def test_j_of_n_matches_linear_search(sched):
    for n in range(0, 25):
        j = 1
        while sched(j + 1) <= n:
            j += 1
        assert j_of_n(sched, n) == j


def test_j_of_n_exhausted_table():
    with pytest.raises(HorizonError):
        j_of_n(LagSchedule("custom", table=(1, 1, 1)), 5)


def test_schedule_invariants():
    for sched in (LagSchedule("linear"), LagSchedule("log_floor", c=3), LagSchedule("log_floor", c=1)):
        vals = [sched(k) for k in range(1, 5000)]
        assert all(1 <= v <= k for k, v in enumerate(vals, start=1))
        assert all(a <= b for a, b in zip(vals, vals[1:]))
        assert sched.unbounded
    assert LagSchedule("log_floor", c=3)(4) == 4  # floor(3 log2 4) = 6 > 4 is clamped
    assert LagSchedule("log_floor", c=3)(20) == 12


@pytest.mark.parametrize("table", [(0,), (1, 3), (1, 2, 1), ()])
def test_bad_tables_rejected(table):
    with pytest.raises(ValueError):
        LagSchedule("custom", table=table)


def test_schedule_dict_round_trip():
    for s in (LagSchedule("linear"), LagSchedule("log_floor", c=2.5), WORKED_LAGS):
        assert LagSchedule.from_dict(s.to_dict()) == s


# ---------------------------------------------------------------------------
# forward scan


def test_worked_trace():
    state = ScannerState()
    more = supplier(WORKED)
    e1 = scan_next(state, BINARY, WORKED_LAGS, more)
    assert (e1.k, e1.eta, e1.zeta) == (1, 2, 2)
    e2 = scan_next(state, BINARY, WORKED_LAGS, more)
    assert (e2.k, e2.eta, e2.zeta) == (2, 3, 5)
    assert brute_forward(WORKED, BINARY, WORKED_LAGS, 2) == [(2, 2), (3, 5)]


def test_constant_path():
    evs = list(scan(np.zeros(60), BINARY, LagSchedule("linear"), 30))
    assert [e.eta for e in evs] == [1] * 30
    assert [e.zeta for e in evs] == list(range(1, 31))


def test_truncation_is_retryable():
    state = ScannerState()
    src = iter(WORKED)
    more = lambda n: [v for _, v in zip(range(n), src)]
    lagged = capped(more, 4)
    scan_next(state, BINARY, WORKED_LAGS, lagged)
    with pytest.raises(Truncated) as info:
        scan_next(state, BINARY, WORKED_LAGS, lagged)
    assert info.value.k == 2 and info.value.consumed == 4
    assert (state.k, state.zeta_prev) == (2, 2)
    ev = scan_next(state, BINARY, WORKED_LAGS, more)
    assert (ev.eta, ev.zeta) == (3, 5)


def test_truncation_on_short_path():
    assert stopping_times([0, 1], BINARY, LagSchedule("linear")) == []
    with pytest.raises(Truncated):
        scan_next(ScannerState(), BINARY, LagSchedule("linear"))


def test_horizon_error_from_custom_table():
    with pytest.raises(HorizonError):
        list(scan(np.zeros(20), BINARY, LagSchedule("custom", table=(1, 2)), 3))


def _paths(seed: int, n: int):
    rng = np.random.default_rng(seed)
    yield "binary", rng.integers(0, 2, n).astype(float), BINARY
    yield "ternary", rng.integers(0, 3, n).astype(float), FiniteAlphabetExact([0, 1, 2])
    yield "uniform", rng.uniform(0, 1, n), loglog_family()
    yield "shifted", rng.uniform(-1, 2, n), DyadicFinite(0, 1, CellCount("fixed", count=3))


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("sched", [LagSchedule("linear"), LagSchedule("log_floor", c=3),
                                   LagSchedule("log_floor", c=1)], ids=["linear", "log3", "log1"])
def test_vectorized_scan_matches_brute_force(seed, sched):
    for _, x, fam in _paths(seed, 800):
        fast = [(e.eta, e.zeta) for e in scan(x, fam, sched, 40)]
        assert fast == brute_forward(list(x), fam, sched, 40)


def test_long_search_crosses_chunks():
    # the first recurrence of a length-3 block appears only after several chunks
    x = np.concatenate([[2.0, 2.0, 2.0], np.tile([0.0, 1.0], 500), [2.0, 2.0, 2.0, 2.0]])
    fam = FiniteAlphabetExact([0, 1, 2])
    sched = LagSchedule("custom", table=(1, 1, 1, 1))
    st_ = ScannerState()
    more = supplier(x)
    assert scan_next(st_, fam, sched, more).zeta == 1
    assert scan_next(st_, fam, sched, more).zeta == 2
    ev = scan_next(st_, fam, sched, more)
    assert ev.zeta == 1003
    assert brute_forward(list(x), fam, sched, 3)[-1] == (1001, 1003)


def test_determinism_and_monotone_growth():
    x = np.random.default_rng(3).uniform(0, 1, 20_000)
    a = stopping_times(x, loglog_family(), LagSchedule("log_floor", c=3), 60)
    b = stopping_times(x, loglog_family(), LagSchedule("log_floor", c=3), 60)
    assert a == b
    assert all(z >= k for k, z in enumerate(a, start=1))
    assert all(q > p for p, q in zip(a, a[1:]))


def test_sample_buffer_discard():
    buf = SampleBuffer(range(10))
    buf.discard_before(6)
    assert len(buf) == 10 and buf[7] == 7.0
    assert list(buf.view(6, 10)) == [6.0, 7.0, 8.0, 9.0]
    with pytest.raises(IndexError):
        buf[3]


# ---------------------------------------------------------------------------
# reverse scan


def test_reverse_scan_examples():
    assert reverse_scan(np.zeros(10), BINARY, LagSchedule("linear"), 5) == [(1, -i) for i in range(1, 6)]
    assert reverse_scan(WORKED[:6], BINARY, WORKED_LAGS, 2)[-1][1] == -5
    assert reverse_scan(WORKED[:6], BINARY, WORKED_LAGS, 2) == brute_backward(WORKED[:6], BINARY, WORKED_LAGS, 2)
    assert reverse_scan([0.0], BINARY, WORKED_LAGS, 0) == []


def test_reverse_scan_truncation():
    with pytest.raises(Truncated) as info:
        reverse_scan([1.0, 0.0], BINARY, LagSchedule("linear"), 1)
    assert info.value.reached == 1


@pytest.mark.parametrize("seed", range(4))
def test_reverse_scan_matches_brute_force(seed):
    sched = LagSchedule("log_floor", c=1)
    for _, x, fam in _paths(seed, 3000):
        ys = stopping_times(x, fam, sched, 25)
        k = len(ys)
        y = x[: ys[-1] + 1]
        assert reverse_scan(y, fam, sched, k) == brute_backward(list(y), fam, sched, k)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=2, max_size=300), st.sampled_from(["linear", "log"]))
def test_duality_on_arbitrary_binary_paths(bits, rule):
    sched = LagSchedule("linear") if rule == "linear" else LagSchedule("log_floor", c=3)
    x = np.array(bits, dtype=float)
    for k, z in enumerate(stopping_times(x, BINARY, sched), start=1):
        assert reverse_scan(x[: z + 1], BINARY, sched, k)[-1][1] == -z
