"""Stationary sources with exact one-step conditional expectations.

Every model hands out a *sampler* for a seed: a callable ``more(n)``
returning the next ``n`` samples.  Random draws are taken in fixed blocks
from ``numpy.random.Generator(PCG64(seed))``, so the path for a seed does
not depend on how callers chunk their requests.

The odometer is kept as a ``B``-bit integer ``V = sum r_i 2**(B-i)``.
Reading the bits in reverse (``r_1`` least significant) turns ``S`` into
"subtract one", which makes whole paths cheap to generate.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Any, Mapping, Sequence

import numpy as np

from .partitions import DomainError

_FIRST_BLOCK = 64
_BLOCK = 4096


class DegenerateState(ValueError):
    """The all-zero odometer state, where ``tau`` is undefined."""


class ProcessModel:
    """Base class: ``sampler``, ``cond_exp`` and config round-tripping."""

    kind: str = ""
    #: trailing samples ``cond_exp`` needs (``None``: the whole prefix)
    memory: int | None = None
    has_oracle: bool = True

    def sampler(self, seed: int):
        raise NotImplementedError

    def cond_exp(self, prefix: Sequence[float]) -> float:
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ProcessModel) and self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash(repr(self.to_dict()))

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.to_dict()!r})"


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


class _BlockSampler:
    """Serve samples from generated blocks of sizes 64, 128, ..., 4096, 4096, ...

    The block sizes never depend on the request sizes, so the path is the
    same however it is consumed.  Short paths stay cheap.
    """

    def __init__(self, make_block):
        self._make_block = make_block
        self._buf = np.empty(0)
        self._pos = 0
        self._next = _FIRST_BLOCK
        self.produced = 0

    def __call__(self, n: int) -> np.ndarray:
        parts = []
        while n > 0:
            if self._pos == self._buf.size:
                self._buf = self._make_block(self._next)
                self._pos = 0
                self._next = min(2 * self._next, _BLOCK)
            take = min(n, self._buf.size - self._pos)
            parts.append(self._buf[self._pos : self._pos + take])
            self._pos += take
            n -= take
        out = np.concatenate(parts) if parts else np.empty(0)
        self.produced += out.size
        return out


# ---------------------------------------------------------------------------
# i.i.d.


@dataclass(frozen=True, eq=False)
class IIDProcess(ProcessModel):
    """Independent draws: ``bernoulli(p)``, ``uniform(lo, hi)`` or
    ``gaussian(mean, var)``."""

    dist: str = "bernoulli"
    p: float = 0.5
    lo: float = 0.0
    hi: float = 1.0
    mu: float = 0.0
    var: float = 1.0

    kind = "iid"
    memory = 0

    def __post_init__(self) -> None:
        if self.dist == "bernoulli":
            if not 0.0 <= self.p <= 1.0:
                raise ValueError(f"bernoulli p must lie in [0, 1], got {self.p}")
        elif self.dist == "uniform":
            if not self.lo < self.hi:
                raise ValueError("uniform needs lo < hi")
        elif self.dist == "gaussian":
            if not self.var > 0:
                raise ValueError("gaussian needs var > 0")
        else:
            raise ValueError(f"unknown iid distribution {self.dist!r}")

    def sampler(self, seed: int) -> _BlockSampler:
        rng = _rng(seed)
        if self.dist == "bernoulli":
            return _BlockSampler(lambda n: (rng.random(n) < self.p).astype(np.float64))
        if self.dist == "uniform":
            return _BlockSampler(lambda n: self.lo + (self.hi - self.lo) * rng.random(n))
        sd = math.sqrt(self.var)
        return _BlockSampler(lambda n: self.mu + sd * rng.standard_normal(n))

    def mean(self) -> float:
        if self.dist == "bernoulli":
            return self.p
        if self.dist == "uniform":
            return 0.5 * (self.lo + self.hi)
        return self.mu

    def cond_exp(self, prefix: Sequence[float]) -> float:
        if len(prefix) == 0:
            raise ValueError("prefix must be nonempty")
        return self.mean()

    def to_dict(self) -> dict[str, Any]:
        if self.dist == "bernoulli":
            return {"kind": "iid", "dist": "bernoulli", "p": self.p}
        if self.dist == "uniform":
            return {"kind": "iid", "dist": "uniform", "lo": self.lo, "hi": self.hi}
        return {"kind": "iid", "dist": "gaussian", "mean": self.mu, "var": self.var}


# ---------------------------------------------------------------------------
# Finite-order Markov chains


def stationary_law(matrix: np.ndarray, tol: float = 1e-12, max_iter: int = 1_000_000) -> np.ndarray:
    """Stationary row vector of a stochastic matrix by power iteration.

    Iterates the lazy chain ``(I + M) / 2``, which has the same stationary
    laws but is aperiodic, starting from the uniform vector.
    """
    n = matrix.shape[0]
    lazy = 0.5 * (np.eye(n) + matrix)
    pi = np.full(n, 1.0 / n)
    prev_step = math.inf
    for _ in range(max_iter):
        nxt = pi @ lazy
        step = np.abs(nxt - pi).sum()
        # geometric convergence: the remaining error is about step * q / (1 - q)
        q = min(step / prev_step, 0.999999) if prev_step > 0 else 0.0
        if step == 0 or step * q / (1 - q) < tol and step < tol:
            return nxt / nxt.sum()
        pi, prev_step = nxt, step
    raise RuntimeError("power iteration did not converge")


class MarkovProcess(ProcessModel):
    """Order-``d`` chain on a finite real alphabet.

    ``transition[c][b]`` is ``P(X_{n+1} = alphabet[b] | context c)`` where
    contexts enumerate ``alphabet**d`` lexicographically, oldest symbol
    first.  Paths start from the stationary law of the context chain unless
    ``start`` (a context, oldest first) is given.
    """

    kind = "markov"

    def __init__(
        self,
        alphabet: Sequence[float],
        transition: Sequence[Sequence[float]],
        order: int = 1,
        start: Sequence[float] | None = None,
    ):
        if order < 1:
            raise ValueError("order must be >= 1")
        self.alphabet = tuple(float(a) for a in alphabet)
        if len(set(self.alphabet)) != len(self.alphabet) or not self.alphabet:
            raise ValueError("alphabet must be nonempty with distinct symbols")
        self.order = order
        self.memory = order
        a = len(self.alphabet)
        self.transition = np.asarray(transition, dtype=np.float64)
        if self.transition.shape != (a**order, a):
            raise ValueError(f"transition must have shape {(a**order, a)}, got {self.transition.shape}")
        if np.any(self.transition < 0) or np.any(np.abs(self.transition.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("transition rows must be probability vectors (sum to 1 within 1e-12)")
        self._index = {s: i for i, s in enumerate(self.alphabet)}
        self.start = None if start is None else tuple(float(s) for s in start)
        if self.start is not None:
            if len(self.start) != order:
                raise ValueError(f"start context needs {order} symbols")
            self._context_index(self.start)
        self.context_law = stationary_law(self._context_matrix())
        self._cum = np.cumsum(self.transition, axis=1).tolist()
        self._law_cum = np.cumsum(self.context_law).tolist()
        self._values = self.transition @ np.asarray(self.alphabet)

    def _context_matrix(self) -> np.ndarray:
        a, n = len(self.alphabet), len(self.alphabet) ** self.order
        m = np.zeros((n, n))
        for c in range(n):
            for b in range(a):
                m[c, (c * a + b) % n] += self.transition[c, b]
        return m

    def _context_index(self, symbols: Sequence[float]) -> int:
        c = 0
        for s in symbols:
            try:
                c = c * len(self.alphabet) + self._index[float(s)]
            except KeyError:
                raise DomainError(f"{s!r} is not in the alphabet {self.alphabet}") from None
        return c

    def contexts(self):
        return list(product(self.alphabet, repeat=self.order))

    def marginal(self) -> np.ndarray:
        """Stationary one-dimensional law over the alphabet."""
        a = len(self.alphabet)
        return self.context_law.reshape(-1, a).sum(axis=0)

    def mean(self) -> float:
        return float(self.marginal() @ np.asarray(self.alphabet))

    def sampler(self, seed: int) -> _BlockSampler:
        rng = _rng(seed)
        a, n = len(self.alphabet), len(self.alphabet) ** self.order
        symbols = self.alphabet
        cum = self._cum
        state: dict[str, Any] = {"ctx": None}

        def make_block(size: int) -> np.ndarray:
            u = rng.random(size).tolist()
            out = []
            i = 0
            if state["ctx"] is None:
                if self.start is not None:
                    ctx = self._context_index(self.start)
                else:
                    ctx = min(bisect.bisect_right(self._law_cum, u[0]), n - 1)
                    i = 1
                digits = []
                c = ctx
                for _ in range(self.order):
                    digits.append(c % a)
                    c //= a
                out.extend(symbols[d] for d in reversed(digits))
                state["ctx"] = ctx
            ctx = state["ctx"]
            for ui in u[i:]:
                b = min(bisect.bisect_right(cum[ctx], ui), a - 1)
                out.append(symbols[b])
                ctx = (ctx * a + b) % n
            state["ctx"] = ctx
            return np.asarray(out, dtype=np.float64)

        return _BlockSampler(make_block)

    def cond_exp(self, prefix: Sequence[float]) -> float:
        if len(prefix) < self.order:
            raise ValueError(f"prefix needs at least {self.order} samples")
        ctx = self._context_index(prefix[len(prefix) - self.order :])
        return float(self._values[ctx])

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "kind": "markov",
            "order": self.order,
            "alphabet": list(self.alphabet),
            "transition": self.transition.tolist(),
        }
        if self.start is not None:
            d["start"] = list(self.start)
        return d


# ---------------------------------------------------------------------------
# Odometer


@dataclass(frozen=True)
class OdometerState:
    """``B``-bit binary expansion ``r = sum r_i 2**-i`` stored as the
    integer ``value = r * 2**B``."""

    value: int
    bits: int = 48

    def __post_init__(self) -> None:
        if not 0 <= self.value < (1 << self.bits):
            raise ValueError(f"value must lie in [0, 2**{self.bits})")

    @classmethod
    def from_float(cls, r: float, bits: int = 48) -> OdometerState:
        """Exact for ``r`` on the ``B``-bit grid, otherwise truncated."""
        if not 0.0 <= r < 1.0:
            raise DomainError(f"odometer states live in [0, 1), got {r!r}")
        return cls(math.floor(Fraction(r) * (1 << bits)), bits)

    @classmethod
    def from_digits(cls, digits: Sequence[int]) -> OdometerState:
        value = 0
        for d in digits:
            if d not in (0, 1):
                raise ValueError("binary digits must be 0 or 1")
            value = 2 * value + d
        return cls(value, len(digits))

    @property
    def digits(self) -> tuple[int, ...]:
        """``(r_1, ..., r_B)``."""
        return tuple((self.value >> (self.bits - i)) & 1 for i in range(1, self.bits + 1))

    @property
    def r(self) -> float:
        return math.ldexp(self.value, -self.bits)

    def as_fraction(self) -> Fraction:
        return Fraction(self.value, 1 << self.bits)


def tau(state: OdometerState) -> int:
    """Index of the first binary digit equal to 1."""
    if state.value == 0:
        raise DegenerateState("tau is undefined on the all-zero state")
    return state.bits - state.value.bit_length() + 1


def odometer_step(state: OdometerState) -> OdometerState:
    """Digits ``1..tau-1`` become 1, digit ``tau`` becomes 0, the rest stay.

    The all-zero state is returned unchanged.
    """
    if state.value == 0:
        return state
    t = tau(state)
    b = state.bits
    ones = ((1 << (t - 1)) - 1) << (b - t + 1)  # digits 1..t-1
    return OdometerState((state.value & ~(1 << (b - t))) | ones, b)


def odometer_closed_form(r: Fraction) -> Fraction:
    """``S r = r - 2**-tau + sum_{l < tau} 2**-l`` on exact dyadic rationals."""
    if r == 0:
        return r
    t = 1
    while r < Fraction(1, 2**t):
        t += 1
    return r - Fraction(1, 2**t) + (1 - Fraction(1, 2 ** (t - 1)))


def odometer_recursive(r: Fraction) -> Fraction:
    """``S r = r - 1/2`` on ``[1/2, 1)``, else ``(1 + S(2r)) / 2``."""
    if r == 0:
        return r
    if r >= Fraction(1, 2):
        return r - Fraction(1, 2)
    return (1 + odometer_recursive(2 * r)) / 2


_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_M8 = np.uint64(0x00FF00FF00FF00FF)
_M16 = np.uint64(0x0000FFFF0000FFFF)


def reverse_bits(v: np.ndarray, bits: int) -> np.ndarray:
    """Reverse the low ``bits`` bits of each uint64 entry."""
    v = np.asarray(v, dtype=np.uint64)
    v = ((v >> np.uint64(1)) & _M1) | ((v & _M1) << np.uint64(1))
    v = ((v >> np.uint64(2)) & _M2) | ((v & _M2) << np.uint64(2))
    v = ((v >> np.uint64(4)) & _M4) | ((v & _M4) << np.uint64(4))
    v = ((v >> np.uint64(8)) & _M8) | ((v & _M8) << np.uint64(8))
    v = ((v >> np.uint64(16)) & _M16) | ((v & _M16) << np.uint64(16))
    v = (v >> np.uint64(32)) | (v << np.uint64(32))
    return v >> np.uint64(64 - bits)


class _OdometerSampler:
    """Iterates ``S`` from an initial state.

    With ``N`` the bit-reversed state, ``S`` is ``N -> N - 1`` until ``N``
    reaches 0, which is then fixed; steps taken from 0 are counted in
    ``degenerate_steps``.
    """

    def __init__(self, start: int, bits: int):
        self.bits = bits
        self._n0 = int(reverse_bits(np.array([start], dtype=np.uint64), bits)[0])
        self.produced = 0
        self.degenerate_steps = 0

    def __call__(self, n: int) -> np.ndarray:
        t = np.arange(self.produced, self.produced + n, dtype=np.int64)
        rev = np.maximum(np.int64(self._n0) - t, 0)
        stuck = int(np.count_nonzero(t > self._n0))
        self.degenerate_steps += stuck
        values = reverse_bits(rev.astype(np.uint64), self.bits).astype(np.float64)
        self.produced += n
        return np.ldexp(values, -self.bits)


class OdometerProcess(ProcessModel):
    """``X_0 = r`` uniform on the ``B``-bit grid, ``X_{n+1} = S X_n``."""

    kind = "odometer"
    memory = 1

    def __init__(self, bits: int = 48, start: float | None = None):
        if not 1 <= bits <= 53:
            raise ValueError("bits must lie in [1, 53] so states are exact floats")
        self.bits = bits
        self.start = start
        if start is not None:
            OdometerState.from_float(start, bits)

    def initial_state(self, seed: int) -> OdometerState:
        if self.start is not None:
            return OdometerState.from_float(self.start, self.bits)
        return OdometerState(int(_rng(seed).integers(0, 1 << self.bits, dtype=np.uint64)), self.bits)

    def sampler(self, seed: int) -> _OdometerSampler:
        return _OdometerSampler(self.initial_state(seed).value, self.bits)

    def _state(self, x: float) -> OdometerState:
        scaled = math.ldexp(x, self.bits)
        if not (0.0 <= x < 1.0) or scaled != math.floor(scaled):
            raise DomainError(f"{x!r} is not on the {self.bits}-bit odometer grid")
        return OdometerState(int(scaled), self.bits)

    def step(self, x: float) -> float:
        return odometer_step(self._state(x)).r

    def mean(self) -> float:
        return 0.5 - math.ldexp(1.0, -self.bits - 1)

    def cond_exp(self, prefix: Sequence[float]) -> float:
        if len(prefix) == 0:
            raise ValueError("prefix must be nonempty")
        return self.step(float(prefix[-1]))

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"kind": "odometer", "bits": self.bits}
        if self.start is not None:
            d["start"] = self.start
        return d


# ---------------------------------------------------------------------------


def sample_path(model: ProcessModel, seed: int, n: int) -> np.ndarray:
    """``x_0..x_{n-1}`` for ``seed``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return model.sampler(seed)(n)


def cond_exp(model: ProcessModel, prefix: Sequence[float]) -> float:
    return model.cond_exp(prefix)


def model_from_dict(d: Mapping[str, Any]) -> ProcessModel:
    d = dict(d)
    kind = d.pop("kind", None)
    if kind == "iid":
        dist = d.pop("dist", "bernoulli")
        if "mean" in d:
            d["mu"] = d.pop("mean")
        return IIDProcess(dist=dist, **d)
    if kind == "markov":
        return MarkovProcess(
            d.pop("alphabet"), d.pop("transition"), d.pop("order", 1), d.pop("start", None),
            **_no_extra("markov", d),
        )
    if kind == "odometer":
        return OdometerProcess(d.pop("bits", 48), d.pop("start", None), **_no_extra("odometer", d))
    raise ValueError(f"unknown process kind {kind!r}")


def _no_extra(kind: str, d: Mapping[str, Any]) -> dict:
    if d:
        raise ValueError(f"unexpected keys for {kind}: {sorted(d)}")
    return {}
