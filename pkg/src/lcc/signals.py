"""Signal containers and the six layer-interface transducers.

Periodic sampler, linear periodic interpolator, (epsilon, delta)-T inverse
sampler, quantizer over a polytopic partition, inverse quantizer, eventifier
and l-bounded inverse eventifier.  All continuous-time signals live on a
uniform dense grid (dt divides the sampling period), and every sup-norm is a
grid maximum in the infinity norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Polytope

__all__ = [
    "SignalError",
    "AlignmentError",
    "CoverageError",
    "DenseTrace",
    "DiscreteSignal",
    "SymbolWord",
    "Partition",
    "SamplerParams",
    "sample",
    "interpolate_linear",
    "inverse_sampler_contains",
    "quantize",
    "inverse_quantize_contains",
    "eventify",
    "inverse_eventify_contains",
]

# Containment slack for quantizer cell membership; boundary ties are then
# broken by lowest cell index.
_MEMBERSHIP_TOL = 1e-9


class SignalError(ValueError):
    """Domain error on signal data."""


class AlignmentError(SignalError):
    """A period is not aligned with the dense grid."""


class CoverageError(SignalError):
    """A point falls outside every partition cell."""


def _as_matrix(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise SignalError(f"signal values must be a sequence of vectors, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise SignalError("signal contains non-finite values")
    return arr


@dataclass(frozen=True)
class DenseTrace:
    """Uniformly gridded continuous-time signal: values[i] ~ x(t0 + i*dt)."""

    values: np.ndarray
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "values", _as_matrix(self.values))
        if not self.dt > 0:
            raise SignalError(f"dt must be positive, got {self.dt}")

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))


@dataclass(frozen=True)
class DiscreteSignal:
    """Discrete-time signal: a nonempty sequence of real vectors."""

    values: np.ndarray

    def __post_init__(self):
        arr = _as_matrix(self.values)
        if arr.shape[0] == 0:
            raise SignalError("discrete signal must be nonempty")
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SymbolWord:
    """Finite word over a finite alphabet."""

    symbols: tuple
    alphabet: frozenset

    def __init__(self, symbols, alphabet=None):
        symbols = tuple(symbols)
        if alphabet is None:
            alphabet = frozenset(symbols)
        alphabet = frozenset(alphabet)
        for s in symbols:
            if s not in alphabet:
                raise SignalError(f"symbol {s!r} not in declared alphabet")
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "alphabet", alphabet)

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def __getitem__(self, k):
        return self.symbols[k]


@dataclass(frozen=True)
class Partition:
    """Polytopic partition of a region: (symbol, cell) pairs plus representatives.

    Cells must be pairwise interior-disjoint and each representative must lie
    in its own cell.  Query points on shared boundaries resolve to the lowest
    cell index.
    """

    cells: tuple  # of (symbol, Polytope)
    representatives: np.ndarray

    def __init__(self, cells, representatives):
        cells = tuple((sym, poly) for sym, poly in cells)
        reps = np.atleast_2d(np.asarray(representatives, dtype=float))
        if len(cells) == 0:
            raise SignalError("partition needs at least one cell")
        if reps.shape[0] != len(cells):
            raise SignalError("one representative per cell required")
        symbols = [sym for sym, _ in cells]
        if len(set(symbols)) != len(symbols):
            raise SignalError("cell symbols must be distinct")
        for i, (sym, poly) in enumerate(cells):
            if not poly.contains(reps[i], tol=_MEMBERSHIP_TOL):
                raise SignalError(f"representative of cell {sym!r} lies outside the cell")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "representatives", reps)

    @property
    def alphabet(self) -> frozenset:
        return frozenset(sym for sym, _ in self.cells)

    def symbol_index(self, symbol) -> int:
        for i, (sym, _) in enumerate(self.cells):
            if sym == symbol:
                return i
        raise SignalError(f"unknown cell symbol {symbol!r}")

    def representative(self, symbol) -> np.ndarray:
        return self.representatives[self.symbol_index(symbol)]

    def cell(self, symbol) -> Polytope:
        return self.cells[self.symbol_index(symbol)][1]

    def locate(self, point) -> object:
        """Symbol of the unique cell containing ``point`` (ties: lowest index)."""
        point = np.asarray(point, dtype=float)
        for sym, poly in self.cells:
            if poly.contains(point, tol=_MEMBERSHIP_TOL):
                return sym
        raise CoverageError(f"point {point.tolist()} outside every cell")


@dataclass(frozen=True)
class SamplerParams:
    """Parameters of the (epsilon, delta)-T inverse sampler."""

    T: float
    epsilon: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if not self.T > 0:
            raise SignalError(f"period T must be positive, got {self.T}")
        if self.epsilon < 0 or self.delta < 0:
            raise SignalError("epsilon and delta must be nonnegative")


def _aligned_stride(period: float, dt: float) -> int:
    stride = int(round(period / dt))
    if stride < 1 or abs(stride * dt - period) > 1e-9 * max(1.0, period):
        raise AlignmentError(f"period {period} is not an integer multiple of dt {dt}")
    return stride


def sample(x: DenseTrace, T: float) -> DiscreteSignal:
    """Periodic sampler: output(k) = x(kT) for every kT inside the trace."""
    stride = _aligned_stride(T, x.dt)
    if len(x) == 0:
        raise SignalError("cannot sample an empty trace")
    return DiscreteSignal(x.values[::stride].copy())


def interpolate_linear(x_d: DiscreteSignal, T: float, dt: float) -> DenseTrace:
    """Linear periodic interpolator on the dense grid.

    Covers [0, (K-1)T] inclusive for K >= 2 samples; a singleton signal
    yields the constant trace on [0, T).
    """
    stride = _aligned_stride(T, dt)
    vals = x_d.values
    k = len(x_d)
    if k == 1:
        return DenseTrace(np.repeat(vals, stride, axis=0), dt)
    out = np.empty(((k - 1) * stride + 1, vals.shape[1]))
    for seg in range(k - 1):
        frac = np.arange(stride)[:, None] / stride
        out[seg * stride:(seg + 1) * stride] = vals[seg] + frac * (vals[seg + 1] - vals[seg])
    out[-1] = vals[-1]
    return DenseTrace(out, dt)


def inverse_sampler_contains(x: DenseTrace, x_d: DiscreteSignal, p: SamplerParams) -> bool:
    """Membership test for the (epsilon, delta)-T inverse sampler.

    True iff x stays within delta (sup over the dense grid, infinity norm) of
    the linear interpolant of x_d and within epsilon of x_d at sample times.
    """
    if x.dim != x_d.dim:
        raise SignalError(f"dimension mismatch: trace {x.dim} vs signal {x_d.dim}")
    interp = interpolate_linear(x_d, p.T, x.dt)
    if len(x) < len(interp):
        raise SignalError("trace does not span the interpolation horizon")
    dev = np.abs(x.values[: len(interp)] - interp.values).max()
    if dev > p.delta:
        return False
    stride = _aligned_stride(p.T, x.dt)
    at_samples = x.values[::stride][: len(x_d)]
    return bool(np.abs(at_samples - x_d.values[: len(at_samples)]).max() <= p.epsilon)


def quantize(x_d: DiscreteSignal, partition: Partition) -> SymbolWord:
    """Quantizer: per-sample cell symbol, boundary ties to the lowest cell index."""
    symbols = []
    for k in range(len(x_d)):
        try:
            symbols.append(partition.locate(x_d.values[k]))
        except CoverageError as exc:
            raise CoverageError(f"sample {k}: {exc}") from exc
    return SymbolWord(symbols, partition.alphabet)


def inverse_quantize_contains(x_d: DiscreteSignal, x_q: SymbolWord, partition: Partition) -> bool:
    """True iff x_d(k) lies in the cell of x_q(k) for all k."""
    if len(x_d) != len(x_q):
        raise SignalError(f"length mismatch: {len(x_d)} samples vs {len(x_q)} symbols")
    for k in range(len(x_d)):
        if not partition.cell(x_q[k]).contains(x_d.values[k], tol=_MEMBERSHIP_TOL):
            return False
    return True


def eventify(x_q: SymbolWord) -> SymbolWord:
    """Compress a word to its sequence of symbol changes (first symbol kept)."""
    if len(x_q) == 0:
        raise SignalError("cannot eventify an empty word")
    out = [x_q[0]]
    for s in x_q.symbols[1:]:
        if s != out[-1]:
            out.append(s)
    return SymbolWord(out, x_q.alphabet)


def inverse_eventify_contains(x_q: SymbolWord, x_e: SymbolWord, l: int) -> bool:
    """Membership test for the l-bounded inverse eventifier.

    True iff eventify(x_q) equals x_e and every position with at least l
    successors sees a symbol change within l steps.  Positions closer than l
    to the end of the finite word are exempt.
    """
    if len(x_q) == 0 or len(x_e) == 0:
        raise SignalError("words must be nonempty")
    if l < 1:
        raise SignalError(f"bound l must be a positive integer, got {l}")
    if eventify(x_q).symbols != tuple(x_e.symbols):
        return False
    n = len(x_q)
    for k in range(n):
        if k + l > n - 1:
            break
        if all(x_q[k + r] == x_q[k] for r in range(1, l + 1)):
            return False
    return True
