"""N-particle product systems on d^N states.

Identical non-interacting particles move under the Kronecker sum

    Q_N = sum_i  I x ... x Q1 x ... x I     (Q1 in slot i),

so exp(t Q_N) is the N-fold Kronecker product of exp(t Q1).  Flat indices
are row-major with coordinate 1 slowest: flattening (x1, ..., xN) gives
x1 d^{N-1} + ... + xN, which makes the first-coordinate marginal a
contiguous block sum.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from math import comb, factorial

import numpy as np

from .errors import DimensionMismatch, StateSpaceTooLarge
from .generator import Generator, Potential, as_potential, validate_generator
from .spectral import ProbMeasure, as_measure

DEFAULT_STATE_CAP = 20000
MAX_ENUMERATED_PARTICLES = 6


@dataclass(frozen=True)
class TensorSystem:
    """Product system bookkeeping: single-particle Q1 and its Kronecker sum."""

    d: int
    N: int
    Q1: Generator
    QN: Generator

    @property
    def size(self) -> int:
        return self.d ** self.N

    def flat_index(self, x) -> int:
        """Flat index of a multi-index (x1, ..., xN)."""
        if len(x) != self.N:
            raise DimensionMismatch(f"multi-index must have {self.N} coordinates")
        flat = 0
        for c in x:
            if not 0 <= c < self.d:
                raise DimensionMismatch(f"coordinate {c} outside 0..{self.d - 1}")
            flat = flat * self.d + int(c)
        return flat

    def multi_index(self, flat: int) -> tuple[int, ...]:
        if not 0 <= flat < self.size:
            raise DimensionMismatch(f"flat index {flat} outside 0..{self.size - 1}")
        out = []
        for _ in range(self.N):
            out.append(flat % self.d)
            flat //= self.d
        return tuple(reversed(out))

    @cached_property
    def permutation_arrays(self) -> list[np.ndarray]:
        """Index arrays realizing all N! coordinate permutations.

        Entry sigma maps flat(x) to flat(x composed with sigma); summing a
        vector over these arrays symmetrizes it.
        """
        if self.N > MAX_ENUMERATED_PARTICLES:
            raise StateSpaceTooLarge(factorial(self.N),
                                     factorial(MAX_ENUMERATED_PARTICLES))
        grids = np.array(list(itertools.product(range(self.d), repeat=self.N)))
        weights = self.d ** np.arange(self.N - 1, -1, -1)
        arrays = []
        for sigma in itertools.permutations(range(self.N)):
            arrays.append((grids[:, sigma] @ weights).astype(np.intp))
        return arrays


def kronecker_sum(Q1: Generator, N: int, cap: int = DEFAULT_STATE_CAP) -> TensorSystem:
    """Product generator of N identical non-interacting particles."""
    if N < 1:
        raise ValueError("particle count must be at least one")
    d = Q1.dim
    size = d ** N
    if size > cap:
        raise StateSpaceTooLarge(size, cap)
    QN = np.zeros((size, size))
    for i in range(N):
        QN += np.kron(np.kron(np.eye(d ** i), Q1.rates), np.eye(d ** (N - 1 - i)))
    return TensorSystem(d=d, N=N, Q1=Q1, QN=validate_generator(QN))


def separable_potential(v, N: int, cap: int = DEFAULT_STATE_CAP) -> Potential:
    """(v(x1) + ... + v(xN)) / N on the product space."""
    v = as_potential(v)
    d = len(v)
    if d ** N > cap:
        raise StateSpaceTooLarge(d ** N, cap)
    acc = np.zeros((d,) * N)
    for i in range(N):
        shape = [1] * N
        shape[i] = d
        acc = acc + v.values.reshape(shape)
    return Potential(acc.reshape(-1) / N)


def pairwise_potential(w, N: int, cap: int = DEFAULT_STATE_CAP) -> Potential:
    """Symmetric interaction sum_{i<j} w(x_i, x_j) / binom(N, 2).

    w must be a symmetric d x d matrix; the result is a symmetric
    potential on d^N states, the discrete analogue of a two-body
    repulsion shared between all particle pairs.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise DimensionMismatch("pair interaction must be a square matrix")
    if not np.allclose(w, w.T, atol=1e-12 * max(1.0, np.abs(w).max())):
        raise ValueError("pair interaction matrix must be symmetric")
    d = w.shape[0]
    if N < 1:
        raise ValueError("particle count must be at least one")
    if N == 1:
        return Potential(np.zeros(d))
    if d ** N > cap:
        raise StateSpaceTooLarge(d ** N, cap)
    acc = np.zeros((d,) * N)
    for i in range(N):
        for j in range(i + 1, N):
            # for i < j a plain reshape puts the first axis of w at slot i
            # (slower) and the second at slot j, matching row-major order
            shape = [1] * N
            shape[i] = d
            shape[j] = d
            acc = acc + w.reshape(shape)
    return Potential(acc.reshape(-1) / comb(N, 2))


def symmetrize_measure(mu, sys: TensorSystem) -> ProbMeasure:
    """Average of mu over all coordinate permutations; idempotent."""
    mu = as_measure(mu, sys.size)
    acc = np.zeros(sys.size)
    for perm in sys.permutation_arrays:
        acc += mu.weights[perm]
    return ProbMeasure(acc / len(sys.permutation_arrays))


def marginal(mu, sys: TensorSystem) -> ProbMeasure:
    """First-coordinate marginal: rho[j] = sum of mu over {x : x1 = j}."""
    mu = as_measure(mu, sys.size)
    return ProbMeasure(mu.weights.reshape(sys.d, -1).sum(axis=1))


def is_symmetric(values, sys: TensorSystem, tol: float = 1e-10) -> bool:
    """Invariance of a vector on d^N under every coordinate permutation."""
    vec = np.asarray(values.values if isinstance(values, Potential)
                     else values.weights if isinstance(values, ProbMeasure)
                     else values, dtype=float)
    if vec.shape != (sys.size,):
        raise DimensionMismatch(f"expected vector of length {sys.size}")
    band = tol * max(1.0, float(np.abs(vec).max()))
    return all(float(np.abs(vec[perm] - vec).max()) <= band
               for perm in sys.permutation_arrays)
