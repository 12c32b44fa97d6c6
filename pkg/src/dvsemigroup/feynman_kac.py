"""Stochastic cross-check of the principal eigenvalue.

Continuous-time chains are simulated by the Gillespie algorithm: from
state i, hold for an exponential time with rate -Q_ii, then jump to j
with probability Q_ij / (-Q_ii).  The exponential path weight

    exp( int_0^t V(X_s) ds )

is accumulated exactly as sum_k V[state_k] * (holding time), since V is
piecewise constant along a jump path.  Averaging the weights over paths
started from the uniform distribution gives

    (1/t) log E[ e^{int V} ]  ->  lambda_V   as t grows,

with an O(1/t) bias from the finite horizon.

Randomness comes from a counter-based (Philox) generator with one stream
per path derived from (seed, path index), so results do not depend on
how paths are scheduled across workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .generator import Generator, as_potential

_CHUNK = 64  # draws consumed per refill of a path's random buffers


@dataclass(frozen=True)
class PathSample:
    """One jump path truncated at the horizon.

    states           visited states, in order,
    holding_times    time spent in each visited state (last one truncated
                     so the times sum exactly to the horizon),
    total_time       the horizon t,
    weight_exponent  int_0^t V(X_s) ds for the potential the path was
                     sampled with (zero when no potential was given).
    """

    states: np.ndarray
    holding_times: np.ndarray
    total_time: float
    weight_exponent: float


def path_stream(seed: int, index: int) -> np.random.Generator:
    """Counter-based per-path stream; independent of scheduling order."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(index,))))


def log_mean_exp(values: np.ndarray) -> float:
    """log(mean(exp(values))) with the max shifted out, overflow-safe."""
    values = np.asarray(values, dtype=float)
    shift = float(values.max())
    return shift + float(np.log(np.exp(values - shift).mean()))


def _simulate(Q: Generator, V: np.ndarray | None, x0: int, t: float,
              rng: np.random.Generator, record: bool):
    """Core Gillespie loop; draws arrive in chunks from the path stream."""
    rates = -np.diag(Q.rates)
    jump = Q.rates.copy()
    np.fill_diagonal(jump, 0.0)
    row_tot = jump.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cum = np.cumsum(jump, axis=1) / row_tot[:, None]

    x = int(x0)
    elapsed = 0.0
    wexp = 0.0
    states = [x] if record else None
    holds = [] if record else None

    exps = rng.standard_exponential(_CHUNK)
    unis = rng.random(_CHUNK)
    k = 0
    while True:
        rate = rates[x]
        if rate <= 0.0:
            tau = t - elapsed          # absorbing row: hold forever
        else:
            if k >= _CHUNK:
                exps = rng.standard_exponential(_CHUNK)
                unis = rng.random(_CHUNK)
                k = 0
            tau = exps[k] / rate
        if elapsed + tau >= t or rate <= 0.0:
            tau = t - elapsed
            if record:
                holds.append(tau)
            if V is not None:
                wexp += V[x] * tau
            break
        if record:
            holds.append(tau)
        if V is not None:
            wexp += V[x] * tau
        elapsed += tau
        x = int(np.searchsorted(cum[x], unis[k]))
        k += 1
        if record:
            states.append(x)

    if record:
        return np.array(states, dtype=np.intp), np.array(holds), wexp
    return None, None, wexp


def simulate_ctmc(Q: Generator, x0: int, t: float, seed: int) -> PathSample:
    """Sample one path of the chain started at x0, truncated at time t."""
    if not 0 <= x0 < Q.dim:
        raise DimensionMismatch(f"start state {x0} outside 0..{Q.dim - 1}")
    if t <= 0:
        raise ValueError("horizon must be positive")
    states, holds, _ = _simulate(Q, None, x0, float(t), path_stream(seed, 0), True)
    return PathSample(states=states, holding_times=holds,
                      total_time=float(t), weight_exponent=0.0)


def sample_weighted_path(Q: Generator, V, x0: int, t: float, seed: int,
                         index: int = 0) -> PathSample:
    """Like simulate_ctmc but also accumulates the potential weight."""
    V = as_potential(V, Q.dim)
    states, holds, wexp = _simulate(Q, V.values, x0, float(t),
                                    path_stream(seed, index), True)
    return PathSample(states=states, holding_times=holds,
                      total_time=float(t), weight_exponent=wexp)


def estimate_lambda(Q: Generator, V, t: float, n_paths: int, seed: int):
    """Monte Carlo principal eigenvalue and its delta-method standard error.

    estimate = (1/t) log( mean over paths of exp(weight exponent) ),
    computed through a shifted log-mean-exp so large exponents never
    overflow.  Start states are drawn uniformly, one per path, from the
    path's own stream.  A constant potential makes every weight
    deterministic, so that case returns the constant exactly with zero
    error and no sampling.
    """
    if n_paths < 2:
        raise ValueError("need at least two paths")
    if t <= 0:
        raise ValueError("horizon must be positive")
    V = as_potential(V, Q.dim)
    vv = V.values
    if float(vv.max() - vv.min()) == 0.0:
        return float(vv[0]), 0.0

    exponents = np.empty(n_paths)
    for i in range(n_paths):
        rng = path_stream(seed, i)
        x0 = int(rng.integers(0, Q.dim))
        _, _, wexp = _simulate(Q, vv, x0, float(t), rng, False)
        exponents[i] = wexp

    estimate = log_mean_exp(exponents) / t
    scaled = np.exp(exponents - float(exponents.max()))
    std_error = float(scaled.std(ddof=1)) / (np.sqrt(n_paths) * float(scaled.mean()) * t)
    return estimate, std_error


def occupation_measure(path: PathSample, dim: int) -> np.ndarray:
    """Fraction of time the path spends in each state."""
    occ = np.zeros(dim)
    np.add.at(occ, path.states, path.holding_times)
    return occ / path.total_time
