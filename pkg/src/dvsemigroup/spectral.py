"""Principal eigenvalue, ground state, ground measure, and Doob transform.

For a connected generator Q and potential V, the matrix M = Q + diag(V)
has a simple real eigenvalue lambda of maximal real part (the Perron root
of exp(M)), with strictly positive right eigenvector psi (ground state)
and left eigenvector pi (ground measure).  Normalization convention:
pi sums to one first, then psi is scaled so sum(psi * pi) = 1, which makes
the equilibrium measure mu = psi * pi a probability vector by construction.

lambda coincides with the exponential growth rate lim (1/t) log ||P_t^V||,
and mu maximizes mu(V) - I(mu) over probability measures (the variational
characterization evaluated in the rate_function module).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceFailure, DimensionMismatch
from .generator import Generator, as_potential, validate_generator
from .semigroup import expm

MAX_POWER_ITERATIONS = 10000
PLATEAU_WINDOW = 50


@dataclass(frozen=True)
class ProbMeasure:
    """Probability vector: entries >= 0, total mass 1 (renormalized exactly)."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1:
            raise DimensionMismatch("measure must be a 1-d vector")
        if (w < 0).any():
            i = int(np.argmin(w))
            raise ValueError(f"measure has negative weight {w[i]} at state {i}")
        total = float(w.sum())
        if abs(total - 1.0) > 1e-12 * max(1.0, abs(total)):
            raise ValueError(f"measure weights sum to {total}, not 1")
        w = w / total
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.weights.shape[0]


def as_measure(mu, dim: int | None = None) -> ProbMeasure:
    m = mu if isinstance(mu, ProbMeasure) else ProbMeasure(np.asarray(mu, dtype=float))
    if dim is not None and len(m) != dim:
        raise DimensionMismatch(f"measure has {len(m)} entries, expected {dim}")
    return m


def total_variation(mu, nu) -> float:
    """TV distance, half the l1 distance of the weight vectors."""
    a = mu.weights if isinstance(mu, ProbMeasure) else np.asarray(mu, dtype=float)
    b = nu.weights if isinstance(nu, ProbMeasure) else np.asarray(nu, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch("measures live on different state spaces")
    return 0.5 * float(np.abs(a - b).sum())


@dataclass(frozen=True)
class GroundData:
    """Principal eigendata of Q + diag(V).

    lam    principal eigenvalue (real, simple),
    psi    ground state, positive right eigenvector, sum(psi * pi) = 1,
    pi     ground measure, positive left eigenvector, total mass 1,
    mu     equilibrium measure psi * pi.
    """

    lam: float
    psi: np.ndarray
    pi: ProbMeasure
    mu: ProbMeasure


def principal_eigen(Q: Generator, V, max_iterations: int = MAX_POWER_ITERATIONS) -> GroundData:
    """Principal eigenvalue and eigenvectors of M = Q + diag(V).

    Power iteration runs on P = exp(h M) with h = 1 / max|M_ii|, whose
    entries are strictly positive for a connected generator, so the
    iteration converges to the Perron pair from the uniform start vector.
    Two inverse-iteration polish steps with the two-sided Rayleigh
    quotient shift then push the residual to the round-off floor.
    Output is deterministic: no random starts, fixed sign convention.
    """
    V = as_potential(V, Q.dim)
    M = Q.rates + np.diag(V.values)
    d = Q.dim
    if d == 1:
        one = np.ones(1)
        return GroundData(lam=float(V.values[0]), psi=one,
                          pi=ProbMeasure(one), mu=ProbMeasure(one))

    scale = max(1.0, float(np.abs(M).max()))
    h = 1.0 / max(float(np.abs(np.diag(M)).max()), 1e-30)
    P = expm(h * M)

    v = np.full(d, 1.0 / d)
    w = np.full(d, 1.0 / d)
    residual = np.inf
    plateau_mark = np.inf
    iterations = 0
    for it in range(1, max_iterations + 1):
        iterations = it
        v = P @ v
        v /= v.sum()
        w = P.T @ w
        w /= w.sum()
        if it % 10 == 0 or it == max_iterations:
            lam = float((w @ (M @ v)) / (w @ v))
            residual = max(float(np.abs(M @ v - lam * v).max()),
                           float(np.abs(M.T @ w - lam * w).max()))
            if residual <= 1e-13 * scale:
                break
            if it % PLATEAU_WINDOW == 0:
                if residual > 0.5 * plateau_mark:
                    break  # stalled; the polish below finishes the job
                plateau_mark = residual

    for _ in range(2):
        lam = float((w @ (M @ v)) / (w @ v))
        shifted = M - (lam + 1e-14 * scale) * np.eye(d)
        try:
            v_new = np.linalg.solve(shifted, v)
            w_new = np.linalg.solve(shifted.T, w)
        except np.linalg.LinAlgError:
            break
        if not (np.all(np.isfinite(v_new)) and np.all(np.isfinite(w_new))):
            break
        v_new *= np.sign(v_new.sum()) or 1.0
        w_new *= np.sign(w_new.sum()) or 1.0
        if v_new.min() <= 0 or w_new.min() <= 0:
            break
        v = v_new / v_new.sum()
        w = w_new / w_new.sum()

    lam = float((w @ (M @ v)) / (w @ v))
    residual = max(float(np.abs(M @ v - lam * v).max()),
                   float(np.abs(M.T @ w - lam * w).max()))
    if residual > 1e-9 * scale or v.min() <= 0 or w.min() <= 0:
        raise ConvergenceFailure(iterations, residual)

    pi = w / w.sum()
    psi = v / float(v @ pi)
    mu = psi * pi
    return GroundData(lam=lam, psi=psi, pi=ProbMeasure(pi), mu=ProbMeasure(mu))


def stationary_distribution(Q: Generator) -> ProbMeasure:
    """Unique probability solution of pi^T Q = 0 (V = 0 ground measure)."""
    return principal_eigen(Q, np.zeros(Q.dim)).pi


def doob_transform(Q: Generator, V, gd: GroundData) -> Generator:
    """Ground-state transform diag(psi)^{-1} (M - lam I) diag(psi).

    The result is a valid generator: off-diagonal entries psi_j M_ij / psi_i
    are nonnegative and rows sum to ((M - lam) psi)_i / psi_i, which
    vanishes up to the eigen-residual and is re-zeroed exactly during
    validation.  The equilibrium measure mu is invariant for it.
    """
    V = as_potential(V, Q.dim)
    M = Q.rates + np.diag(V.values)
    psi = gd.psi
    D = (M - gd.lam * np.eye(Q.dim)) * (psi[None, :] / psi[:, None])
    return validate_generator(D, tol_row=1e-9)


def ground_measure_by_averaging(Q: Generator, V, mu0, T: float,
                                n_grid: int) -> ProbMeasure:
    """Normalized time average of t -> e^{-lam t} mu0^T exp(tM) over [0, T].

    Trapezoid rule on n_grid equally spaced points.  The average converges
    to the ground measure pi as T grows, at rate O(1/T): the exponentially
    decaying transient contributes its time integral, which the window
    dilutes only linearly.  See ground_measure_by_evolution for the
    endpoint measure, which converges at the spectral-gap rate instead.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    if n_grid < 2:
        raise ValueError("need at least two grid points")
    V = as_potential(V, Q.dim)
    mu0 = as_measure(mu0, Q.dim)
    lam = principal_eigen(Q, V).lam
    M = Q.rates + np.diag(V.values)

    dt = T / (n_grid - 1)
    step = expm(dt * (M - lam * np.eye(Q.dim)))
    row = mu0.weights.copy()
    acc = 0.5 * row
    for k in range(1, n_grid):
        row = row @ step
        acc += (0.5 if k == n_grid - 1 else 1.0) * row
    return ProbMeasure(acc / acc.sum())


def ground_measure_by_evolution(Q: Generator, V, mu0, T: float) -> ProbMeasure:
    """Normalized evolved measure e^{-lam T} mu0^T exp(TM) / mass.

    For an equilibrium start mu0 this converges to the ground measure pi
    at the spectral-gap rate exp(-gap * T).
    """
    if T < 0:
        raise ValueError("T must be nonnegative")
    V = as_potential(V, Q.dim)
    mu0 = as_measure(mu0, Q.dim)
    lam = principal_eigen(Q, V).lam
    M = Q.rates + np.diag(V.values)
    row = mu0.weights @ expm(T * (M - lam * np.eye(Q.dim)))
    return ProbMeasure(row / row.sum())
