"""Occupation-measure rate function I(mu) and its dual variational problems.

For a generator Q (action L) and a probability measure mu,

    I(mu) = - inf over positive u of  sum_i mu_i (L u)_i / u_i.

Writing u = e^w, the objective

    F(w) = sum_i mu_i sum_j Q_ij e^{w_j - w_i}

is smooth and convex in w, invariant under w -> w + c, so the infimum is
computed by damped Newton on the gauge slice sum(w) = 0.  At the minimizer
the tilted generator L_w[i,j] = Q_ij e^{w_j - w_i} (diagonal adjusted to
zero row sums) has mu as a stationary vector, which yields closed forms
for the derivatives of I:

    grad I(mu) = -(L u*/u*),      Hess I(mu) = L_w H^+ L_w^T,

with H the (positive semidefinite) Hessian of F at the minimizer.  These
feed the concave maximizations

    lambda_V = sup_mu ( mu(V) - I(mu) )          [dv_sup]
    I(mu)    = sup_V  ( mu(V) - lambda_V )       [legendre_I]

the first solved by envelope-gradient ascent over the simplex with Newton
curvature, the second by Barzilai-Borwein ascent using the fact that the
equilibrium measure of V is the gradient of lambda_V.

Every candidate mu gives the rigorous lower bound mu(V) - I(mu) <= lambda_V,
and every positive u gives the Collatz-Wielandt upper bound
lambda_V <= max_i (V + L u/u)_i; their difference certifies convergence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotConverged, UnsupportedSupport
from .generator import Generator, as_potential
from .spectral import ProbMeasure, as_measure, principal_eigen


@dataclass(frozen=True)
class SolverOptions:
    """Knobs shared by the variational solvers.

    tol        target sup-norm of the inner Newton gradient,
    dual_tol   acceptable duality gap for dv_sup,
    max_iter   outer iteration cap,
    boundary   'reject' raises on measures with zero entries, 'reduce'
               minimizes the reduced objective on the support,
    seed       seeds the extra ascent restarts,
    restarts   number of initializations for dv_sup.
    """

    tol: float = 1e-10
    dual_tol: float = 1e-8
    max_iter: int = 200
    boundary: str = "reject"
    seed: int = 0
    restarts: int = 3


DEFAULT_OPTIONS = SolverOptions()


@dataclass(frozen=True)
class RateResult:
    value: float
    minimizer_logu: np.ndarray
    converged: bool
    iterations: int
    gradient_norm: float


def _tilted(Q: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Off-diagonal part of the tilted generator, T_ij = Q_ij e^{w_j - w_i}."""
    T = Q * np.exp(w[None, :] - w[:, None])
    np.fill_diagonal(T, 0.0)
    return T


def _newton_min(Q: np.ndarray, mu: np.ndarray, tol: float, max_iter: int,
                w0: np.ndarray | None = None):
    """Damped Newton for F(w) with sum(w) = 0 gauge.

    The rank-one term rho * ones/d added to the Hessian removes the gauge
    null direction without moving the constrained solution; a small ridge
    keeps the solve well posed when the tilted support graph degenerates.
    Falls back to gradient steps whenever the Newton direction fails to
    produce Armijo decrease.
    """
    d = Q.shape[0]
    qdiag = float(mu @ np.diag(Q))
    ones = np.ones((d, d))

    def f_parts(w):
        T = _tilted(Q, w)
        tw = mu[:, None] * T
        F = float(tw.sum()) + qdiag
        g = tw.sum(axis=0) - tw.sum(axis=1)
        return F, g, tw

    w = np.zeros(d) if w0 is None else np.asarray(w0, dtype=float) - np.mean(w0)
    F, g, tw = f_parts(w)
    iterations = 0
    for iterations in range(max_iter):
        gnorm = float(np.abs(g).max())
        if gnorm <= tol:
            break
        H = np.diag(tw.sum(axis=0) + tw.sum(axis=1)) - (tw + tw.T)
        rho = max(float(np.trace(H)) / d, 1e-13)
        try:
            step = np.linalg.solve(H + rho * ones / d + 1e-13 * rho * np.eye(d), -g)
        except np.linalg.LinAlgError:
            step = -g
        descent = float(g @ step)
        if descent > 0:
            step, descent = -g, -float(g @ g)
        # Newton contracts the gradient quadratically near the minimum,
        # where F-differences drown in round-off; accept the full step on
        # gradient contraction first, fall back to Armijo backtracking
        Fn, gn, twn = f_parts(w + step)
        if float(np.abs(gn).max()) < 0.5 * gnorm:
            w = w + step
            w -= w.mean()
            F, g, tw = Fn, gn, twn
            continue
        s = 1.0
        accepted = False
        for _ in range(60):
            Fn, gn, twn = f_parts(w + s * step)
            if Fn < F + 1e-4 * s * descent:
                w = w + s * step
                w -= w.mean()
                F, g, tw = Fn, gn, twn
                accepted = True
                break
            s *= 0.5
        if not accepted:
            break
    return F, w, float(np.abs(g).max()), iterations, tw


def rate_I(Q: Generator, mu, opts: SolverOptions | None = None) -> RateResult:
    """Donsker-Varadhan rate of an occupation measure.

    Returns -min F(w) together with the gauge-fixed minimizer.  The value
    is always >= 0 because F(0) = 0 is a feasible point.  Measures with
    zero entries are rejected unless opts.boundary = 'reduce', in which
    case the infimum is realized on the support: terms leaving the
    support are driven to their infimum (zero), equivalent to deleting
    the corresponding columns.
    """
    opts = opts or DEFAULT_OPTIONS
    mu = as_measure(mu, Q.dim)
    m = mu.weights
    support = m > 0.0

    if support.all():
        F, w, gnorm, iters, _ = _newton_min(Q.rates, m, opts.tol, opts.max_iter)
        logu = w
    elif opts.boundary == "reject":
        raise UnsupportedSupport(
            f"measure vanishes on states {np.nonzero(~support)[0].tolist()}; "
            "pass boundary='reduce' to minimize on the support")
    else:
        sub = np.ix_(support, support)
        Qr = Q.rates[sub].copy()
        # keep the full diagonal: it carries the -sum of all rates,
        # including edges out of the support whose tilt infimum is zero
        np.fill_diagonal(Qr, np.diag(Q.rates)[support])
        F, w_s, gnorm, iters, _ = _newton_min(Qr, m[support], opts.tol, opts.max_iter)
        logu = np.full(Q.dim, np.nan)
        logu[support] = w_s

    converged = gnorm <= opts.tol
    value = max(-F, 0.0)
    if not converged and gnorm > 1e-6:
        raise NotConverged(value, gnorm, iterations=iters)
    return RateResult(value=value, minimizer_logu=logu, converged=converged,
                      iterations=iters, gradient_norm=gnorm)


def rate_IV(Q: Generator, V, mu, opts: SolverOptions | None = None) -> float:
    """Tilted rate I^V(mu) = I(mu) - mu(V) + lambda_V.

    Nonnegative, and zero exactly at the equilibrium measure of (Q, V).
    """
    V = as_potential(V, Q.dim)
    mu = as_measure(mu, Q.dim)
    lam = principal_eigen(Q, V).lam
    return rate_I(Q, mu, opts).value - float(mu.weights @ V.values) + lam


def _rate_parts(Q: np.ndarray, mu: np.ndarray, tol: float, max_iter: int,
                w0: np.ndarray | None):
    """Inner solve plus the derivative ingredients of I at mu."""
    F, w, gnorm, _, tw = _newton_min(Q, mu, tol, max_iter, w0)
    T = _tilted(Q, w)
    h = T.sum(axis=1) + np.diag(Q)                     # (L u*/u*)_i
    Lw = T.copy()
    np.fill_diagonal(Lw, -T.sum(axis=1))
    H = np.diag(tw.sum(axis=0) + tw.sum(axis=1)) - (tw + tw.T)
    return -F, w, h, Lw, H


def hessian_of_rate(Lw: np.ndarray, H: np.ndarray) -> np.ndarray:
    """Hess I(mu) = L_w pinv(H) L_w^T on the zero-sum subspace."""
    return Lw @ np.linalg.pinv(H, rcond=1e-13) @ Lw.T


def dv_sup(Q: Generator, V, opts: SolverOptions | None = None):
    """Variational principal eigenvalue sup_mu (mu(V) - I(mu)).

    Ascent over the simplex interior with the envelope gradient
    V + L u*/u* (u* the rate_I minimizer at the current mu), taking
    Newton steps preconditioned by Hess I, with an exponentiated-gradient
    fallback and fraction-to-boundary damping.  Restarts rerun the ascent
    from seeded random interior points; they are skipped once the
    Collatz-Wielandt duality gap already certifies the answer, since no
    start can improve a certified value by more than the gap.

    Returns (lambda_hat, mu_star).
    """
    opts = opts or DEFAULT_OPTIONS
    V = as_potential(V, Q.dim)
    d = Q.dim
    Vv = V.values
    if d == 1:
        return float(Vv[0]), ProbMeasure(np.ones(1))

    rng = np.random.default_rng(opts.seed)
    starts = [np.full(d, 1.0 / d)]
    for _ in range(max(opts.restarts - 1, 0)):
        starts.append(rng.dirichlet(np.full(d, 2.0)))

    certify = 0.1 * opts.dual_tol
    best = (-np.inf, None, np.inf)                      # value, mu, gap
    for mu0 in starts:
        value, mu, gap = _dv_ascent(Q.rates, Vv, mu0, opts)
        if value > best[0]:
            best = (value, mu, gap)
        if best[2] <= certify:
            break

    value, mu, gap = best
    if mu is None or gap > 1e-5 * max(1.0, abs(value)):
        raise NotConverged(value, gap)
    return value, ProbMeasure(mu)


def _dv_ascent(Q: np.ndarray, Vv: np.ndarray, mu0: np.ndarray, opts: SolverOptions):
    d = Q.shape[0]
    mu = mu0.copy()
    w0 = None
    value = -np.inf
    gap = np.inf
    for _ in range(opts.max_iter):
        I, w0, h, Lw, H = _rate_parts(Q, mu, opts.tol, 100, w0)
        value = float(mu @ Vv - I)
        grad = Vv + h
        gap = float(grad.max() - value)
        if gap <= 0.1 * opts.dual_tol:
            break

        HI = hessian_of_rate(Lw, H)
        K = np.zeros((d + 1, d + 1))
        K[:d, :d] = HI + 1e-13 * max(float(np.trace(HI)) / d, 1.0) * np.eye(d)
        K[:d, d] = 1.0
        K[d, :d] = 1.0
        rhs = np.zeros(d + 1)
        rhs[:d] = grad
        try:
            step = np.linalg.solve(K, rhs)[:d]
        except np.linalg.LinAlgError:
            step = mu * (grad - mu @ grad)
        if not np.all(np.isfinite(step)):
            step = mu * (grad - mu @ grad)

        s = 1.0
        shrinking = step < 0
        if shrinking.any():
            s = min(1.0, 0.95 * float(np.min(-mu[shrinking] / step[shrinking])))
        res = _try_steps(Q, Vv, opts, mu, w0, value,
                         lambda a: _renorm(mu + a * step), s)
        if res is None:
            # exponentiated-gradient fallback keeps iterates interior
            res = _try_steps(Q, Vv, opts, mu, w0, value,
                             lambda a: _renorm(mu * np.exp(a * (grad - mu @ grad))), 1.0)
        if res is None:
            break
        mu, w0 = res

    I, w0, h, _, _ = _rate_parts(Q, mu, min(opts.tol, 1e-12), 100, w0)
    value = float(mu @ Vv - I)
    gap = float((Vv + h).max() - value)
    return value, mu, gap


def _renorm(mu: np.ndarray) -> np.ndarray | None:
    if mu.min() <= 0.0:
        return None
    return mu / mu.sum()


def _try_steps(Q, Vv, opts, mu, w0, value, candidate, s0):
    """Backtrack the step factor until the dual objective improves."""
    s = s0
    for _ in range(60):
        mun = candidate(s)
        if mun is not None:
            F, wn, gn, _, _ = _newton_min(Q, mun, opts.tol, 100, w0)
            if float(mun @ Vv + F) > value:            # mu V - I = mu V + F_min
                return mun, wn
        s *= 0.5
    return None


def legendre_I(Q: Generator, mu, opts: SolverOptions | None = None) -> float:
    """Legendre route to the rate: sup_V (mu(V) - lambda_V), gauge sum V = 0.

    The gradient of the concave objective is mu minus the equilibrium
    measure of the current V, so Barzilai-Borwein steps with the spectral
    solver as inner oracle converge to stationarity mu = mu_V.  Serves as
    an independent cross-check of rate_I; the shift covariance of lambda
    makes the zero-mean gauge harmless.
    """
    opts = opts or DEFAULT_OPTIONS
    mu = as_measure(mu, Q.dim)
    if (mu.weights <= 0).any():
        raise UnsupportedSupport("legendre_I needs a strictly positive measure")
    m = mu.weights
    d = Q.dim

    V = np.zeros(d)
    g_prev = None
    V_prev = None
    step = 1.0
    value = 0.0
    gnorm = np.inf
    for it in range(max(opts.max_iter, 2000)):
        gd = principal_eigen(Q, V)
        g = m - gd.mu.weights
        value = float(m @ V - gd.lam)
        gnorm = float(np.abs(g).max())
        if gnorm <= max(opts.tol, 1e-11):
            break
        if g_prev is not None:
            dV = V - V_prev
            dg = g - g_prev
            denom = float(dg @ dg)
            if denom > 0:
                step = abs(float(dV @ dg)) / denom
        V_prev, g_prev = V.copy(), g.copy()
        V = V + step * g
        V -= V.mean()
    if gnorm > 1e-6:
        raise NotConverged(value, gnorm, iterations=it)
    return value


def relative_entropy(mu, pi) -> float:
    """Kullback-Leibler divergence sum mu_i log(mu_i / pi_i).

    Conventions: 0 log(0/x) = 0; returns +inf when mu charges a state that
    pi does not (absolute continuity fails).  Always nonnegative.  Equals
    the variational value sup_V (mu(V) - log pi(e^V)).
    """
    a = mu.weights if isinstance(mu, ProbMeasure) else np.asarray(mu, dtype=float)
    b = pi.weights if isinstance(pi, ProbMeasure) else np.asarray(pi, dtype=float)
    if a.shape != b.shape:
        raise ValueError("measures live on different state spaces")
    pos = a > 0
    if (b[pos] == 0).any():
        return float("inf")
    return float(np.sum(a[pos] * np.log(a[pos] / b[pos])))
