"""Finite Markov chains: validation, stationary laws, Rouwenhorst
discretization, and long-run growth rates as spectral radii."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _rng
from ._accel import USE_NUMBA, njit
from .errors import GrowthOverflow, InvalidParameter, NoConvergence, NotIrreducible

ROW_SUM_TOL = 1e-12
DENSE_FALLBACK_MAX_N = 64


def as_transition_matrix(P):
    """Validate and return ``P`` as a float array.

    Raises
    ------
    InvalidParameter
        If ``P`` is not square, has entries outside [0, 1], or a row sum
        differs from one by more than 1e-12.
    """
    P = np.array(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 1:
        raise InvalidParameter(f"transition matrix must be square and non-empty, got shape {P.shape}")
    if not np.all(np.isfinite(P)) or P.min() < 0.0 or P.max() > 1.0:
        raise InvalidParameter("transition probabilities must lie in [0, 1]")
    dev = np.abs(P.sum(axis=1) - 1.0).max()
    if dev > ROW_SUM_TOL:
        raise InvalidParameter(f"transition rows must sum to 1 (max deviation {dev:.3e})")
    return P


def is_irreducible(P):
    """Strong connectivity of the transition graph via boolean closure."""
    P = np.asarray(P)
    n = P.shape[0]
    reach = (P > 0) | np.eye(n, dtype=bool)
    while True:
        nxt = (reach.astype(np.int64) @ reach.astype(np.int64)) > 0
        if np.array_equal(nxt, reach):
            break
        reach = nxt
    return bool(reach.all())


def stationary_distribution(P):
    """Unique stationary distribution of an irreducible chain.

    Examples
    --------
    >>> stationary_distribution([[0.9, 0.1], [0.2, 0.8]]).round(12)
    array([0.666666666667, 0.333333333333])
    """
    P = as_transition_matrix(P)
    if not is_irreducible(P):
        raise NotIrreducible("transition graph is not strongly connected")
    n = P.shape[0]
    if n == 1:
        return np.ones(1)
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


@dataclass(frozen=True)
class DiscretizedAR1:
    """Finite-state approximation of a Gaussian AR(1).

    ``sigma`` is the *stationary* standard deviation of the process.
    """

    states: np.ndarray
    transition: np.ndarray
    mu: float
    rho: float
    sigma: float

    def stationary(self):
        return stationary_distribution(self.transition)


def rouwenhorst(n_states, mu, rho, sigma):
    """Rouwenhorst discretization of ``Z' = (1-rho) mu + rho Z + sqrt(1-rho^2) sigma e``.

    The chain's stationary mean and variance equal ``mu`` and ``sigma**2``
    exactly (up to rounding), for every ``n_states``.
    """
    if int(n_states) != n_states or n_states < 2:
        raise InvalidParameter("n_states must be an integer >= 2")
    if not (0.0 <= rho < 1.0):
        raise InvalidParameter(f"rho must lie in [0, 1), got {rho}")
    if not sigma > 0.0:
        raise InvalidParameter(f"sigma must be positive, got {sigma}")
    n = int(n_states)
    p = (1.0 + rho) / 2.0
    theta = np.array([[p, 1.0 - p], [1.0 - p, p]])
    for m in range(3, n + 1):
        nxt = np.zeros((m, m))
        nxt[:-1, :-1] += p * theta
        nxt[:-1, 1:] += (1.0 - p) * theta
        nxt[1:, :-1] += (1.0 - p) * theta
        nxt[1:, 1:] += p * theta
        nxt[1:-1, :] /= 2.0
        theta = nxt
    theta /= theta.sum(axis=1, keepdims=True)
    spread = sigma * np.sqrt(n - 1.0)
    states = np.linspace(mu - spread, mu + spread, n)
    return DiscretizedAR1(states=states, transition=theta, mu=float(mu), rho=float(rho), sigma=float(sigma))


# --- spectral radius ---------------------------------------------------------


@njit(cache=True, nogil=True)
def _power_iteration_numba(M, eps, tol, max_iter):
    n = M.shape[0]
    x = np.ones(n)
    y = np.empty(n)
    hi = 0.0
    lo = 0.0
    for it in range(max_iter):
        for i in range(n):
            s = 0.0
            for j in range(n):
                s += M[i, j] * x[j]
            y[i] = s
        lo = np.inf
        hi = 0.0
        for i in range(n):
            r = y[i] / x[i] if x[i] > 0.0 else 0.0
            if r < lo:
                lo = r
            if r > hi:
                hi = r
        if hi - lo <= tol * hi:
            return 0.5 * (lo + hi), it, True
        top = 0.0
        for i in range(n):
            x[i] = y[i] + eps * x[i]
            if x[i] > top:
                top = x[i]
        for i in range(n):
            x[i] /= top
    return hi, max_iter, False


def _power_iteration_numpy(M, eps, tol, max_iter):
    x = np.ones(M.shape[0])
    hi = 0.0
    for it in range(max_iter):
        y = M @ x
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(x > 0.0, y / x, 0.0)
        lo, hi = ratios.min(), ratios.max()
        if hi - lo <= tol * hi:
            return 0.5 * (lo + hi), it, True
        x = y + eps * x
        x /= x.max()
    return hi, max_iter, False


def spectral_radius(M, tol=1e-12, max_iter=200_000):
    """Perron root of a nonnegative square matrix.

    Power iteration runs on ``M + eps I`` (``eps = 1e-8 max(M)``) so that
    periodic matrices still converge; the stopping rule is the
    Collatz-Wielandt bracket ``min (Mx)_i/x_i <= r(M) <= max (Mx)_i/x_i``
    evaluated on the unshifted matrix, so no shift correction is needed.
    When the bracket fails to close (typically a reducible matrix) and the
    matrix is small, the dense eigenvalue solver is used instead.

    Raises
    ------
    NoConvergence
        Bracket still open after ``max_iter`` sweeps on a matrix too large
        for the dense fallback; ``err.estimate`` is the upper bound reached.
    """
    M = np.ascontiguousarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidParameter("matrix must be square")
    if not np.all(np.isfinite(M)) or M.min() < 0.0:
        raise InvalidParameter("matrix must be finite and nonnegative")
    top = M.max()
    if top == 0.0:
        return 0.0
    small = M.shape[0] <= DENSE_FALLBACK_MAX_N
    if small and not is_irreducible(M > 0.0):
        # the bracket need not close on reducible matrices
        return float(np.abs(np.linalg.eigvals(M)).max())
    eps = 1e-8 * top
    kernel = _power_iteration_numba if USE_NUMBA else _power_iteration_numpy
    r, _, ok = kernel(M, eps, tol, max_iter)
    if ok:
        return float(r)
    if small:
        return float(np.abs(np.linalg.eigvals(M)).max())
    raise NoConvergence(f"power iteration did not converge in {max_iter} sweeps", estimate=float(r))


def growth_operator(P, cond_means):
    """``L[z, z'] = P[z, z'] * cond_means[z']``."""
    P = np.asarray(P, dtype=float)
    m = np.asarray(cond_means, dtype=float)
    if m.shape != (P.shape[0],):
        raise InvalidParameter("cond_means must have one entry per state")
    if not np.all(np.isfinite(m)) or m.min() < 0.0:
        raise InvalidParameter("conditional means must be finite and nonnegative")
    return P * m[None, :]


def growth_rate(P, cond_means):
    """Long-run growth rate ``lim (E prod_{t<=n} phi_t)^(1/n)``.

    Returns
    -------
    G : float
        Spectral radius of the growth operator.
    L : ndarray
        The growth operator itself.
    """
    L = growth_operator(P, cond_means)
    return spectral_radius(L), L


# --- Monte Carlo oracle ------------------------------------------------------


def _draw_next_state(cum, prev, u):
    # index of first cumulative probability exceeding u, per row
    rows = cum[prev]
    nxt = (rows <= u[:, None]).sum(axis=1)
    return np.minimum(nxt, cum.shape[1] - 1)


def _oracle_chunk(P_cum, pi_cum, sampler, n, seed, start, stop):
    paths = np.arange(start, stop, dtype=np.int64)
    z = np.minimum((pi_cum[None, :] <= _rng.uniform_np(seed, paths, 0, _rng.TAG_INIT_STATE)[:, None]).sum(axis=1),
                   len(pi_cum) - 1)
    logprod = np.zeros(len(paths))
    lo, hi = np.inf, -np.inf
    for t in range(1, n + 1):
        z = _draw_next_state(P_cum, z, _rng.uniform_np(seed, paths, t, _rng.TAG_CHAIN))
        u1 = _rng.uniform_np(seed, paths, t, _rng.TAG_PHI1)
        u2 = _rng.uniform_np(seed, paths, t, _rng.TAG_PHI2)
        phi = np.asarray(sampler(z, u1, u2), dtype=float)
        if phi.size:
            lo = min(lo, phi.min())
            hi = max(hi, phi.max())
        with np.errstate(divide="ignore"):
            logprod += np.log(phi)
    return logprod, lo, hi


def mc_growth_oracle(P, sampler, n, n_paths, seed, threads=1, chunk=50_000):
    """Simulation estimate of the growth rate ``(E prod_{t=1}^n phi_t)^(1/n)``.

    ``Z_0`` is drawn from the stationary distribution.  Each path has its own
    counter-based stream keyed by ``(seed, path)``, so the result does not
    depend on ``threads`` or ``chunk``.

    Parameters
    ----------
    P : array_like
        Transition matrix.
    sampler : callable or object with ``sample``
        ``sampler(states, u1, u2)`` maps integer states and two independent
        uniform arrays to draws of ``phi``.  A
        :class:`~ifp.model.PrimitiveSpec` works directly.
    n : int
        Horizon, at least 50.
    n_paths : int
        Number of paths, at least 10**4.
    seed : int

    Returns
    -------
    estimate, std_error : float
        The standard error is the delta-method transform of the sample
        standard deviation of the path products.
    """
    if n < 50:
        raise InvalidParameter("horizon n must be >= 50")
    if n_paths < 10_000:
        raise InvalidParameter("n_paths must be >= 10**4")
    P = as_transition_matrix(P)
    if hasattr(sampler, "sample"):
        sampler = sampler.sample
    P_cum = np.cumsum(P, axis=1)
    pi_cum = np.cumsum(stationary_distribution(P))
    s = _rng.seed_to_uint64(seed)
    bounds = [(a, min(a + chunk, n_paths)) for a in range(0, n_paths, chunk)]
    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as ex:
        parts = list(ex.map(lambda b: _oracle_chunk(P_cum, pi_cum, sampler, n, s, b[0], b[1]), bounds))
    logprod = np.concatenate([p[0] for p in parts])
    lo = min(p[1] for p in parts)
    hi = max(p[2] for p in parts)
    if lo == hi:
        # every draw identical: the product is deterministic
        return float(lo), 0.0
    top = logprod.max()
    if top == -np.inf:
        return 0.0, 0.0
    w = np.exp(logprod - top)
    mean_w = w.mean()
    log_mean = top + np.log(mean_w)
    est = np.exp(log_mean / n)
    if not np.isfinite(est):
        raise GrowthOverflow(f"growth estimate overflows (log mean product {log_mean:.3e})")
    rel_sd = w.std(ddof=1) / mean_w
    se = est * rel_sd / (n * np.sqrt(len(w)))
    return float(est), float(se)
