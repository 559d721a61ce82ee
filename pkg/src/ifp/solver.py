"""Time iteration on an asset grid.

The operator maps a consumption policy ``c`` to the policy ``Tc`` whose value
at ``(a, z)`` solves ``u'(xi) = max(E_z[beta' R' u'(c(R'(a - xi) + Y', z'))], u'(a))``
for ``xi`` in ``(0, a]``.  Iterating from ``c(a, z) = a`` converges to the
optimal policy when the growth conditions hold.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._accel import USE_NUMBA
from .errors import (
    AssumptionViolated,
    DomainError,
    DominanceUnverifiable,
    GridMismatch,
    InvalidParameter,
    NotConverged,
    RootBracketFailure,
)
from .model import compute_growth_report, inverse_marginal_utility, marginal_utility

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AssetGrid:
    """Strictly increasing, log-spaced asset nodes in ``(0, inf)``."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or len(pts) < 50:
            raise InvalidParameter("asset grid needs at least 50 points")
        if pts[0] <= 0 or np.any(np.diff(pts) <= 0):
            raise InvalidParameter("asset grid must be strictly increasing and start above 0")
        object.__setattr__(self, "points", pts)

    @classmethod
    def exponential(cls, a_min, a_max, n=200):
        return cls(np.geomspace(a_min, a_max, n))

    @property
    def a_min(self):
        return float(self.points[0])

    @property
    def a_max(self):
        return float(self.points[-1])

    def __len__(self):
        return len(self.points)


@dataclass
class SolverConfig:
    """Tolerances for :func:`solve`.

    ``root_tol`` is relative: the inner bisection at node ``a`` stops once
    its bracket is narrower than ``root_tol * a``.
    """

    tol_rho: float = 1e-8
    max_iter: int = 5000
    quad_nodes: int = 11
    root_tol: float = 1e-10
    grid_points: int = 200
    a_min_factor: float = 1e-3
    a_max_factor: float = 200.0

    def __post_init__(self):
        if min(self.tol_rho, self.root_tol, self.a_min_factor, self.a_max_factor) <= 0:
            raise InvalidParameter("solver tolerances must be positive")
        if self.max_iter < 1 or self.quad_nodes < 5:
            raise InvalidParameter("max_iter >= 1 and quad_nodes >= 5 required")


@dataclass
class Policy:
    """Consumption on ``grid`` for each exogenous state.

    ``c[i, z]`` is consumption at asset level ``grid.points[i]`` in state
    ``z``; ``alpha`` the asymptotic marginal propensity to consume and
    ``a_bar`` the wealth level at or below which all wealth is consumed.
    """

    grid: AssetGrid
    c: np.ndarray
    alpha: np.ndarray = None
    a_bar: np.ndarray = None
    trace: list = field(default_factory=list)
    gamma: float = None

    @property
    def n_states(self):
        return self.c.shape[1]

    def cT(self):
        return np.ascontiguousarray(self.c.T)

    def slopes(self):
        return _kernels.top_slopes(self.grid.points, self.cT())

    def __call__(self, a, z):
        """Consumption off the grid (linear interpolation / extrapolation)."""
        g = self.grid.points
        cz = np.ascontiguousarray(self.c[:, z])
        slope = (cz[-1] - cz[-2]) / (g[-1] - g[-2])
        out = _kernels.interp_policy_np(g, cz, slope, a)
        return float(out) if np.ndim(out) == 0 else out

    def check_invariants(self, tol=1e-12):
        """Raise ``ValueError`` unless 0 < c <= a and c, a - c are nondecreasing."""
        a = self.grid.points[:, None]
        if np.any(self.c <= 0) or np.any(self.c > a * (1 + tol)):
            raise ValueError("policy violates 0 < c <= a")
        if np.any(np.diff(self.c, axis=0) < -tol * a[1:]):
            raise ValueError("consumption is not increasing in assets")
        if np.any(np.diff(a - self.c, axis=0) < -tol * a[1:]):
            raise ValueError("savings are not increasing in assets")


class EulerData:
    """Quadrature nodes and weights for the expectation in the Euler equation.

    For next state ``z'`` and node ``k`` the return, income and combined
    weight are ``Rn[z', k]``, ``Yn[z', k]`` and
    ``W[z, z', k] = P(z, z') E[beta | z'] w_k Rn[z', k]``.  Nodes with a zero
    return get zero weight, which is the ``0 * inf = 0`` convention.
    """

    def __init__(self, spec, quad_nodes=11):
        n = spec.n_states
        eb = spec.beta.means()
        r_nodes, y_nodes, weights = [], [], []
        for zh in range(n):
            r, wr = spec.ret.quadrature(zh, quad_nodes)
            y, wy = spec.income.quadrature(zh, quad_nodes)
            r_nodes.append(np.repeat(r, len(y)))
            y_nodes.append(np.tile(y, len(r)))
            weights.append(np.outer(wr, wy).ravel())
        K = max(len(w) for w in weights)
        self.Rn = np.zeros((n, K))
        self.Yn = np.ones((n, K))
        w = np.zeros((n, K))
        for zh in range(n):
            k = len(weights[zh])
            self.Rn[zh, :k] = r_nodes[zh]
            self.Yn[zh, :k] = y_nodes[zh]
            w[zh, :k] = weights[zh]
        self.W = np.ascontiguousarray(spec.transition[:, :, None] * (eb[:, None] * w * self.Rn)[None, :, :])
        self.gamma = spec.gamma

    def expectation(self, policy, x, z):
        g = policy.grid.points
        cT = policy.cT()
        slopes = _kernels.top_slopes(g, cT)
        if USE_NUMBA and np.ndim(x) == 0:
            val = _kernels.euler_expectation(float(x), int(z), g, cT, slopes, self.W, self.Rn, self.Yn, self.gamma)
        else:
            x_arr = np.asarray(x, dtype=float)
            val = _kernels.euler_expectation_np(x_arr, np.broadcast_to(z, x_arr.shape), g, cT, slopes,
                                                self.W, self.Rn, self.Yn, self.gamma)
            val = float(val) if np.ndim(val) == 0 else val
        if np.any(~np.isfinite(val)):
            raise DomainError("interpolated consumption is not positive; policy is corrupted")
        return val


def euler_expectation(spec, policy, x, z, quad_nodes=11):
    """``E_z[beta' R' u'(c(R' x + Y', z'))]`` at savings ``x >= 0``."""
    if np.any(np.asarray(x) < 0):
        raise InvalidParameter("savings must be nonnegative")
    return EulerData(spec, quad_nodes).expectation(policy, x, z)


def default_grid(spec, config=None):
    config = config or SolverConfig()
    med = spec.median_income()
    return AssetGrid.exponential(config.a_min_factor * med, config.a_max_factor * med, config.grid_points)


def _step(data, grid, cT, root_tol):
    out = np.empty_like(cT)
    a_bar = np.empty(cT.shape[0])
    kernel = _kernels.time_iteration_step if USE_NUMBA else _kernels.time_iteration_step_np
    kernel(grid.points, cT, data.W, data.Rn, data.Yn, data.gamma, root_tol, out, a_bar)
    if not np.all(np.isfinite(out)) or np.any(out <= 0):
        raise RootBracketFailure("time iteration produced non-positive or non-finite consumption")
    return out, a_bar


def time_iteration_step(spec, policy, config=None, data=None):
    """Apply the time iteration operator once; ``a_bar`` of the result is the
    binding threshold of the *input* policy."""
    config = config or SolverConfig()
    data = data or EulerData(spec, config.quad_nodes)
    out, a_bar = _step(data, policy.grid, policy.cT(), config.root_tol)
    return Policy(policy.grid, np.ascontiguousarray(out.T), a_bar=a_bar, gamma=spec.gamma)


def policy_distance(p1, p2, gamma=None):
    """Sup over grid nodes of ``|u'(c1) - u'(c2)|``."""
    if p1.grid.points.shape != p2.grid.points.shape or not np.array_equal(p1.grid.points, p2.grid.points):
        raise GridMismatch("policies live on different grids")
    if p1.c.shape != p2.c.shape:
        raise GridMismatch("policies have different numbers of states")
    gamma = gamma if gamma is not None else (p1.gamma if p1.gamma is not None else p2.gamma)
    if gamma is None:
        raise InvalidParameter("gamma unknown; pass it explicitly")
    return float(np.abs(p1.c ** (-gamma) - p2.c ** (-gamma)).max())


def asymptotic_mpc(policy, z):
    """Least-squares slope of consumption over the top 10% of grid nodes,
    clipped to [0, 1]."""
    g = policy.grid.points
    k = max(5, int(np.ceil(0.1 * len(g))))
    a = g[-k:]
    c = policy.c[-k:, z]
    slope = np.polyfit(a, c, 1)[0]
    return float(np.clip(slope, 0.0, 1.0))


def solve(spec, config=None, grid=None, c0=None, check=True):
    """Successive approximation of the optimal policy from ``c0`` (default ``c = a``).

    Returns
    -------
    policy : Policy
    trace : list of float
        ``rho(T^{k+1} c0, T^k c0)`` for each iteration.

    Raises
    ------
    AssumptionViolated
        The discount, discounted-return or income conditions fail.
    NotConverged
        ``max_iter`` reached; the exception carries the last iterate.
    """
    config = config or SolverConfig()
    if check:
        report = compute_growth_report(spec)
        if not report.optimality_ok():
            bad = [k for k in ("discount", "discounted_return", "income_moments") if not report.flags[k]]
            raise AssumptionViolated(f"conditions {', '.join(bad)} fail; refusing to solve", report)
    grid = grid or default_grid(spec, config)
    data = EulerData(spec, config.quad_nodes)
    a = grid.points
    if c0 is None:
        cT = np.ascontiguousarray(np.broadcast_to(a, (spec.n_states, len(a))))
    else:
        cT = np.ascontiguousarray(np.asarray(c0, dtype=float).T)
    trace = []
    a_bar = None
    gamma = spec.gamma
    for it in range(config.max_iter):
        new, a_bar = _step(data, grid, cT, config.root_tol)
        dist = float(np.abs(new ** (-gamma) - cT ** (-gamma)).max())
        trace.append(dist)
        cT = new
        if dist < config.tol_rho:
            break
    policy = Policy(grid, np.ascontiguousarray(cT.T), a_bar=a_bar, trace=trace, gamma=gamma)
    policy.alpha = np.array([asymptotic_mpc(policy, z) for z in range(spec.n_states)])
    if trace[-1] >= config.tol_rho:
        raise NotConverged(f"no convergence in {config.max_iter} iterations (rho={trace[-1]:.3e})", policy, trace)
    log.debug("time iteration converged in %d iterations", len(trace))
    return policy, trace


def euler_residual(spec, policy, a, z, quad_nodes=11, data=None):
    """``u'(c(a,z)) - max(E_z[...](a - c(a,z)), u'(a))``; zero at the fixed point."""
    data = data or EulerData(spec, quad_nodes)
    c = policy(a, z)
    rhs = np.maximum(data.expectation(policy, np.asarray(a) - c, z), marginal_utility(spec.gamma, a))
    return marginal_utility(spec.gamma, c) - rhs



def binding_threshold(spec, policy, quad_nodes=11):
    """``(u')^{-1}(E_z[beta' R' u'(c(Y', z'))])`` for every state."""
    data = EulerData(spec, quad_nodes)
    e0 = np.array([data.expectation(policy, 0.0, z) for z in range(spec.n_states)])
    return inverse_marginal_utility(spec.gamma, e0)


# --- income dominance ----------------------------------------------------------


def _dominates(hi, lo, z):
    """First-order stochastic dominance of ``hi`` over ``lo`` in state ``z``;
    ``None`` when the laws cannot be compared."""
    if hi.kind == "lognormal" or lo.kind == "lognormal":
        if hi.kind != lo.kind:
            return None
        if not np.isclose(hi.scale[z], lo.scale[z], rtol=0, atol=0):
            return None
        return bool(hi.loc[z] >= lo.loc[z])
    xh, ph = hi.quadrature(z)
    xl, pl = lo.quadrature(z)
    pts = np.union1d(xh, xl)
    cdf_h = np.array([ph[xh <= x].sum() for x in pts])
    cdf_l = np.array([pl[xl <= x].sum() for x in pts])
    return bool(np.all(cdf_h <= cdf_l + 1e-12))


def income_dominance_check(spec_lo, spec_hi, config=None, atol=1e-8):
    """Solve both models on a common grid and test ``c_lo <= c_hi + atol``.

    The two specs must agree in everything except income, and the incomes
    must be comparable state by state (same kind; lognormal laws with equal
    scale).  If ``spec_hi``'s income does not dominate, the comparison is
    still carried out and will normally come back ``False``.
    """
    config = config or SolverConfig()
    same = (
        np.array_equal(spec_lo.transition, spec_hi.transition)
        and spec_lo.gamma == spec_hi.gamma
        and spec_lo.beta.to_json() == spec_hi.beta.to_json()
        and spec_lo.ret.to_json() == spec_hi.ret.to_json()
    )
    if not same:
        raise DominanceUnverifiable("specs differ in more than income")
    verdicts = [_dominates(spec_hi.income, spec_lo.income, z) for z in range(spec_lo.n_states)]
    if any(v is None for v in verdicts):
        raise DominanceUnverifiable("income laws are not comparable state by state")
    if not all(verdicts):
        log.warning("income of spec_hi does not dominate spec_lo; comparison expected to fail")
    grid = default_grid(spec_lo, config)
    p_lo, _ = solve(spec_lo, config, grid=grid)
    p_hi, _ = solve(spec_hi, config, grid=grid)
    return bool(np.all(p_lo.c <= p_hi.c + atol))
