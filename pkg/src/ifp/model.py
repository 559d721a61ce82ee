"""Model primitives, CRRA marginal utility, and the growth-condition report.

Discount factors, returns and income are each a :class:`PrimitiveSpec`
giving the conditional law of the variable *given the current exogenous
state*.  Innovations for the three variables are independent conditional on
the state, so all correlation between them runs through the shared chain.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import ndtr

from . import markov
from .errors import DomainError, InvalidParameter, UndefinedMoment

KINDS = ("constant", "lognormal", "discrete")
PROB_TOL = 1e-12

KIND_CONSTANT = 0
KIND_LOGNORMAL = 1
KIND_DISCRETE = 2


def _per_state(x, name):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise InvalidParameter(f"{name} must be a scalar or a per-state vector")
    return x


def _ragged(points, probs):
    # iid form: flat lists; per-state form: lists of lists
    if np.ndim(points) == 0:
        raise InvalidParameter("discrete points must be a list")
    if len(points) and np.ndim(points[0]) == 0:
        points, probs = [points], [probs]
    if len(points) != len(probs):
        raise InvalidParameter("discrete points and probs disagree in length")
    k = max(len(p) for p in points)
    n = len(points)
    pts = np.zeros((n, k))
    prb = np.zeros((n, k))
    for i, (x, p) in enumerate(zip(points, probs)):
        if len(x) != len(p) or len(x) == 0:
            raise InvalidParameter(f"state {i}: points and probs must be non-empty and equal length")
        pts[i, : len(x)] = x
        pts[i, len(x):] = x[-1]
        prb[i, : len(p)] = p
    return pts, prb


@dataclass(frozen=True)
class PrimitiveSpec:
    """Conditional law of one primitive (discount factor, return or income).

    Parameter arrays have a leading axis of length one ("same law in every
    state") or ``n_states``.  Use :func:`constant`, :func:`lognormal` and
    :func:`discrete` to build instances.
    """

    kind: str
    points: np.ndarray = None
    probs: np.ndarray = None
    loc: np.ndarray = None
    scale: np.ndarray = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameter(f"unknown primitive kind {self.kind!r}")
        if self.kind == "lognormal":
            if self.loc.shape != self.scale.shape:
                raise InvalidParameter("lognormal loc and scale must have equal length")
            if not np.all(self.scale > 0):
                raise InvalidParameter("lognormal scale must be positive")
            if not np.all(np.isfinite(self.loc)):
                raise InvalidParameter("lognormal loc must be finite")
        else:
            if not np.all(np.isfinite(self.points)) or self.points.min() < 0:
                raise InvalidParameter(f"{self.kind} support points must be finite and nonnegative")
            if self.probs.min() < 0:
                raise InvalidParameter("probabilities must be nonnegative")
            dev = np.abs(self.probs.sum(axis=1) - 1.0).max()
            if dev > PROB_TOL:
                raise InvalidParameter(f"probabilities must sum to 1 per state (deviation {dev:.2e})")

    # --- shape handling ---------------------------------------------------

    @property
    def n_states(self):
        return len(self.loc) if self.kind == "lognormal" else self.points.shape[0]

    def for_states(self, n):
        """Broadcast a state-independent spec to ``n`` states."""
        if self.n_states == n:
            return self
        if self.n_states != 1:
            raise InvalidParameter(f"primitive has {self.n_states} states, chain has {n}")
        if self.kind == "lognormal":
            return PrimitiveSpec("lognormal", loc=np.repeat(self.loc, n), scale=np.repeat(self.scale, n))
        return PrimitiveSpec(self.kind, points=np.repeat(self.points, n, axis=0), probs=np.repeat(self.probs, n, axis=0))

    def _row(self, z):
        return 0 if self.n_states == 1 else int(z)

    # --- moments ----------------------------------------------------------

    def moment(self, z, s):
        """``E[X**s | state z]``; see :func:`conditional_power_moment`."""
        i = self._row(z)
        if self.kind == "lognormal":
            m, v = self.loc[i], self.scale[i]
            return float(math.exp(s * m + 0.5 * s * s * v * v))
        x, p = self.points[i], self.probs[i]
        live = p > 0
        x, p = x[live], p[live]
        if s == 0:
            return float(p.sum())
        zero = x == 0
        if s < 0 and zero.any():
            raise UndefinedMoment(f"E[X^{s}] is infinite: support contains 0 with positive probability")
        out = np.zeros_like(x)
        out[~zero] = x[~zero] ** s
        return float(np.dot(p, out))

    def mean(self, z):
        return self.moment(z, 1.0)

    def means(self):
        return np.array([self.mean(z) for z in range(self.n_states)])

    def moment_zero_convention(self, z, s):
        """``E[X * X**(s-1)]`` with ``0 * inf = 0``: zero atoms contribute nothing."""
        i = self._row(z)
        if self.kind == "lognormal":
            return self.moment(z, s)
        x, p = self.points[i], self.probs[i]
        keep = (p > 0) & (x > 0)
        return float(np.dot(p[keep], x[keep] ** s))

    # --- support ----------------------------------------------------------

    def support_min(self, z):
        i = self._row(z)
        if self.kind == "lognormal":
            return 0.0
        return float(self.points[i][self.probs[i] > 0].min())

    def prob_at(self, z, value):
        i = self._row(z)
        if self.kind == "lognormal":
            return 0.0
        return float(self.probs[i][self.points[i] == value].sum())

    def prob_greater(self, z, threshold, factor=1.0):
        """``P(factor * X > threshold | z)``."""
        i = self._row(z)
        if factor <= 0:
            return 0.0 if threshold >= 0 else 1.0
        if self.kind == "lognormal":
            if threshold <= 0:
                return 1.0
            t = (math.log(threshold / factor) - self.loc[i]) / self.scale[i]
            return float(ndtr(-t))
        return float(self.probs[i][factor * self.points[i] > threshold].sum())

    def finite_support(self):
        return self.kind != "lognormal"

    # --- integration and sampling ----------------------------------------

    def quadrature(self, z, n_nodes=11):
        """Nodes and weights integrating functions of ``X`` given state ``z``.

        Exact for constant and discrete kinds; Gauss-Hermite of order
        ``n_nodes`` in the underlying normal for the lognormal kind.
        """
        i = self._row(z)
        if self.kind == "lognormal":
            x, w = hermegauss(n_nodes)
            return np.exp(self.loc[i] + self.scale[i] * x), w / math.sqrt(2.0 * math.pi)
        live = self.probs[i] > 0
        return self.points[i][live].copy(), self.probs[i][live].copy()

    def sample(self, states, u1, u2):
        """Draws given states and two independent uniform arrays.

        Lognormal draws use Box-Muller on ``(u1, u2)``; discrete draws invert
        the CDF at ``u1``.
        """
        states = np.asarray(states)
        rows = states if self.n_states > 1 else np.zeros_like(states)
        if self.kind == "lognormal":
            g = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
            return np.exp(self.loc[rows] + self.scale[rows] * g)
        cum = np.cumsum(self.probs, axis=1)
        idx = (cum[rows] <= np.asarray(u1)[..., None]).sum(axis=-1)
        idx = np.minimum(idx, self.points.shape[1] - 1)
        return self.points[rows, idx]

    def encode(self, n):
        """Dense kernel encoding ``(kind_code, A, B)`` with ``A, B`` of shape (n, K).

        constant: ``A[:, 0]`` value; lognormal: ``A[:, 0]`` loc, ``B[:, 0]``
        scale; discrete: ``A`` points, ``B`` cumulative probabilities.
        """
        p = self.for_states(n)
        if p.kind == "lognormal":
            return KIND_LOGNORMAL, p.loc[:, None].copy(), p.scale[:, None].copy()
        cum = np.cumsum(p.probs, axis=1)
        cum[:, -1] = 1.0
        code = KIND_CONSTANT if p.kind == "constant" else KIND_DISCRETE
        return code, np.ascontiguousarray(p.points), cum

    # --- serialization ----------------------------------------------------

    def to_json(self):
        if self.kind == "lognormal":
            return {"kind": "lognormal", "loc": self.loc.tolist(), "scale": self.scale.tolist()}
        if self.kind == "constant":
            return {"kind": "constant", "value": self.points[:, 0].tolist()}
        pts, prb = [], []
        for x, p in zip(self.points, self.probs):
            k = int(np.max(np.nonzero(p)[0], initial=0)) + 1
            pts.append(x[:k].tolist())
            prb.append(p[:k].tolist())
        return {"kind": "discrete", "points": pts, "probs": prb}

    @classmethod
    def from_json(cls, d):
        kind = d.get("kind")
        if kind == "constant":
            return constant(d["value"])
        if kind == "lognormal":
            return lognormal(d["loc"], d["scale"])
        if kind == "discrete":
            return discrete(d["points"], d["probs"])
        raise InvalidParameter(f"unknown primitive kind {kind!r}")


def constant(value):
    v = _per_state(value, "value")
    return PrimitiveSpec("constant", points=v[:, None], probs=np.ones((len(v), 1)))


def lognormal(loc, scale):
    loc, scale = _per_state(loc, "loc"), _per_state(scale, "scale")
    if len(loc) != len(scale):
        if len(loc) == 1:
            loc = np.repeat(loc, len(scale))
        elif len(scale) == 1:
            scale = np.repeat(scale, len(loc))
    return PrimitiveSpec("lognormal", loc=loc, scale=scale)


def discrete(points, probs):
    pts, prb = _ragged(points, probs)
    return PrimitiveSpec("discrete", points=pts, probs=prb)


def conditional_power_moment(p, z, s):
    """``E_z[X**s]`` for a primitive ``p``.

    Zero support points follow ``0**s = 0`` for ``s > 0`` and ``0**0 = 1``;
    a zero atom with ``s < 0`` raises :class:`UndefinedMoment`.

    >>> conditional_power_moment(discrete([2.0, 0.5], [0.5, 0.5]), 0, -0.5)
    1.0606601717798212
    """
    return p.moment(z, s)


# --- utility -----------------------------------------------------------------


def marginal_utility(gamma, c):
    c = np.asarray(c, dtype=float)
    if np.any(c <= 0):
        raise DomainError("marginal utility needs strictly positive consumption")
    out = c ** (-gamma)
    return float(out) if out.ndim == 0 else out


def inverse_marginal_utility(gamma, m):
    m = np.asarray(m, dtype=float)
    if np.any(m <= 0):
        raise DomainError("inverse marginal utility needs a strictly positive argument")
    out = m ** (-1.0 / gamma)
    return float(out) if out.ndim == 0 else out


def utility(gamma, c):
    c = np.asarray(c, dtype=float)
    if gamma == 1.0:
        return np.log(c)
    return c ** (1.0 - gamma) / (1.0 - gamma)


# --- model spec --------------------------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    transition: np.ndarray
    beta: PrimitiveSpec
    ret: PrimitiveSpec
    income: PrimitiveSpec
    gamma: float
    states: list = None

    def __post_init__(self):
        P = markov.as_transition_matrix(self.transition)
        if not markov.is_irreducible(P):
            raise markov.NotIrreducible("exogenous chain must be irreducible")
        n = P.shape[0]
        object.__setattr__(self, "transition", P)
        for name in ("beta", "ret", "income"):
            object.__setattr__(self, name, getattr(self, name).for_states(n))
        if not self.gamma > 0:
            raise InvalidParameter("gamma must be positive")
        object.__setattr__(self, "gamma", float(self.gamma))
        labels = list(range(n)) if self.states is None else list(self.states)
        if len(labels) != n:
            raise InvalidParameter("one state label per chain state required")
        object.__setattr__(self, "states", labels)
        if all(self.income.prob_greater(z, 0.0) == 0.0 for z in range(n)):
            raise InvalidParameter("income is identically zero in every state")

    @property
    def n_states(self):
        return self.transition.shape[0]

    def stationary(self):
        return markov.stationary_distribution(self.transition)

    def median_income(self):
        """Median of the stationary marginal law of income (quadrature-based)."""
        pi = self.stationary()
        xs, ws = [], []
        for z in range(self.n_states):
            x, w = self.income.quadrature(z, 41)
            xs.append(x)
            ws.append(pi[z] * w / w.sum())
        x, w = np.concatenate(xs), np.concatenate(ws)
        order = np.argsort(x)
        cw = np.cumsum(w[order])
        return float(x[order][np.searchsorted(cw, 0.5 * cw[-1])])

    def replace(self, **kw):
        d = dict(transition=self.transition, beta=self.beta, ret=self.ret, income=self.income,
                 gamma=self.gamma, states=self.states)
        d.update(kw)
        return ModelSpec(**d)

    def to_json(self):
        return {
            "states": [s if isinstance(s, (int, str)) else float(s) for s in self.states],
            "transition": self.transition.tolist(),
            "beta": self.beta.to_json(),
            "ret": self.ret.to_json(),
            "income": self.income.to_json(),
            "gamma": self.gamma,
        }

    @classmethod
    def from_json(cls, d):
        missing = [k for k in ("transition", "beta", "ret", "income", "gamma") if k not in d]
        if missing:
            raise InvalidParameter(f"model is missing fields: {', '.join(missing)}")
        return cls(
            transition=np.array(d["transition"], dtype=float),
            beta=PrimitiveSpec.from_json(d["beta"]),
            ret=PrimitiveSpec.from_json(d["ret"]),
            income=PrimitiveSpec.from_json(d["income"]),
            gamma=float(d["gamma"]),
            states=d.get("states"),
        )


# --- growth report -----------------------------------------------------------


@dataclass
class GrowthReport:
    g_beta: float
    g_beta_r: float
    g_r: float
    s_bar: float
    e_y: float
    e_uprime_y: float
    flags: dict = field(default_factory=dict)

    @property
    def stable(self):
        """``max(G_betaR, s_bar, s_bar * G_R) < 1``."""
        return max(self.g_beta_r, self.s_bar, self.s_bar * self.g_r) < 1.0

    def optimality_ok(self):
        return all(self.flags[k] for k in ("discount", "discounted_return", "income_moments"))

    def to_dict(self):
        return {
            "G_beta": self.g_beta,
            "G_betaR": self.g_beta_r,
            "G_R": self.g_r,
            "s_bar": self.s_bar,
            "s_bar_G_R": self.s_bar * self.g_r,
            "E_Y": self.e_y,
            "E_uprime_Y": self.e_uprime_y,
            "stable": self.stable,
            "flags": dict(self.flags),
        }


def s_bar(spec):
    """``(max_z sum_z' P(z,z') E[beta|z'] E[R**(1-gamma)|z'])**(1/gamma)``."""
    n = spec.n_states
    eb = spec.beta.means()
    mr = np.array([spec.ret.moment_zero_convention(z, 1.0 - spec.gamma) for z in range(n)])
    per_state = spec.transition @ (eb * mr)
    return float(per_state.max() ** (1.0 / spec.gamma))


def _mixing_condition(spec):
    P = spec.transition
    n = spec.n_states
    persistent = [z for z in range(n) if P[z, z] > 0]
    if not persistent:
        return False
    inc = spec.income
    if inc.kind == "lognormal":
        return True
    y_low = min(inc.support_min(z) for z in range(n))
    return any(inc.prob_at(z, y_low) > 0 for z in persistent)


def compute_growth_report(spec):
    """Growth rates, savings bound, income moments and assumption flags.

    All flags but ``wealth_growth`` are set here; that one needs the asymptotic
    marginal propensity to consume and stays ``None`` until a policy exists
    (see :func:`ifp.tail.check_wealth_growth`).
    """
    P = spec.transition
    eb = spec.beta.means()
    er = spec.ret.means()
    g_beta, _ = markov.growth_rate(P, eb)
    g_beta_r, _ = markov.growth_rate(P, eb * er)
    g_r, _ = markov.growth_rate(P, er)
    sb = s_bar(spec)
    pi = spec.stationary()
    e_y = float(np.dot(pi, spec.income.means()))
    try:
        e_up = float(np.dot(pi, [spec.income.moment(z, -spec.gamma) for z in range(spec.n_states)]))
    except UndefinedMoment:
        e_up = math.inf
    flags = {
        "discount": bool(g_beta < 1.0),
        "discounted_return": bool(g_beta_r < 1.0),
        "income_moments": bool(math.isfinite(e_y) and math.isfinite(e_up)),
        "stability": bool(sb < 1.0 and sb * g_r < 1.0),
        "mixing": bool(_mixing_condition(spec)),
        "wealth_growth": None,
    }
    return GrowthReport(g_beta, g_beta_r, g_r, sb, e_y, e_up, flags)
