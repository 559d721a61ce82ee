"""Simulation of the wealth process under a solved policy.

Wealth evolves as ``a' = R' (a - c(a, z)) + Y'`` with ``c(0, z) = 0``.  Every
random draw comes from the counter-based generator in :mod:`ifp._rng`, keyed
by ``(seed, path, t, variable)``, so a panel is a pure function of the seed
and does not depend on how paths are split across threads.
"""

import io
import json
import math
import warnings
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from scipy import stats

from . import _kernels, _rng
from ._accel import USE_NUMBA, set_threads
from .errors import DegenerateVariance, GridMismatch, InvalidParameter
from .model import compute_growth_report

QUANTILES = (1, 5, 25, 50, 75, 95, 99, 99.9)
JB_CRITICAL_1PCT = float(stats.chi2.ppf(0.99, 2))

# path ids reserved for single long paths, far from any cross-section
LONG_PATH_ID = 1 << 40


@dataclass(frozen=True)
class SimConfig:
    """Panel dimensions, seed and initial condition.

    ``z0`` is a state index or ``"stationary"`` (each path draws its own
    initial state from the stationary distribution).
    """

    n_paths: int
    horizon: int
    burn_in: int = 0
    seed: int = 0
    a0: float = 1.0
    z0: object = "stationary"

    def __post_init__(self):
        if self.n_paths < 1:
            raise InvalidParameter("n_paths must be >= 1")
        if self.horizon < 0 or self.burn_in < 0:
            raise InvalidParameter("horizon and burn_in must be nonnegative")
        if self.horizon > 0 and self.burn_in >= self.horizon:
            raise InvalidParameter("burn_in must be smaller than horizon")
        if not self.a0 >= 0:
            raise InvalidParameter("initial assets must be >= 0")
        if self.z0 != "stationary" and (not isinstance(self.z0, (int, np.integer)) or self.z0 < 0):
            raise InvalidParameter("z0 must be a state index or 'stationary'")

    def to_dict(self):
        d = asdict(self)
        d["z0"] = self.z0 if self.z0 == "stationary" else int(self.z0)
        return d


@dataclass
class WealthPanel:
    """Simulated assets and states.

    With a full record ``assets`` has ``horizon + 1`` columns (column ``t``
    is date ``t``); a terminal-only panel has a single column holding the
    date ``horizon`` cross-section.  ``returns`` and ``income`` hold the
    realized draws (column 0 unused) when shocks were stored.
    """

    assets: np.ndarray
    states: np.ndarray
    config: SimConfig
    diverged: np.ndarray
    returns: np.ndarray = None
    income: np.ndarray = None

    @property
    def full(self):
        return self.assets.shape[1] == self.config.horizon + 1

    def terminal(self):
        return self.assets[:, -1]

    def cross_section_means(self):
        return self.assets.mean(axis=0)

    def summary(self):
        x = self.terminal()
        q = np.percentile(x, QUANTILES)
        return {
            "n_paths": int(self.assets.shape[0]),
            "horizon": int(self.config.horizon),
            "date": int(self.config.horizon),
            "mean": float(x.mean()),
            "std": float(x.std(ddof=1)) if len(x) > 1 else 0.0,
            "min": float(x.min()),
            "max": float(x.max()),
            "quantiles": {f"{p:g}": float(v) for p, v in zip(QUANTILES, q)},
            "diverged_paths": int(self.diverged.sum()),
            "config": self.config.to_dict(),
        }

    def summary_json(self):
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"

    def to_csv(self, full=None):
        """CSV text: ``path,t,state,asset`` rows, or the terminal cross-section
        (``path,state,asset``) when ``full`` is false."""
        full = self.full if full is None else full
        if full and not self.full:
            raise InvalidParameter("panel holds only the terminal cross-section")
        buf = io.StringIO()
        n, m = self.assets.shape
        if full:
            buf.write("path,t,state,asset\n")
            body = np.column_stack([np.repeat(np.arange(n), m), np.tile(np.arange(m), n), self.states.ravel()])
            vals = self.assets.ravel()
        else:
            buf.write("path,state,asset\n")
            body = np.column_stack([np.arange(n), self.states[:, -1]]).astype(np.int64)
            vals = self.terminal()
        lines = [",".join(map(str, r)) + f",{v!r}" for r, v in zip(body.tolist(), vals.tolist())]
        buf.write("\n".join(lines))
        buf.write("\n")
        return buf.getvalue()


def _check_policy(spec, policy):
    if policy.n_states != spec.n_states:
        raise GridMismatch(f"policy has {policy.n_states} states, model has {spec.n_states}")


def _encoded(spec):
    P_cum = np.cumsum(spec.transition, axis=1)
    P_cum[:, -1] = 1.0
    pi_cum = np.cumsum(spec.stationary())
    pi_cum[-1] = 1.0
    r = spec.ret.encode(spec.n_states)
    y = spec.income.encode(spec.n_states)
    return P_cum, pi_cum, r, y


def _run(spec, policy, n_paths, horizon, seed, a0, z0, record, store_shocks, path_offset=0, threads=None):
    _check_policy(spec, policy)
    P_cum, pi_cum, (rk, ra, rb), (yk, ya, yb) = _encoded(spec)
    z0 = -1 if z0 == "stationary" else int(z0)
    if z0 >= spec.n_states:
        raise InvalidParameter(f"z0={z0} out of range")
    cols = horizon + 1 if record else 1
    assets = np.empty((n_paths, cols))
    states = np.empty((n_paths, cols), dtype=np.int32)
    shock_cols = horizon + 1 if store_shocks else 1
    r_out = np.zeros((n_paths, shock_cols))
    y_out = np.zeros((n_paths, shock_cols))
    diverged = np.zeros(n_paths, dtype=np.bool_)
    args = (_rng.seed_to_uint64(seed), np.int64(path_offset), P_cum, pi_cum, np.int64(z0), float(a0),
            policy.grid.points, policy.cT(), rk, ra, rb, yk, ya, yb, np.int64(horizon), record, store_shocks,
            assets, states, r_out, y_out, diverged)
    if USE_NUMBA:
        set_threads(threads)
        _kernels.simulate_paths(*args)
    else:
        _kernels.simulate_paths_np(*args)
    return assets, states, (r_out, y_out) if store_shocks else None, diverged


def simulate(spec, policy, config, record=True, store_shocks=False, threads=None):
    """Simulate ``config.n_paths`` wealth paths.

    Parameters
    ----------
    record : bool
        Keep every date (``horizon + 1`` columns) or only the terminal one.
    store_shocks : bool
        Also keep the realized returns and incomes.
    threads : int, optional
        Worker count for the compiled kernel.  Results do not depend on it.

    Paths that exceed 1e300 are saturated there and flagged in
    ``panel.diverged``.
    """
    if not compute_growth_report(spec).flags["stability"]:
        warnings.warn("stability condition fails: the simulated panel need not settle down", RuntimeWarning)
    assets, states, shocks, diverged = _run(
        spec, policy, config.n_paths, config.horizon, config.seed, config.a0, config.z0, record, store_shocks,
        threads=threads,
    )
    r, y = shocks if shocks is not None else (None, None)
    if diverged.any():
        warnings.warn(f"{int(diverged.sum())} paths hit the divergence cap", RuntimeWarning)
    return WealthPanel(assets, states, config, diverged, r, y)


def simulate_exogenous(spec, n_paths, horizon, seed=0, z0="stationary"):
    """States, returns and incomes without any saving decision.

    Uses the same random streams as :func:`simulate`, so the draws coincide
    with those behind a wealth panel with the same seed (up to the last bit
    of ``exp`` when the panel came from the compiled kernel).

    Returns
    -------
    states : (n_paths, horizon + 1) int array
    returns, income : (n_paths, horizon + 1) arrays, column 0 unused
    """
    P_cum, pi_cum, (rk, ra, rb), (yk, ya, yb) = _encoded(spec)
    s = _rng.seed_to_uint64(seed)
    paths = np.arange(n_paths, dtype=np.int64)
    states = np.empty((n_paths, horizon + 1), dtype=np.int32)
    r = np.zeros((n_paths, horizon + 1))
    y = np.zeros((n_paths, horizon + 1))
    if z0 == "stationary":
        z = _kernels._pick_np(np.broadcast_to(pi_cum, (n_paths, len(pi_cum))),
                              _rng.uniform_np(s, paths, 0, _rng.TAG_INIT_STATE))
    else:
        z = np.full(n_paths, int(z0), dtype=np.int64)
    states[:, 0] = z
    for t in range(1, horizon + 1):
        z = _kernels._pick_np(P_cum[z], _rng.uniform_np(s, paths, t, _rng.TAG_CHAIN))
        states[:, t] = z
        r[:, t] = _kernels._draw_np(rk, ra, rb, z, s, paths, t, _rng.TAG_R1, _rng.TAG_R2)
        y[:, t] = _kernels._draw_np(yk, ya, yb, z, s, paths, t, _rng.TAG_Y1, _rng.TAG_Y2)
    return states, r, y


# --- diagnostics ---------------------------------------------------------------


def _functional(h, reference=None):
    """Resolve a test functional name to a vectorized function of assets.

    ``"a"``, ``"log1p"`` (``log(1 + a)``) or ``"le_q<q>"`` (indicator of
    ``a`` at or below the ``q``-quantile of ``reference``, e.g. ``le_q0.5``).
    Callables pass through.
    """
    if callable(h):
        return h
    if h == "a":
        return lambda a: a
    if h == "log1p":
        return np.log1p
    if isinstance(h, str) and h.startswith("le_q"):
        q = float(h[4:])
        if reference is None:
            raise InvalidParameter("quantile functional needs a reference sample")
        thresh = float(np.quantile(reference, q))
        return lambda a: (a <= thresh).astype(float)
    raise InvalidParameter(f"unknown test functional {h!r}")


def long_path(spec, policy, length, seed=0, burn_in=500, a0=1.0, z0="stationary", threads=None):
    """Assets ``a_{burn_in+1}, ..., a_{burn_in+length}`` along one path."""
    assets, _, _, _ = _run(spec, policy, 1, burn_in + length, seed, a0, z0, True, False,
                           path_offset=LONG_PATH_ID, threads=threads)
    return assets[0, burn_in + 1:]


def _batch_means(x, n_batches):
    b = len(x) // n_batches
    return x[: b * n_batches].reshape(n_batches, b).mean(axis=1), b


class ErgodicityResult(NamedTuple):
    time_avg: float
    cross_avg: float
    rel_gap: float
    se_time: float
    se_cross: float

    @property
    def pooled_se(self):
        return math.hypot(self.se_time, self.se_cross)


def ergodicity_check(spec, policy, h="a", path_length=1_000_000, n_paths=10_000, horizon=2000, burn_in=500,
                     seed=0, threads=None):
    """Compare a long time average of ``h(a_t)`` with a cross-sectional average.

    The time average runs over ``path_length`` dates after ``burn_in`` on a
    single path; the cross-section is ``n_paths`` paths at date ``horizon``.
    Standard errors use batch means (time) and the sample variance (cross).

    Returns
    -------
    ErgodicityResult
        ``(time_avg, cross_avg, rel_gap, se_time, se_cross)``.
    """
    cross, _, _, _ = _run(spec, policy, n_paths, horizon, seed, 1.0, "stationary", False, False, threads=threads)
    cross = cross[:, 0]
    path = long_path(spec, policy, path_length, seed=seed, burn_in=burn_in, threads=threads)
    f = _functional(h, reference=cross)
    hc = f(cross)
    ht = f(path)
    t_avg = float(ht.mean())
    c_avg = float(hc.mean())
    bm, _ = _batch_means(ht, 100)
    se_t = float(bm.std(ddof=1) / math.sqrt(len(bm)))
    se_c = float(hc.std(ddof=1) / math.sqrt(len(hc)))
    gap = abs(t_avg - c_avg) / abs(c_avg) if c_avg != 0 else abs(t_avg - c_avg)
    return ErgodicityResult(t_avg, c_avg, gap, se_t, se_c)


def two_start_distance(spec, policy, a_lo, a_hi, T, z0="stationary", n_paths=10_000, seed=0, coupled=True,
                       threads=None):
    """KS distance between wealth at date ``T`` from two initial asset levels.

    With ``coupled`` (the default) both ensembles use the same random
    streams, so the statistic measures how far the two starts still are
    apart rather than sampling noise.  ``coupled=False`` gives the second
    ensemble its own streams.
    """
    if not a_lo < a_hi:
        raise InvalidParameter("need a_lo < a_hi")
    lo, _, _, _ = _run(spec, policy, n_paths, T, seed, a_lo, z0, False, False, threads=threads)
    off = 0 if coupled else n_paths
    hi, _, _, _ = _run(spec, policy, n_paths, T, seed, a_hi, z0, False, False, path_offset=off, threads=threads)
    return float(stats.ks_2samp(lo[:, 0], hi[:, 0]).statistic)


class CLTResult(NamedTuple):
    gamma_sq: float
    normality_stat: float
    critical_value: float
    batch_size: int

    @property
    def normal(self):
        return self.normality_stat < self.critical_value


def clt_diagnostic(spec, policy, h="log1p", path_length=1_000_000, n_batches=1000, seed=0, burn_in=500,
                   threads=None):
    """Batch-means long-run variance and a Jarque-Bera check on batch means.

    The long-run variance ``gamma_h^2`` is estimated by the batch size times
    the variance of the batch means.  Standardized batch means should look
    Gaussian; the Jarque-Bera statistic is compared with the 1% critical
    value of a chi-square with 2 degrees of freedom (about 9.21).

    Raises
    ------
    DegenerateVariance
        The estimate is not positive, e.g. for constant ``h``.
    """
    if n_batches < 2 or path_length // n_batches < 1000:
        raise InvalidParameter("need at least 2 batches of at least 1000 observations")
    path = long_path(spec, policy, path_length, seed=seed, burn_in=burn_in, threads=threads)
    hv = np.asarray(_functional(h, reference=path)(path), dtype=float)
    if np.ptp(hv) == 0:
        raise DegenerateVariance("test functional is constant along the path")
    bm, b = _batch_means(hv, n_batches)
    g2 = float(b * bm.var(ddof=1))
    if not g2 > 0:
        raise DegenerateVariance("batch-means variance estimate is not positive")
    jb = float(stats.jarque_bera(bm).statistic)
    return CLTResult(g2, jb, JB_CRITICAL_1PCT, b)
