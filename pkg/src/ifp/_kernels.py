"""Hot loops: policy interpolation, Euler expectations, the time iteration
sweep and wealth simulation.

Each kernel exists twice: a loop version compiled with numba and a
vectorized numpy version.  Both follow the same arithmetic so they agree to
rounding; the public modules pick one through :data:`ifp._accel.USE_NUMBA`.

Policies are passed transposed, ``cT[z, i] = c(grid[i], z)``.
"""

import numpy as np

from . import _rng
from ._accel import njit, prange

DIVERGENCE_CAP = 1e300


# --- interpolation -------------------------------------------------------------


@njit(cache=True, nogil=True)
def interp_policy(grid, cz, slope_top, a):
    """Piecewise-linear policy through the origin, linear beyond the grid top."""
    n = grid.shape[0]
    if a <= grid[0]:
        return cz[0] * (a / grid[0])
    if a >= grid[n - 1]:
        return cz[n - 1] + slope_top * (a - grid[n - 1])
    j = np.searchsorted(grid, a)
    t = (a - grid[j - 1]) / (grid[j] - grid[j - 1])
    return cz[j - 1] + t * (cz[j] - cz[j - 1])


def interp_policy_np(grid, cz, slope_top, a):
    a = np.asarray(a, dtype=float)
    n = grid.shape[0]
    j = np.clip(np.searchsorted(grid, a), 1, n - 1)
    t = (a - grid[j - 1]) / (grid[j] - grid[j - 1])
    out = cz[j - 1] + t * (cz[j] - cz[j - 1])
    out = np.where(a <= grid[0], cz[0] * (a / grid[0]), out)
    return np.where(a >= grid[n - 1], cz[n - 1] + slope_top * (a - grid[n - 1]), out)


def top_slopes(grid, cT):
    return (cT[:, -1] - cT[:, -2]) / (grid[-1] - grid[-2])


# --- Euler expectation ---------------------------------------------------------


@njit(cache=True, nogil=True)
def euler_expectation(x, z, grid, cT, slopes, W, Rn, Yn, gamma):
    """sum_{z', k} W[z, z', k] * u'(c(Rn[z', k] x + Yn[z', k], z'))."""
    nz = W.shape[1]
    K = W.shape[2]
    tot = 0.0
    for zh in range(nz):
        for k in range(K):
            w = W[z, zh, k]
            if w == 0.0:
                continue
            cc = interp_policy(grid, cT[zh], slopes[zh], Rn[zh, k] * x + Yn[zh, k])
            if cc <= 0.0:
                return np.inf
            tot += w * cc ** (-gamma)
    return tot


def euler_expectation_np(x, z, grid, cT, slopes, W, Rn, Yn, gamma):
    """Vectorized over arrays ``x`` and ``z`` of equal shape."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z)
    tot = np.zeros(x.shape)
    for zh in range(W.shape[1]):
        w = W[z, zh, :]
        nxt = Rn[zh][None, :] * x[..., None] + Yn[zh][None, :]
        cc = interp_policy_np(grid, cT[zh], slopes[zh], nxt)
        with np.errstate(divide="ignore", invalid="ignore"):
            mu = np.where(cc > 0.0, cc, 0.0) ** (-gamma)
        term = np.where(w == 0.0, 0.0, w * mu)
        for k in range(term.shape[-1]):
            tot = tot + term[..., k]
    return tot


# --- time iteration ------------------------------------------------------------


@njit(cache=True, parallel=True)
def time_iteration_step(grid, cT, W, Rn, Yn, gamma, root_tol, out, a_bar):
    nz, na = cT.shape
    slopes = (cT[:, na - 1] - cT[:, na - 2]) / (grid[na - 1] - grid[na - 2])
    e0 = np.empty(nz)
    for z in range(nz):
        e0[z] = euler_expectation(0.0, z, grid, cT, slopes, W, Rn, Yn, gamma)
        a_bar[z] = e0[z] ** (-1.0 / gamma) if e0[z] > 0.0 else np.inf
    for idx in prange(nz * na):
        z = idx // na
        i = idx % na
        a = grid[i]
        if a ** (-gamma) >= e0[z]:
            out[z, i] = a
            continue
        lo = a_bar[z]
        hi = a
        tol = root_tol * a
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if mid ** (-gamma) - euler_expectation(a - mid, z, grid, cT, slopes, W, Rn, Yn, gamma) > 0.0:
                lo = mid
            else:
                hi = mid
        out[z, i] = 0.5 * (lo + hi)


def time_iteration_step_np(grid, cT, W, Rn, Yn, gamma, root_tol, out, a_bar):
    nz, na = cT.shape
    slopes = top_slopes(grid, cT)
    zs = np.arange(nz)
    e0 = euler_expectation_np(np.zeros(nz), zs, grid, cT, slopes, W, Rn, Yn, gamma)
    with np.errstate(divide="ignore"):
        a_bar[:] = np.where(e0 > 0.0, e0 ** (-1.0 / gamma), np.inf)
    A = np.broadcast_to(grid, (nz, na))
    Z = np.broadcast_to(zs[:, None], (nz, na))
    binding = A ** (-gamma) >= e0[:, None]
    lo = np.where(binding, A, np.broadcast_to(a_bar[:, None], (nz, na))).astype(float)
    hi = A.astype(float).copy()
    tol = root_tol * A
    active = ~binding & (hi - lo > tol)
    while active.any():
        l, h = lo[active], hi[active]
        mid = 0.5 * (l + h)
        f = mid ** (-gamma) - euler_expectation_np(A[active] - mid, Z[active], grid, cT, slopes, W, Rn, Yn, gamma)
        up = f > 0.0
        lo[active] = np.where(up, mid, l)
        hi[active] = np.where(up, h, mid)
        active = ~binding & (hi - lo > tol)
    out[:] = np.where(binding, A, 0.5 * (lo + hi))


# --- simulation ----------------------------------------------------------------


@njit(cache=True, nogil=True)
def _draw(kind, A, B, z, seed, path, t, tag1, tag2):
    if kind == 0:
        return A[z, 0]
    if kind == 1:
        g = _rng.std_normal(seed, path, t, tag1, tag2)
        return np.exp(A[z, 0] + B[z, 0] * g)
    u = _rng.uniform(seed, path, t, tag1)
    K = A.shape[1]
    for k in range(K):
        if u < B[z, k]:
            return A[z, k]
    return A[z, K - 1]


def _draw_np(kind, A, B, z, seed, paths, t, tag1, tag2):
    if kind == 0:
        return A[z, 0]
    if kind == 1:
        g = _rng.std_normal_np(seed, paths, t, tag1, tag2)
        return np.exp(A[z, 0] + B[z, 0] * g)
    u = _rng.uniform_np(seed, paths, t, tag1)
    idx = np.minimum((B[z] <= u[:, None]).sum(axis=1), A.shape[1] - 1)
    return A[z, idx]


@njit(cache=True, nogil=True)
def _pick(cum_row, u):
    n = cum_row.shape[0]
    for k in range(n):
        if u < cum_row[k]:
            return k
    return n - 1


def _pick_np(cum_rows, u):
    return np.minimum((cum_rows <= u[:, None]).sum(axis=1), cum_rows.shape[1] - 1)


@njit(cache=True, parallel=True)
def simulate_paths(seed, path_offset, P_cum, pi_cum, z0, a0, grid, cT, r_kind, r_a, r_b, y_kind, y_a, y_b,
                   horizon, record, store_shocks, assets, states, r_out, y_out, diverged):
    """Advance ``assets.shape[0]`` paths for ``horizon`` periods.

    With ``record`` the full history is written (``assets`` has
    ``horizon + 1`` columns); otherwise only the terminal column.
    ``z0 < 0`` draws the initial state from ``pi_cum``.
    """
    n_paths = assets.shape[0]
    na = grid.shape[0]
    slopes = (cT[:, na - 1] - cT[:, na - 2]) / (grid[na - 1] - grid[na - 2])
    for p in prange(n_paths):
        path = path_offset + p
        if z0 < 0:
            z = _pick(pi_cum, _rng.uniform(seed, path, 0, _rng.TAG_INIT_STATE))
        else:
            z = z0
        a = a0
        flag = False
        if record:
            assets[p, 0] = a
            states[p, 0] = z
        for t in range(1, horizon + 1):
            if a > 0.0:
                c = interp_policy(grid, cT[z], slopes[z], a)
            else:
                c = 0.0
            s = a - c
            if s < 0.0:
                s = 0.0
            zn = _pick(P_cum[z], _rng.uniform(seed, path, t, _rng.TAG_CHAIN))
            r = _draw(r_kind, r_a, r_b, zn, seed, path, t, _rng.TAG_R1, _rng.TAG_R2)
            y = _draw(y_kind, y_a, y_b, zn, seed, path, t, _rng.TAG_Y1, _rng.TAG_Y2)
            a = r * s + y
            if not a <= DIVERGENCE_CAP:
                a = DIVERGENCE_CAP
                flag = True
            z = zn
            if record:
                assets[p, t] = a
                states[p, t] = z
            if store_shocks:
                r_out[p, t] = r
                y_out[p, t] = y
        if not record:
            assets[p, 0] = a
            states[p, 0] = z
        diverged[p] = flag


def simulate_paths_np(seed, path_offset, P_cum, pi_cum, z0, a0, grid, cT, r_kind, r_a, r_b, y_kind, y_a, y_b,
                      horizon, record, store_shocks, assets, states, r_out, y_out, diverged):
    n_paths = assets.shape[0]
    paths = np.arange(path_offset, path_offset + n_paths, dtype=np.int64)
    slopes = top_slopes(grid, cT)
    if z0 < 0:
        z = _pick_np(np.broadcast_to(pi_cum, (n_paths, len(pi_cum))), _rng.uniform_np(seed, paths, 0, _rng.TAG_INIT_STATE))
    else:
        z = np.full(n_paths, z0, dtype=np.int64)
    a = np.full(n_paths, float(a0))
    flag = np.zeros(n_paths, dtype=bool)
    if record:
        assets[:, 0] = a
        states[:, 0] = z
    for t in range(1, horizon + 1):
        c = np.zeros(n_paths)
        for zz in range(cT.shape[0]):
            sel = (z == zz) & (a > 0.0)
            if sel.any():
                c[sel] = interp_policy_np(grid, cT[zz], slopes[zz], a[sel])
        s = np.maximum(a - c, 0.0)
        zn = _pick_np(P_cum[z], _rng.uniform_np(seed, paths, t, _rng.TAG_CHAIN))
        r = _draw_np(r_kind, r_a, r_b, zn, seed, paths, t, _rng.TAG_R1, _rng.TAG_R2)
        y = _draw_np(y_kind, y_a, y_b, zn, seed, paths, t, _rng.TAG_Y1, _rng.TAG_Y2)
        a = r * s + y
        over = ~(a <= DIVERGENCE_CAP)
        a[over] = DIVERGENCE_CAP
        flag |= over
        z = zn
        if record:
            assets[:, t] = a
            states[:, t] = z
        if store_shocks:
            r_out[:, t] = r
            y_out[:, t] = y
    if not record:
        assets[:, 0] = a
        states[:, 0] = z
    diverged[:] = flag
