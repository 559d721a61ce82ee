"""Reference computations that share no code with the package.

Each oracle uses a different algorithm from the implementation it checks:
dense eigenvalues instead of power iteration, direct maximization of the
Bellman equation instead of Euler-equation time iteration, closed forms
instead of numerical root finding.
"""

import math

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy import integrate, stats
from scipy.interpolate import CubicSpline


def perron_root(M):
    return float(np.abs(np.linalg.eigvals(np.asarray(M, dtype=float))).max())


def growth_rate_dense(P, cond_means):
    P = np.asarray(P, dtype=float)
    return perron_root(P * np.asarray(cond_means, dtype=float)[None, :])


def stationary_eig(P):
    w, v = np.linalg.eig(np.asarray(P, dtype=float).T)
    x = np.real(v[:, np.argmin(np.abs(w - 1.0))])
    return x / x.sum()


def two_point_kappa(q, g):
    """Root of ``q g**s = 1``."""
    return math.log(1.0 / q) / math.log(g)


def truncated_lognormal_moment(m, v, s):
    """``E[X**s 1{X > 1}]`` for ``log X ~ N(m, v**2)`` by adaptive quadrature."""
    f = lambda y: math.exp(s * y) * stats.norm.pdf(y, m, v)
    val, _ = integrate.quad(f, 0.0, m + 40 * v + 40)
    return val


def _gh(n):
    # physicists' Hermite rule mapped to a standard normal
    x, w = hermgauss(n)
    return math.sqrt(2.0) * x, w / math.sqrt(math.pi)


def _nodes(prim, z, n):
    if prim.kind == "lognormal":
        x, w = _gh(n)
        return np.exp(prim.loc[z] + prim.scale[z] * x), w
    keep = prim.probs[z] > 0
    return prim.points[z][keep], prim.probs[z][keep]


def vfi_policy(spec, grid, tol=1e-9, max_iter=5000, quad=7, golden_iters=60):
    """Value function iteration with golden-section maximization.

    ``V(a, z) = max_{0 < c <= a} u(c) + E_z[beta' V(R'(a - c) + Y', z')]``
    with ``V(., z')`` interpolated by a cubic spline in ``log a`` on ``grid``
    after a CRRA-linearizing transform.  Returns consumption on ``grid``
    (shape ``(len(grid), n_states)``).
    """
    g = np.asarray(grid, dtype=float)
    n, nz = len(g), spec.n_states
    gam = spec.gamma
    u = (lambda c: np.log(c)) if gam == 1.0 else (lambda c: c ** (1 - gam) / (1 - gam))
    # next-state nodes: joint (beta, R, Y) draws given z'
    nodes = []
    for zh in range(nz):
        b, wb = _nodes(spec.beta, zh, quad)
        r, wr = _nodes(spec.ret, zh, quad)
        y, wy = _nodes(spec.income, zh, quad)
        B, Rr, Y = np.meshgrid(b, r, y, indexing="ij")
        W = wb[:, None, None] * wr[None, :, None] * wy[None, None, :]
        nodes.append((B.ravel(), Rr.ravel(), Y.ravel(), W.ravel()))
    P = spec.transition
    V = np.column_stack([u(g)] * nz)
    lg = np.log(g)

    # Splines act on W = ((1 - gamma) V)**(1 / (1 - gamma)), which is close to
    # linear in a for large a (V itself for log utility, close to linear in log a)
    if gam == 1.0:
        fwd, back = (lambda v: v), (lambda w: w)
    else:
        fwd = lambda v: ((1 - gam) * v) ** (1 / (1 - gam))
        back = lambda w: w ** (1 - gam) / (1 - gam)

    def interp(spl, a):
        out = spl(np.log(np.minimum(a, g[-1])))
        hi = a > g[-1]
        d = spl(lg[-1], 1)
        if gam == 1.0:
            out[hi] += d * np.log(a[hi] / g[-1])
        else:
            out[hi] += d / g[-1] * (a[hi] - g[-1])
        return back(out)

    def continuation(splines, s, z):
        tot = np.zeros_like(s)
        for zh in range(nz):
            if P[z, zh] == 0:
                continue
            B, Rr, Y, W = nodes[zh]
            nxt = Rr[None, :] * s[:, None] + Y[None, :]
            vals = interp(splines[zh], nxt.ravel()).reshape(nxt.shape)
            tot += P[z, zh] * (vals * (B * W)[None, :]).sum(axis=1)
        return tot

    c = np.empty((n, nz))
    phi = (math.sqrt(5) - 1) / 2
    for it in range(max_iter):
        splines = [CubicSpline(lg, fwd(V[:, zh])) for zh in range(nz)]
        Vn = np.empty_like(V)
        for z in range(nz):
            f = lambda cc: u(cc) + continuation(splines, g - cc, z)
            lo = 1e-10 * g
            hi = g.copy()
            x1 = hi - phi * (hi - lo)
            x2 = lo + phi * (hi - lo)
            f1, f2 = f(x1), f(x2)
            for _ in range(golden_iters):
                left = f1 >= f2
                # keep [lo, x2] where x1 is better, [x1, hi] otherwise
                hi = np.where(left, x2, hi)
                lo = np.where(left, lo, x1)
                new = np.where(left, hi - phi * (hi - lo), lo + phi * (hi - lo))
                fn = f(new)
                x1, x2, f1, f2 = (np.where(left, new, x2), np.where(left, x1, new),
                                  np.where(left, fn, f2), np.where(left, f1, fn))
            cz = 0.5 * (lo + hi)
            fz, fa = f(cz), f(g)
            # corner: consume everything
            corner = fa >= fz
            c[:, z] = np.where(corner, g, cz)
            Vn[:, z] = np.where(corner, fa, fz)
        diff = np.abs(Vn - V).max()
        V = Vn
        if diff < tol:
            break
    return c
