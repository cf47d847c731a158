"""Compiled inner loops: trigonometric series evaluation and bounce solves.

Support functions enter as real cosine/sine coefficient arrays ``a, b`` with
``h(x) = a[0] + sum_k a[k] cos(kx) + b[k] sin(kx)``.  All angles are
unwrapped (no reduction mod 2*pi) so lifts come for free.

Status codes returned by the kernels: 0 ok, 1 grazing input, 2 no
convergence, 3 bounce solve left its bracket.
"""

import numpy as np
from numba import njit

GRAZE = 1e-4
OK, GRAZING, NO_CONVERGENCE, BAD_BRACKET = 0, 1, 2, 3


@njit(cache=True)
def series(a, b, x):
    """h, h', h'', h''' at a single angle."""
    c1 = np.cos(x)
    s1 = np.sin(x)
    ck = c1
    sk = s1
    h0 = a[0]
    h1 = 0.0
    h2 = 0.0
    h3 = 0.0
    for k in range(1, a.shape[0]):
        ak = a[k]
        bk = b[k]
        u = ak * ck + bk * sk
        v = bk * ck - ak * sk
        h0 += u
        h1 += k * v
        h2 -= k * k * u
        h3 -= k * k * k * v
        ck, sk = ck * c1 - sk * s1, sk * c1 + ck * s1
    return h0, h1, h2, h3


@njit(cache=True)
def series_many(a, b, x):
    out = np.empty((4, x.shape[0]))
    for i in range(x.shape[0]):
        h0, h1, h2, h3 = series(a, b, x[i])
        out[0, i] = h0
        out[1, i] = h1
        out[2, i] = h2
        out[3, i] = h3
    return out


@njit(cache=True)
def advance(a, b, psi, theta):
    """One bounce in (psi, theta).

    Returns ``psi1, theta1, status`` with ``psi1`` in ``(psi, psi + 2 pi)``.
    """
    if theta < GRAZE or theta > np.pi - GRAZE:
        return psi, theta, GRAZING
    # work on the reduced angle; large unwrapped values cost accuracy
    base = psi - np.mod(psi, 2.0 * np.pi)
    psi = psi - base
    h, hp, _, _ = series(a, b, psi)
    phi = psi + theta
    p = h * np.cos(theta) + hp * np.sin(theta)
    lo = 0.0
    hi = np.pi
    d = theta
    for _ in range(100):
        g, gp, gpp, _ = series(a, b, phi + d)
        cd = np.cos(d)
        sd = np.sin(d)
        f = g * cd - gp * sd - p
        if f > 0.0:
            lo = d
        else:
            hi = d
        df = -(g + gpp) * sd
        if df < 0.0:
            dn = d - f / df
        else:
            dn = 0.5 * (lo + hi)
        if dn <= lo or dn >= hi:
            dn = 0.5 * (lo + hi)
        step = dn - d
        d = dn
        if abs(step) < 1e-15 or hi - lo < 1e-15:
            return base + phi + d, d, OK
    return base + phi + d, d, NO_CONVERGENCE


@njit(cache=True)
def local_jacobian(a, b, psi, theta, psi1, theta1):
    """Derivative of (psi1, theta1) with respect to (psi, theta)."""
    h, hp, hpp, _ = series(a, b, psi)
    g, gp, gpp, _ = series(a, b, psi1)
    rho0 = h + hpp
    rho1 = g + gpp
    s0 = np.sin(theta)
    s1 = np.sin(theta1)
    chord = g * s1 + gp * np.cos(theta1) + h * s0 - hp * np.cos(theta)
    j = np.empty((2, 2))
    j[0, 0] = (chord - rho0 * s0) / (rho1 * s1)
    j[0, 1] = chord / (rho1 * s1)
    j[1, 0] = j[0, 0] - 1.0
    j[1, 1] = j[0, 1] - 1.0
    return j


@njit(cache=True)
def orbit(a, b, psi0, theta0, n):
    """n bounces; returns psi, theta (n+1), local Jacobians (n, 2, 2), status, index."""
    psi = np.empty(n + 1)
    th = np.empty(n + 1)
    jac = np.empty((n, 2, 2))
    psi[0] = psi0
    th[0] = theta0
    for k in range(n):
        p1, t1, st = advance(a, b, psi[k], th[k])
        if st != OK:
            return psi[:k + 1], th[:k + 1], jac[:k], st, k
        psi[k + 1] = p1
        th[k + 1] = t1
        jac[k] = local_jacobian(a, b, psi[k], th[k], p1, t1)
    return psi, th, jac, OK, n


@njit(cache=True)
def shoot(a, b, psi0, theta0, q):
    """psi_q - psi0 after q bounces and d psi_q / d theta0 (NaN on failure)."""
    psi = psi0
    th = theta0
    m00 = 1.0
    m01 = 0.0
    m10 = 0.0
    m11 = 1.0
    for _ in range(q):
        p1, t1, st = advance(a, b, psi, th)
        if st != OK:
            return np.nan, np.nan, np.nan
        j = local_jacobian(a, b, psi, th, p1, t1)
        n00 = j[0, 0] * m00 + j[0, 1] * m10
        n01 = j[0, 0] * m01 + j[0, 1] * m11
        n10 = j[1, 0] * m00 + j[1, 1] * m10
        n11 = j[1, 0] * m01 + j[1, 1] * m11
        m00, m01, m10, m11 = n00, n01, n10, n11
        psi = p1
        th = t1
    return psi - psi0, m01, th


@njit(cache=True)
def loop_scan(a, b, psi0, thetas, q):
    out = np.empty((psi0.shape[0], thetas.shape[0]))
    for i in range(psi0.shape[0]):
        for j in range(thetas.shape[0]):
            out[i, j] = shoot(a, b, psi0[i], thetas[j], q)[0]
    return out


@njit(cache=True)
def loop_newton(a, b, psi0, lo, hi, target, q):
    """Bracketed Newton for psi_q(theta) - psi0 = target on [lo, hi].

    Returns theta, residual, d psi_q / d theta, status.
    """
    t = 0.5 * (lo + hi)
    for _ in range(200):
        f, df, _ = shoot(a, b, psi0, t, q)
        if np.isnan(f):
            return t, np.nan, np.nan, NO_CONVERGENCE
        f -= target
        if f < 0.0:
            lo = t
        else:
            hi = t
        if abs(f) < 1e-13:
            return t, f, df, OK
        tn = t - f / df if df > 0.0 else 0.5 * (lo + hi)
        if tn <= lo or tn >= hi:
            tn = 0.5 * (lo + hi)
        if hi - lo < 1e-16:
            return t, f, df, OK
        t = tn
    return t, np.nan, np.nan, NO_CONVERGENCE


@njit(cache=True)
def minplus(x, y):
    """(min,+) product with argmin table."""
    n = x.shape[0]
    m = y.shape[1]
    out = np.full((n, m), np.inf)
    arg = np.full((n, m), -1, dtype=np.int32)
    for i in range(n):
        for k in range(x.shape[1]):
            xik = x[i, k]
            if xik == np.inf:
                continue
            for j in range(m):
                v = xik + y[k, j]
                if v < out[i, j]:
                    out[i, j] = v
                    arg[i, j] = k
    return out, arg


@njit(cache=True)
def karp(w):
    """Minimum cycle mean of a dense weighted digraph (inf = no edge)."""
    n = w.shape[0]
    d = np.full((n + 1, n), np.inf)
    d[0, :] = 0.0
    for k in range(1, n + 1):
        for u in range(n):
            du = d[k - 1, u]
            if du == np.inf:
                continue
            for v in range(n):
                val = du + w[u, v]
                if val < d[k, v]:
                    d[k, v] = val
    best = np.inf
    for v in range(n):
        if d[n, v] == np.inf:
            continue
        worst = -np.inf
        for k in range(n):
            if d[k, v] < np.inf:
                r = (d[n, v] - d[k, v]) / (n - k)
                if r > worst:
                    worst = r
        if worst < best:
            best = worst
    return best


@njit(cache=True)
def lifted_paths(w, start, steps, span):
    """Shortest paths of exactly ``steps`` edges on the lifted circle.

    Vertices are offsets ``0..span`` above ``start`` (mod N indexing into
    ``w``); every edge advances by 1..N-1 offsets.  Returns the value at
    offset ``span`` and the offsets of the optimal path.
    """
    n = w.shape[0]
    dist = np.full(span + 1, np.inf)
    dist[0] = 0.0
    back = np.full((steps, span + 1), -1, dtype=np.int32)
    for s in range(steps):
        new = np.full(span + 1, np.inf)
        for o in range(span + 1):
            do = dist[o]
            if do == np.inf:
                continue
            row = (start + o) % n
            top = min(span, o + n - 1)
            for o2 in range(o + 1, top + 1):
                val = do + w[row, (start + o2) % n]
                if val < new[o2]:
                    new[o2] = val
                    back[s, o2] = o
        dist = new
    path = np.full(steps + 1, -1, dtype=np.int64)
    if dist[span] == np.inf:
        return np.inf, path
    path[steps] = span
    for s in range(steps - 1, -1, -1):
        path[s] = back[s, path[s + 1]]
    return dist[span], path
