"""(p, q)-loops, periodic orbits and the 4-loop angle function.

A (p, q)-loop starts at a boundary point, bounces q times and comes back to
the same point after winding p times; the outgoing angle need not close
up.  Loops are found by shooting on the starting angle: for twist maps
``theta -> psi_q(theta)`` is increasing, so a sign scan along the fiber
both brackets the solution and certifies its uniqueness on that fiber.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd

import numpy as np
from scipy.optimize import brentq

from . import _kernels
from .billiard import arc_point, chord_partials_psi
from .errors import (BilliardError, ConvergenceFailure, DegenerateFamily, InvalidInput,
                     LoopSweepFailure, MultipleSolutions, NoBracket, ParallelChords)
from .geometry import SupportFunction, boundary_points, s_of_psi

TWO_PI = 2.0 * np.pi
SCAN = np.linspace(0.01, np.pi - 0.01, 64)


@dataclass
class LoopOrbit:
    """A q-bounce orbit segment with unwrapped normal angles.

    ``psi`` and ``theta`` have q+1 entries; ``residual`` is the angle defect
    ``|theta_q - theta_0|`` and ``closure`` the position defect.
    """

    p: int
    q: int
    start_psi: float
    psi: np.ndarray
    theta: np.ndarray
    residual: float
    closure: float
    twist_margin: float
    perimeter: float
    h: SupportFunction = field(repr=False, default=None)

    @property
    def is_periodic(self) -> bool:
        return self.residual < 1e-8

    @property
    def states(self) -> list:
        return [arc_point(self.h, x, t) for x, t in zip(self.psi, self.theta)]

    @property
    def vertices(self) -> np.ndarray:
        return boundary_points(self.h, self.psi)


def _check_pq(p: int, q: int) -> None:
    if q < 2 or not (1 <= p < q) or gcd(p, q) != 1:
        raise InvalidInput(f"need q >= 2, 1 <= p < q and gcd(p, q) = 1, got p={p}, q={q}")


def _bracket(values: np.ndarray, thetas: np.ndarray):
    """Unique sign change of an increasing scan, or the matching error."""
    ok = np.isfinite(values)
    idx = np.flatnonzero(ok[:-1] & ok[1:] & (np.sign(values[:-1]) != np.sign(values[1:])))
    exact = np.flatnonzero(values == 0.0)
    if exact.size:
        return thetas[exact[0]], thetas[exact[0]]
    if idx.size == 0:
        raise NoBracket("no sign change of the loop equation along the fiber")
    if idx.size > 1:
        raise MultipleSolutions(
            f"{idx.size} sign changes along the fiber at theta in "
            f"{np.round(thetas[idx], 4).tolist()}")
    return thetas[idx[0]], thetas[idx[0] + 1]


def _make_loop(h, p, q, psi0, theta0) -> LoopOrbit:
    psi, th, jac, st, k = _kernels.orbit(h._a, h._b, psi0, theta0, q)
    if st != _kernels.OK:
        raise ConvergenceFailure(f"loop orbit failed at bounce {k}")
    M = np.eye(2)
    for J in jac:
        M = J @ M
    rho_q = h(psi[-1]) + h(psi[-1], 2)
    margin = rho_q * M[0, 1] / np.sin(theta0)
    per = float(chord_partials_psi(h, psi[:-1], psi[1:])[0].sum())
    return LoopOrbit(p, q, float(psi0), psi, th, float(abs(th[-1] - th[0])),
                     float(abs(psi[-1] - psi0 - TWO_PI * p)), float(margin), per, h)


def solve_pq_loop(h: SupportFunction, p: int, q: int, start: float = 0.0) -> LoopOrbit:
    """The (p, q)-loop from the boundary point with normal angle ``start``.

    The reported ``twist_margin`` is the derivative of the arclength
    position after q bounces with respect to ``r = -cos(theta_0)``.
    """
    _check_pq(p, q)
    target = TWO_PI * p
    vals = _kernels.loop_scan(h._a, h._b, np.array([float(start)]), SCAN, q)[0] - target
    lo, hi = _bracket(vals, SCAN)
    if lo == hi:
        theta = lo
    else:
        theta, f, _, st = _kernels.loop_newton(h._a, h._b, float(start), lo, hi, target, q)
        if st != _kernels.OK:
            raise ConvergenceFailure("loop Newton iteration failed")
    return _make_loop(h, p, q, start, theta)


def max_perimeter_qgon_oracle(h: SupportFunction, q: int, start: float = 0.0, p: int = 1,
                              restarts: int = 100, seed: int = 0, tol: float = 1e-12,
                              max_sweeps: int = 20000) -> LoopOrbit:
    """Brute-force maximizer of the chain length with both ends at ``start``.

    Coordinate ascent: each free vertex in turn moves to the maximizer
    between its neighbours, located by bisection on the sign of the exact
    one-vertex derivative.  Runs from ``restarts`` random initial chains in
    parallel; the best chain wins.
    Used only as an independent check on the shooting solver.
    """
    if q < 2:
        raise InvalidInput("q must be >= 2")
    rng = np.random.default_rng(seed)
    base = start + TWO_PI * p * np.arange(q + 1) / q
    chain = np.tile(base, (restarts, 1))
    chain[:, 1:-1] += rng.uniform(-0.4, 0.4, (restarts, q - 1)) * (TWO_PI * p / q)
    chain.sort(axis=1)

    def pos(x):
        d = h.derivatives(x)
        c, s = np.cos(x), np.sin(x)
        return d[0] * c - d[1] * s, d[0] * s + d[1] * c

    def slope(k, x):
        d = h.derivatives(x)
        c, s = np.cos(x), np.sin(x)
        px, py = d[0] * c - d[1] * s, d[0] * s + d[1] * c
        rho = d[0] + d[2]
        ax, ay = pos(chain[:, k - 1])
        bx, by = pos(chain[:, k + 1])
        la, lb = np.hypot(px - ax, py - ay), np.hypot(bx - px, by - py)
        ux = (px - ax) / la - (bx - px) / lb
        uy = (py - ay) / la - (by - py) / lb
        return rho * (-s * ux + c * uy)

    def total(ch):
        px, py = pos(ch.ravel())
        px, py = px.reshape(ch.shape), py.reshape(ch.shape)
        return np.hypot(np.diff(px, axis=1), np.diff(py, axis=1)).sum(axis=1)

    for sweep in range(max_sweeps):
        old_chain = chain.copy()
        for k in range(1, q):
            a = chain[:, k - 1].copy()
            b = chain[:, k + 1].copy()
            for _ in range(60):
                m = 0.5 * (a + b)
                up = slope(k, m) > 0
                a = np.where(up, m, a)
                b = np.where(up, b, m)
            chain[:, k] = 0.5 * (a + b)
        per = total(chain)
        if sweep == 20 and chain.shape[0] > 4:
            # keep only the leading restarts; the rest cannot win
            keep = np.argsort(-per)[:4]
            chain, per, old_chain = chain[keep], per[keep], old_chain[keep]
        if np.abs(chain - old_chain).max() < tol:
            break
    best = int(np.argmax(per))
    psi = chain[best]
    # outgoing angles from the chord directions
    pts = boundary_points(h, psi)
    dirs = np.diff(pts, axis=0)
    phi = np.arctan2(-dirs[:, 0], dirs[:, 1])
    theta = np.mod(phi - psi[:-1], TWO_PI)
    theta = np.append(theta, theta[0])
    per_best = float(chord_partials_psi(h, psi[:-1], psi[1:])[0].sum())
    return LoopOrbit(p, q, float(start), psi, theta, np.nan, 0.0, np.nan, per_best, h)


@dataclass
class LoopAngleTable:
    """4-loop data on a uniform grid of starting normal angles."""

    psis: np.ndarray
    d: np.ndarray
    Psi: np.ndarray
    R0: float
    R0_std: float
    mu: np.ndarray
    h: np.ndarray
    twist_margin: np.ndarray

    @property
    def N(self) -> int:
        return self.psis.size

    def d_at(self, x) -> np.ndarray:
        return trig_interp(self.d, x)

    def Psi_at(self, x) -> np.ndarray:
        return np.asarray(x) + trig_interp(self.Psi - self.psis, x)


def trig_interp(values: np.ndarray, x) -> np.ndarray:
    """Trigonometric interpolant of uniform samples over [0, 2 pi) at ``x``."""
    n = values.size
    c = np.fft.fft(values) / n
    k = np.fft.fftfreq(n, 1.0 / n)
    if n % 2 == 0:
        c[n // 2] *= 0.5
        c = np.append(c, c[n // 2])
        k = np.append(k, n // 2)
        k[n // 2] = -n // 2
    x = np.asarray(x, dtype=float)
    return (np.exp(1j * np.multiply.outer(x, k)) @ c).real


def periodic_shift(values: np.ndarray, shift: float) -> np.ndarray:
    """Samples of ``f(psi + shift)`` from samples of ``f`` on a uniform grid."""
    n = values.size
    if (shift * n / TWO_PI) % 1 == 0:
        return np.roll(values, -int(round(shift * n / TWO_PI)))
    return trig_interp(values, TWO_PI * np.arange(n) / n + shift)


def loop_angle_table(h: SupportFunction, N: int = 1024) -> LoopAngleTable:
    """Initial angle ``d`` and first bounce ``Psi`` of the 4-loop at each node.

    Every node gets its own 64-point fiber scan (certifying a unique sign
    change) followed by bracketed Newton, so no node depends on another.
    """
    psis = TWO_PI * np.arange(N) / N
    target = TWO_PI
    vals = _kernels.loop_scan(h._a, h._b, psis, SCAN, 4) - target
    d = np.empty(N)
    Psi = np.empty(N)
    margin = np.empty(N)
    for i, x in enumerate(psis):
        try:
            lo, hi = _bracket(vals[i], SCAN)
            if lo == hi:
                t = lo
            else:
                t, _, _, st = _kernels.loop_newton(h._a, h._b, x, lo, hi, target, 4)
                if st != _kernels.OK:
                    raise ConvergenceFailure("loop Newton iteration failed")
            loop = _make_loop(h, 1, 4, x, t)
        except BilliardError as exc:
            raise LoopSweepFailure(f"4-loop failed at node {i} (psi={x:.6f}): {exc}",
                                   node=i, cause=exc) from exc
        d[i] = t
        Psi[i] = loop.psi[1]
        margin[i] = loop.twist_margin
    hv = h.on_grid(N)
    hq = h(psis + np.pi / 2)
    r = np.sqrt(hv ** 2 + hq ** 2)
    return LoopAngleTable(psis, d, Psi, float(r.mean()), float(r.std()), np.cos(2 * d), hv, margin)


@dataclass
class Theorem41Report:
    D1: float
    D2: float
    D3: float
    D4: float
    D5: float
    R0: float
    R0_std: float
    twist_margin_min: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def theorem41_report(table: LoopAngleTable, h: SupportFunction) -> Theorem41Report:
    """Sup-norm defects of the near-parallelogram identities for the 4-loop."""
    d = table.d
    D1 = np.abs(periodic_shift(d, np.pi) - d).max()
    D2 = np.abs(periodic_shift(d, np.pi / 2) + d - np.pi / 2).max()
    hq = h(table.psis + np.pi / 2)
    D3 = np.abs(table.h ** 2 + hq ** 2 - table.R0 ** 2).max()
    D4 = np.abs(table.h - table.R0 * np.sin(d)).max()
    D5 = np.abs(table.Psi_at(table.Psi) - table.psis - np.pi).max()
    return Theorem41Report(float(D1), float(D2), float(D3), float(D4), float(D5),
                           table.R0, table.R0_std, float(table.twist_margin.min()))


def find_birkhoff_pair(h: SupportFunction, p: int, q: int, n_samples: int = 128):
    """Minimizing and minimax (p, q)-periodic orbits.

    ``M(x)`` is minus the length of the (p, q)-loop through ``x``; its
    critical points are exactly the starts of periodic orbits.  The global
    minimum and maximum of ``M`` give the two orbits.
    """
    _check_pq(p, q)
    xs = TWO_PI * np.arange(n_samples) / n_samples
    loops = [solve_pq_loop(h, p, q, x) for x in xs]
    M = -np.array([lp.perimeter for lp in loops])
    if M.max() - M.min() < 1e-10:
        raise DegenerateFamily(
            f"M_{p},{q} is constant (spread {M.max() - M.min():.2e}): a curve of periodic orbits",
            pair=(loops[0], loops[n_samples // (2 * q) or 1]))

    def defect(x):
        lp = solve_pq_loop(h, p, q, x)
        return lp.theta[-1] - lp.theta[0]

    g = np.array([lp.theta[-1] - lp.theta[0] for lp in loops])
    zero = np.abs(g) < 1e-13
    roots = list(xs[zero])
    for i in range(n_samples):
        j = (i + 1) % n_samples
        if not (zero[i] or zero[j]) and g[i] * g[j] < 0:
            b = xs[j] if j else TWO_PI
            roots.append(brentq(defect, xs[i], b, xtol=1e-15))
    crit = [solve_pq_loop(h, p, q, x) for x in roots]
    vals = np.array([-lp.perimeter for lp in crit])
    return crit[int(np.argmin(vals))], crit[int(np.argmax(vals))]


def caustic_envelope(orbit, order: int | None = None) -> np.ndarray:
    """Envelope of the chord lines of an orbit.

    Chord lines ``x . n(phi) = p`` are sorted by ``phi``, the support
    function ``p(phi)`` of their envelope is fitted by trigonometric least
    squares and the envelope points ``p n + p' t`` are returned at each
    chord.  ``orbit`` is a :class:`LoopOrbit` or a tuple ``(h, psi, theta)``.
    """
    if isinstance(orbit, LoopOrbit):
        h, psi, theta = orbit.h, orbit.psi[:-1], orbit.theta[:-1]
    else:
        h, psi, theta = orbit
        psi, theta = np.asarray(psi)[:-1], np.asarray(theta)[:-1]
    if psi.size < 3:
        raise InvalidInput("need at least three chords")
    phi = psi + theta
    dphi = np.mod(np.diff(phi), np.pi)
    if np.any(np.minimum(dphi, np.pi - dphi) < 1e-9):
        raise ParallelChords("consecutive chords are parallel")
    p = h(psi) * np.cos(theta) + h(psi, 1) * np.sin(theta)
    phi = np.mod(phi, TWO_PI)
    keys = np.round(phi, 12)
    _, uniq = np.unique(keys, return_index=True)
    phi_u, p_u = phi[uniq], p[uniq]
    m = order if order is not None else min(24, (phi_u.size - 1) // 4)
    k = np.arange(1, m + 1)
    A = np.hstack([np.ones((phi_u.size, 1)), np.cos(np.outer(phi_u, k)), np.sin(np.outer(phi_u, k))])
    coef, *_ = np.linalg.lstsq(A, p_u, rcond=None)
    val = A @ coef
    dA = np.hstack([np.zeros((phi_u.size, 1)), -k * np.sin(np.outer(phi_u, k)), k * np.cos(np.outer(phi_u, k))])
    der = dA @ coef
    n = np.stack([np.cos(phi_u), np.sin(phi_u)], -1)
    t = np.stack([-np.sin(phi_u), np.cos(phi_u)], -1)
    return val[:, None] * n + der[:, None] * t


def graph_lipschitz_constant(h: SupportFunction, psi, theta) -> float:
    """Lipschitz constant of an orbit closure viewed as a graph ``theta(s)``.

    Points are sorted by arclength on the circle ``R / |boundary| Z`` and the
    largest slope between cyclic neighbours is returned.
    """
    P = h.perimeter
    s = np.mod(np.asarray(s_of_psi(h, np.asarray(psi, dtype=float))), P)
    order = np.argsort(s)
    s, th = s[order], np.asarray(theta, dtype=float)[order]
    ds = np.diff(np.append(s, s[0] + P))
    dth = np.abs(np.diff(np.append(th, th[0])))
    if np.any(ds <= 0):
        return float("inf")
    return float(np.max(dth / ds))
