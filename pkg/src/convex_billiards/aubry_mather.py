"""Discrete weak-KAM layer for the billiard twist map.

Positions are the nodes ``x_i = i / N`` of the perimeter-normalized
boundary circle.  The one-step action from ``x_i`` to ``x_j`` is
``A_c(i, j) = -l(x_i, x_j) - c * Delta`` where ``Delta = ((j - i) mod N) / N``
is the forward displacement, and chords whose departure or arrival angle
leaves ``theta_band`` are forbidden (``+inf``).  Everything downstream is
(min, +) linear algebra on this matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from math import gcd

import numpy as np

from . import _kernels
from .billiard import rotation_number, arc_point
from .chains import chain_gradient, polish_chain
from .errors import BandEmpty, BilliardError, InvalidInput, NotConverged
from .geometry import SupportFunction, boundary_points, psi_of_s
from .orbits import LoopOrbit, solve_pq_loop

TWO_PI = 2.0 * np.pi
BAND = (0.05, np.pi - 0.05)


@dataclass(frozen=True)
class ActionGrid:
    """Action matrix and its (min, +) powers; never mutated in place."""

    N: int
    c: float
    A1: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)
    theta_band: tuple
    perimeter: float
    n: int = 1
    An: np.ndarray = field(default=None, repr=False)
    powers: dict = field(default_factory=dict, repr=False)
    backptr: dict = field(default_factory=dict, repr=False)

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.N) / self.N


def build_action(h: SupportFunction, c: float = 0.0, N: int = 1024,
                 theta_band: tuple = BAND) -> ActionGrid:
    """One-step action table on ``N`` equally spaced arclength nodes."""
    if N < 128:
        raise InvalidInput("N must be >= 128")
    lo, hi = theta_band
    if not (0.0 < lo < hi < np.pi):
        raise BandEmpty("theta band must satisfy 0 < min < max < pi")
    P = h.perimeter
    psi = np.asarray(psi_of_s(h, np.arange(N) * P / N))
    pts = boundary_points(h, psi)
    dx = pts[None, :, 0] - pts[:, None, 0]
    dy = pts[None, :, 1] - pts[:, None, 1]
    l = np.hypot(dx, dy)
    phi = np.arctan2(-dx, dy)
    th_out = np.mod(phi - psi[:, None], TWO_PI)
    th_in = np.mod(psi[None, :] - phi, TWO_PI)
    idx = np.arange(N)
    delta = np.mod(idx[None, :] - idx[:, None], N) / N
    allowed = (th_out >= lo) & (th_out <= hi) & (th_in >= lo) & (th_in <= hi)
    np.fill_diagonal(allowed, False)
    A = np.where(allowed, -l - c * delta, np.inf)
    if np.any(np.all(~allowed, axis=1)):
        raise BandEmpty("some node has no admissible chord in the theta band")
    A.setflags(write=False)
    return ActionGrid(N, float(c), A, psi, tuple(theta_band), P, 1, A, {1: A}, {})


def iterate_action(grid: ActionGrid, n: int) -> ActionGrid:
    """``A_c^n`` by repeated squaring; all powers ``2^k <= n`` are kept.

    ``backptr[m]`` is the argmin table of the product that formed ``A^m``,
    so optimal paths can be unfolded recursively.
    """
    if n < 1:
        raise InvalidInput("n must be >= 1")
    powers = dict(grid.powers)
    back = dict(grid.backptr)
    m = 1
    while 2 * m <= n:
        if 2 * m not in powers:
            powers[2 * m], back[2 * m] = _kernels.minplus(powers[m], powers[m])
        m *= 2
    acc, acc_n = None, 0
    for bit in sorted((b for b in powers if n & b), reverse=True):
        if acc is None:
            acc, acc_n = powers[bit], bit
        else:
            key = acc_n + bit
            if key not in powers:
                powers[key], back[key] = _kernels.minplus(acc, powers[bit])
            acc, acc_n = powers[key], key
    return replace(grid, n=n, An=powers[n], powers=powers, backptr=back)


def _split(m: int) -> tuple:
    """The two factors whose product formed ``A^m`` in :func:`iterate_action`."""
    if m & (m - 1) == 0:
        return m // 2, m // 2
    low = m & -m
    return m - low, low


def extract_path(grid: ActionGrid, i: int, j: int, m: int | None = None) -> list:
    """Node sequence of an optimal m-step path from ``i`` to ``j``."""
    m = grid.n if m is None else m
    if m == 1:
        return [i, j]
    a, b = _split(m)
    z = int(grid.backptr[m][i, j])
    return extract_path(grid, i, z, a)[:-1] + extract_path(grid, z, j, b)


@dataclass
class AlphaEstimate:
    alpha: float
    alpha_karp: float
    slope_spread: float
    slopes: tuple


def alpha_estimate(grid: ActionGrid, tol: float = 1e-5) -> AlphaEstimate:
    """Mather's ``alpha(c)`` from the growth of ``min_x A_c^n(x, x)``.

    Two-point slopes over ``n = 128, 256, 512`` remove the bounded offset;
    their difference is the convergence diagnostic.  The offset oscillates
    with the length of the optimal cycle, so no extrapolation in ``1/n`` is
    applied; the slope over [256, 512] is the estimate.  The exact minimum cycle
    mean of the finite graph is reported alongside.
    """
    if 512 not in grid.powers:
        raise InvalidInput("iterate the grid to n >= 512 first")
    m = {n: float(np.min(np.diag(grid.powers[n]))) for n in (128, 256, 512)}
    s1 = (m[512] - m[256]) / 256.0
    s2 = (m[256] - m[128]) / 128.0
    est = AlphaEstimate(-s1, -float(_kernels.karp(np.ascontiguousarray(grid.A1))),
                        abs(s1 - s2), (s2, s1))
    if est.slope_spread > tol:
        raise NotConverged(f"slope spread {est.slope_spread:.2e} above {tol:.0e}", result=est)
    return est


def _T(A: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.min(u[:, None] + A, axis=0)


@dataclass
class WeakKAMSolution:
    u: np.ndarray
    c: float
    alpha: float
    residual: float
    period: int
    iterations: int
    converged: bool = True


def lax_oleinik_fixed_point(grid: ActionGrid, u0=None, alpha: float | None = None,
                            tol: float = 1e-9, max_iter: int = 10_000,
                            max_period: int = 64) -> WeakKAMSolution:
    """Fixed point of ``u -> T_c u + alpha`` with ``T_c u(x) = min_y u(y) + A_c(y, x)``.

    Value iteration on a finite graph becomes eventually periodic; when the
    period ``L > 1`` the pointwise minimum over one period is a fixed point.
    If no period up to ``max_period`` shows within ``max_iter`` steps, the
    distance function from a node on a critical cycle is used instead; only
    when that also misses ``tol`` is a Cesaro average returned inside
    :class:`NotConverged`.
    """
    A = grid.A1
    if alpha is None:
        alpha = -float(_kernels.karp(np.ascontiguousarray(A)))
    u = np.zeros(grid.N) if u0 is None else np.asarray(u0, dtype=float).copy()
    hist = [u]
    for it in range(1, max_iter + 1):
        u = _T(A, u) + alpha
        hist.append(u)
        if len(hist) > max_period + 1:
            hist.pop(0)
        for L in range(1, min(max_period, len(hist) - 1) + 1):
            diff = u - hist[-1 - L]
            if diff.max() - diff.min() < tol and abs(diff.mean()) < tol * max(1, L):
                cand = np.min(np.stack(hist[-L:]), axis=0)
                res = float(np.abs(_T(A, cand) + alpha - cand).max())
                return WeakKAMSolution(cand, grid.c, alpha, res, L, it)
    # long critical cycle: distance from one of its nodes is an exact fixed point
    z, L = _critical_node(A, alpha)
    u = _distances_from(A + alpha, z)
    res = float(np.abs(_T(A, u) + alpha - u).max())
    if np.all(np.isfinite(u)) and res < tol:
        return WeakKAMSolution(u, grid.c, alpha, res, L, max_iter)
    avg = np.mean(np.stack(hist), axis=0)
    res = float(np.abs(_T(A, avg) + alpha - avg).max())
    raise NotConverged("Lax-Oleinik iteration did not settle",
                       result=WeakKAMSolution(avg, grid.c, alpha, res, 0, max_iter, False))


def _critical_node(A: np.ndarray, alpha: float) -> tuple:
    """A node on a cycle of mean ``-alpha`` and that cycle's length.

    An optimal walk of ``N`` steps repeats a node; among the closed segments
    it contains, the one with the smallest mean is critical.
    """
    N = A.shape[0]
    D = np.zeros(N)
    preds = np.empty((N, N), dtype=np.int32)
    for k in range(N):
        M = D[:, None] + A
        preds[k] = np.argmin(M, axis=0)
        D = M[preds[k], np.arange(N)]
    walk = [int(np.argmin(D))]
    for k in range(N - 1, -1, -1):
        walk.append(int(preds[k][walk[-1]]))
    walk = walk[::-1]
    best, node, length = np.inf, walk[0], 1
    last = {}
    for j, v in enumerate(walk):
        if v in last:
            i = last[v]
            seg = walk[i:j + 1]
            mean = sum(A[a, b] for a, b in zip(seg[:-1], seg[1:])) / (j - i)
            if mean < best:
                best, node, length = mean, v, j - i
        last[v] = j
    return node, length


def _distances_from(W: np.ndarray, z: int) -> np.ndarray:
    """Bellman-Ford distances from ``z`` for weights without negative cycles."""
    u = np.full(W.shape[0], np.inf)
    u[z] = 0.0
    for _ in range(W.shape[0]):
        new = np.minimum(u, _T(W, u))
        new[z] = 0.0
        if np.array_equal(new, u):
            break
        u = new
    return u


def calibrated_orbit(grid: ActionGrid, sol: WeakKAMSolution, end: int, length: int):
    """Backward-calibrated chain ending at node ``end``.

    Returns node indices and unwrapped normal angles of ``length + 1``
    vertices in forward order.
    """
    nodes = [end]
    for _ in range(length):
        x = nodes[-1]
        nodes.append(int(np.argmin(sol.u + grid.A1[:, x])))
    nodes = nodes[::-1]
    steps = np.mod(np.diff(nodes), grid.N)
    offsets = np.concatenate([[0], np.cumsum(steps)])
    wraps = (nodes[0] + offsets) // grid.N
    psi = grid.psi[nodes] + TWO_PI * wraps
    return np.array(nodes), psi


def rotation_number_c(grid: ActionGrid, sol: WeakKAMSolution, length: int | None = None) -> float:
    """Mean winding per step of a long calibrated chain."""
    length = length or 4 * grid.N
    nodes, _ = calibrated_orbit(grid, sol, 0, length)
    return float(np.mod(np.diff(nodes), grid.N).sum() / (grid.N * length))


def rotation_interval(h: SupportFunction, c: float, N: int = 512, dc: float = 1e-3,
                      theta_band: tuple = BAND) -> tuple:
    """One-sided derivatives ``(alpha'(c-), alpha'(c+))`` from exact cycle means.

    On a rational plateau of ``rho`` both equal the plateau value; at a
    resonance corner they bracket it.  ``h`` should have unit perimeter for
    the slopes to be rotation numbers.
    """
    a = [-float(_kernels.karp(np.ascontiguousarray(build_action(h, c + s, N, theta_band).A1)))
         for s in (-dc, 0.0, dc)]
    return (a[1] - a[0]) / dc, (a[2] - a[1]) / dc


@dataclass
class PeierlsValue:
    value: float
    window_variation: float
    ns: tuple
    values: tuple


WINDOW = (256, 257, 258, 260, 264, 272, 288, 320, 384, 512)


def _window_values(grid: ActionGrid, alpha: float, x, y):
    if 512 not in grid.powers:
        raise InvalidInput("iterate the grid to n >= 512 first")
    A256 = grid.powers[256]
    out = []
    for n in WINDOW:
        if n in (256, 512):
            v = grid.powers[n][x, y]
        else:
            v = np.min(A256[x, :] + grid.powers[n - 256][:, y].T, axis=-1)
        out.append(v + n * alpha)
    return np.array(out)


def peierls_barrier(grid: ActionGrid, x: int, y: int, alpha: float | None = None,
                    tol: float = 1e-6) -> PeierlsValue:
    """Running minimum of ``A_c^n(x, y) + n alpha`` over ``n`` in [256, 512]."""
    if alpha is None:
        alpha = -float(_kernels.karp(np.ascontiguousarray(grid.A1)))
    vals = _window_values(grid, alpha, x, y)
    res = PeierlsValue(float(vals.min()), float(vals.max() - vals.min()), WINDOW, tuple(vals))
    if vals[6:].min() < vals[:6].min() - tol:
        raise NotConverged("barrier still decreasing across the window", result=res)
    return res


def peierls_diagonal(grid: ActionGrid, alpha: float | None = None) -> np.ndarray:
    """``h_c(x, x)`` at every node (same window as :func:`peierls_barrier`)."""
    if alpha is None:
        alpha = -float(_kernels.karp(np.ascontiguousarray(grid.A1)))
    A256 = grid.powers[256]
    rows = []
    for n in WINDOW:
        if n in (256, 512):
            rows.append(np.diag(grid.powers[n]) + n * alpha)
        else:
            rows.append(np.min(A256 + grid.powers[n - 256].T, axis=1) + n * alpha)
    return np.min(np.stack(rows), axis=0)


def closed_loop_minimum(grid: ActionGrid, n: int, winding: int, starts=None):
    """Least action of n-step closed chains winding ``winding`` times.

    Returns the value and the node sequence of the best chain.
    """
    starts = range(grid.N) if starts is None else starts
    best, path = np.inf, None
    A = np.ascontiguousarray(grid.A1)
    for s in starts:
        v, offs = _kernels.lifted_paths(A, int(s), n, winding * grid.N)
        if v < best:
            best, path = v, (int(s) + offs) % grid.N
    return float(best), path


@dataclass
class MinimalActionCurve:
    p: int
    q: int
    x: np.ndarray
    values: np.ndarray
    chains: np.ndarray = field(repr=False)
    dp_values: np.ndarray = field(repr=False)
    residual: float = 0.0

    @property
    def spread(self) -> float:
        return float(self.values.max() - self.values.min())


def minimal_action_curve(h: SupportFunction, p: int, q: int, N: int = 1024,
                         dp_grid: int = 256, theta_band: tuple = BAND) -> MinimalActionCurve:
    """``M_{p,q}(x)``: least action of q-step chains from ``x`` to ``x + p``.

    A grid shortest-path search on ``dp_grid`` nodes locates the optimal
    chain; every one of the ``N`` output nodes then gets a Newton polish of
    its interior vertices with the endpoints held fixed.
    """
    if q < 1 or p < 1 or gcd(p, q) != 1:
        raise InvalidInput(f"need gcd(p, q) = 1, got p={p}, q={q}")
    g = build_action(h, 0.0, dp_grid, theta_band)
    A = np.ascontiguousarray(g.A1)
    dp_vals = np.empty(dp_grid)
    dp_offs = np.empty((dp_grid, q + 1))
    for s in range(dp_grid):
        dp_vals[s], offs = _kernels.lifted_paths(A, s, q, p * dp_grid)
        dp_offs[s] = offs
    if not np.all(np.isfinite(dp_vals)):
        raise BandEmpty(f"no admissible ({p},{q}) chain inside the theta band")
    P = h.perimeter
    x = np.arange(N) / N
    i0 = np.floor(x * dp_grid).astype(int)
    s_chain = (i0[:, None] + dp_offs[i0]) / dp_grid + (x - i0 / dp_grid)[:, None]
    s_chain[:, 0] = x
    s_chain[:, -1] = x + p
    chains = np.asarray(psi_of_s(h, s_chain * P))
    chains, L = polish_chain(h, chains)
    return MinimalActionCurve(p, q, x, -L, chains, dp_vals, stationarity_residual(h, chains))


def stationarity_residual(h: SupportFunction, chain) -> float:
    """Largest derivative of the chain length in an interior vertex."""
    chain = np.atleast_2d(chain)
    if chain.shape[1] < 3:
        return 0.0
    return float(np.abs(chain_gradient(h, chain)[1]).max())


@dataclass
class ConjugateReport:
    first: tuple | None
    min_fiber: float
    kmax: int


def _local_jacobians(h, orbit, kmax):
    if isinstance(orbit, LoopOrbit) and orbit.is_periodic:
        _, _, jac, st, _ = _kernels.orbit(h._a, h._b, orbit.psi[0], orbit.theta[0], orbit.q)
        return [jac[k % orbit.q] for k in range(kmax)]
    if isinstance(orbit, LoopOrbit):
        psi0, th0 = orbit.psi[0], orbit.theta[0]
    else:
        psi0, th0 = orbit
    _, _, jac, st, k = _kernels.orbit(h._a, h._b, float(psi0), float(th0), kmax)
    if st != _kernels.OK:
        raise InvalidInput(f"orbit left the non-grazing region after {k} bounces")
    return list(jac)


def conjugate_point_check(h: SupportFunction, orbit, kmax: int = 50,
                          tol: float = 1e-10) -> ConjugateReport:
    """First pair ``j < k`` where the fiber derivative of ``F^(k-j)`` at ``x_j`` fails.

    ``orbit`` is a :class:`LoopOrbit` (periodic ones are repeated
    cyclically) or a starting ``(psi, theta)``.  Products are rescaled at
    every step; the fiber entry is compared to the product's norm.
    """
    jac = _local_jacobians(h, orbit, kmax)
    worst = np.inf
    for j in range(kmax):
        M = np.eye(2)
        for k in range(j, kmax):
            M = jac[k] @ M
            M /= np.abs(M).max()
            f = M[0, 1]
            worst = min(worst, f)
            if f < tol:
                return ConjugateReport((j, k + 1), float(worst), kmax)
    return ConjugateReport(None, float(worst), kmax)


@dataclass
class FoliationReport:
    q0: int
    consistent: bool
    verdict: str
    spreads: dict
    conjugate: dict
    fiber_theta: list
    fiber_rho: list
    rho_monotone: bool
    rho_max_jump: float
    tol: float
    failures: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def foliation_probe(h: SupportFunction, q0: int = 4, N: int = 64, dp_grid: int = 128,
                    tol: float = 1e-8, n_fiber: int = 16, n_iter: int = 2000,
                    qmax: int = 12) -> FoliationReport:
    """Finite diagnostics for a foliation by rotational invariant curves.

    Covers rotation numbers between the grazing band and ``1/q0``: the
    spread of ``M_{p,q}`` for all ``p/q`` there with ``q <= qmax``,
    conjugate points along the minimizing orbits, and monotonicity of the
    rotation number along the fiber over ``psi = 0``.
    """
    if q0 not in (3, 4, 5):
        raise InvalidInput("q0 must be 3, 4 or 5")
    fracs = sorted({Fraction(p, q) for q in range(2, qmax + 1) for p in range(1, q)
                    if Fraction(p, q) <= Fraction(1, q0)})
    spreads, conj = {}, {}
    failures = {}
    for fr in fracs:
        key = f"{fr.numerator}/{fr.denominator}"
        try:
            curve = minimal_action_curve(h, fr.numerator, fr.denominator, N=N, dp_grid=dp_grid)
            spreads[key] = curve.spread
            chain = curve.chains[int(np.argmin(curve.values))]
            d = np.diff(boundary_points(h, chain[:2]), axis=0)[0]
            theta0 = float(np.mod(np.arctan2(-d[0], d[1]) - chain[0], TWO_PI))
            conj[key] = conjugate_point_check(h, (chain[0], theta0), kmax=3 * fr.denominator).first
        except BilliardError as exc:
            spreads[key], conj[key] = np.inf, None
            failures[key] = f"{type(exc).__name__}: {exc}"
    try:
        top = float(solve_pq_loop(h, 1, q0, 0.0).theta[0])
    except BilliardError as exc:
        top = np.pi / q0
        failures["fiber"] = f"{type(exc).__name__}: {exc}"
    thetas = np.linspace(BAND[0], top, n_fiber)
    rhos = []
    for t in thetas:
        try:
            rhos.append(rotation_number(h, arc_point(h, 0.0, t), n_iter).value)
        except BilliardError as exc:
            rhos.append(np.nan)
            failures[f"rho@{t:.4f}"] = f"{type(exc).__name__}: {exc}"
    jumps = np.diff(rhos)
    monotone = bool(np.all(jumps >= -2.0 / n_iter))  # NaN compares False
    ok_spread = all(v < tol for v in spreads.values())
    ok_conj = all(v is None for v in conj.values())
    consistent = ok_spread and ok_conj and monotone
    verdict = "consistent with C0-integrability" if consistent else "inconsistent with C0-integrability"
    return FoliationReport(q0, consistent, verdict, spreads, conj, thetas.tolist(), rhos,
                           monotone, float(np.max(np.abs(jumps))), tol, failures)


def invariant_curve_c(h: SupportFunction, d_table) -> float:
    """Cohomology ``c`` of the rotational curve carrying the 4-loops.

    ``c = -integral cos(d(psi)) (h + h'')(psi) dpsi``, the mean momentum of
    the curve ``theta = d(psi)`` in perimeter-normalized coordinates.
    """
    N = d_table.N
    rho = h.on_grid(N) + h.on_grid(N, 2)
    return float(-TWO_PI * np.mean(np.cos(d_table.d) * rho))
