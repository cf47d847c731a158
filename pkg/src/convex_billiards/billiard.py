"""Billiard map in arclength-angle and support-line coordinates.

Two charts describe the same state:

* ``ArcAngle``: ``(s, theta)``, bounce point by arclength and the outgoing
  angle measured from the counterclockwise tangent, ``0 < theta < pi``.
* ``SupportBM``: ``(phi, p)``, the outgoing chord as an oriented line with
  normal angle ``phi`` and signed distance ``p`` from the origin.  The line
  direction is ``(-sin phi, cos phi)``.

The map in the second chart is generated by
``S(phi, phi') = 2 h((phi + phi')/2) sin((phi' - phi)/2)`` through
``p = -S_1``, ``p' = S_2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from . import _kernels
from .errors import (ConvergenceFailure, CoincidentPoints, GrazingState, InvalidInput,
                     OutOfRange)
from .geometry import SupportFunction, boundary_points, psi_of_s, s_of_psi

ARC = "ArcAngle"
BM = "SupportBM"
GRAZE = _kernels.GRAZE
TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class PhasePoint:
    """Billiard state in one chart, with an integer winding count."""

    chart: str
    u: float
    v: float
    lift: int = 0

    def __post_init__(self):
        if self.chart not in (ARC, BM):
            raise InvalidInput(f"unknown chart {self.chart!r}")


@dataclass(frozen=True)
class GeneratingFunctionValue:
    value: float
    d1: float
    d2: float
    d11: float
    d12: float
    d22: float


class RotationEstimate(NamedTuple):
    value: float
    error: float


def _check_angle(theta: float) -> None:
    if not (GRAZE <= theta <= np.pi - GRAZE):
        raise GrazingState(f"grazing state rejected (theta={theta:.3e})")


def _wrap(x: float, period: float):
    w = int(np.floor(x / period))
    return x - w * period, w


# chart conversions ----------------------------------------------------------

def arc_point(h: SupportFunction, psi: float, theta: float) -> PhasePoint:
    """ArcAngle state from an unwrapped normal angle."""
    r, w = _wrap(psi, TWO_PI)
    s = float(s_of_psi(h, r))
    s_r, w2 = _wrap(s, h.perimeter)
    return PhasePoint(ARC, s_r, float(theta), w + w2)


def to_psi_theta(h: SupportFunction, x: PhasePoint):
    """Unwrapped bounce normal angle and outgoing angle of a state."""
    if x.chart == ARC:
        return float(psi_of_s(h, x.u)) + TWO_PI * x.lift, x.v
    phi = x.u + TWO_PI * x.lift

    def g(d):
        hv, hp = h(phi - d), h(phi - d, 1)
        return hv * np.cos(d) + hp * np.sin(d) - x.v

    if g(0.0) < 0 or g(np.pi) > 0:
        raise OutOfRange("line does not meet the boundary")
    d = brentq(g, 0.0, np.pi, xtol=1e-15)
    return phi - d, d


def to_arc(h: SupportFunction, x: PhasePoint) -> PhasePoint:
    if x.chart == ARC:
        return x
    psi, th = to_psi_theta(h, x)
    return arc_point(h, psi, th)


def to_bm(h: SupportFunction, x: PhasePoint) -> PhasePoint:
    if x.chart == BM:
        return x
    psi, th = to_psi_theta(h, x)
    phi = psi + th
    p = h(psi) * np.cos(th) + h(psi, 1) * np.sin(th)
    r, w = _wrap(phi, TWO_PI)
    return PhasePoint(BM, r, float(p), w)


# generating functions ---------------------------------------------------------

def chord_partials_psi(h: SupportFunction, psi1, psi2):
    """Chord length and its partials with respect to the normal angles.

    Returns ``l, l_1, l_2, l_11, l_12, l_22`` (arrays broadcast from inputs).
    """
    psi1 = np.asarray(psi1, dtype=float)
    psi2 = np.asarray(psi2, dtype=float)
    shape = np.broadcast(psi1, psi2).shape
    x1 = np.broadcast_to(psi1, shape).ravel()
    x2 = np.broadcast_to(psi2, shape).ravel()
    out = []
    pts = []
    for x in (x1, x2):
        d = h.derivatives(x)
        rho, drho = d[0] + d[2], d[1] + d[3]
        n = np.stack([np.cos(x), np.sin(x)], -1)
        t = np.stack([-np.sin(x), np.cos(x)], -1)
        pos = d[0][:, None] * n + d[1][:, None] * t
        g1 = rho[:, None] * t
        g2 = drho[:, None] * t - rho[:, None] * n
        pts.append((pos, g1, g2))
    (p1, a1, b1), (p2, a2, b2) = pts
    diff = p2 - p1
    l = np.linalg.norm(diff, axis=-1)
    if np.any(l == 0):
        raise CoincidentPoints("chord endpoints coincide")
    u = diff / l[:, None]
    ua1 = (u * a1).sum(-1)
    ua2 = (u * a2).sum(-1)
    l1 = -ua1
    l2 = ua2
    l11 = ((a1 * a1).sum(-1) - ua1 ** 2) / l - (u * b1).sum(-1)
    l22 = ((a2 * a2).sum(-1) - ua2 ** 2) / l + (u * b2).sum(-1)
    l12 = -((a1 * a2).sum(-1) - ua1 * ua2) / l
    out = [v.reshape(shape) for v in (l, l1, l2, l11, l12, l22)]
    return tuple(out)


def chord_length(h: SupportFunction, s1: float, s2: float) -> GeneratingFunctionValue:
    """Chord length ``l(s1, s2)`` with arclength partials.

    ``d1 = -cos(theta_1)`` and ``d2 = cos(theta_2)``; the mixed partial
    ``sin(theta_1) sin(theta_2) / l`` is positive, so the action ``H = -l``
    has a negative mixed partial.
    """
    P = h.perimeter
    if abs(np.remainder(s2 - s1 + 0.5 * P, P) - 0.5 * P) < 1e-14 * P:
        raise CoincidentPoints("s1 and s2 coincide modulo the perimeter")
    x1, x2 = psi_of_s(h, s1), psi_of_s(h, s2)
    l, l1, l2, l11, l12, l22 = chord_partials_psi(h, x1, x2)
    r1 = h(x1) + h(x1, 2)
    r2 = h(x2) + h(x2, 2)
    dr1 = (h(x1, 1) + h(x1, 3)) / r1 ** 3
    dr2 = (h(x2, 1) + h(x2, 3)) / r2 ** 3
    # chain rule psi(s): dpsi/ds = 1/rho, d2psi/ds2 = -rho'/rho^3
    return GeneratingFunctionValue(
        float(l), float(l1 / r1), float(l2 / r2),
        float(l11 / r1 ** 2 - l1 * dr1), float(l12 / (r1 * r2)),
        float(l22 / r2 ** 2 - l2 * dr2))


def bm_generating(h: SupportFunction, phi1: float, phi2: float) -> GeneratingFunctionValue:
    """Support-line generating function and its partials."""
    if not (0.0 < phi2 - phi1 < TWO_PI):
        raise InvalidInput("need 0 < phi2 - phi1 < 2 pi")
    psi = 0.5 * (phi1 + phi2)
    d = 0.5 * (phi2 - phi1)
    hv, hp, hpp = h(psi), h(psi, 1), h(psi, 2)
    c, s = np.cos(d), np.sin(d)
    return GeneratingFunctionValue(
        2.0 * hv * s,
        hp * s - hv * c,
        hv * c + hp * s,
        0.5 * ((hpp - hv) * s - 2.0 * hp * c),
        0.5 * (hv + hpp) * s,
        0.5 * ((hpp - hv) * s + 2.0 * hp * c))


# the map -----------------------------------------------------------------------

def step_geometric(h: SupportFunction, x: PhasePoint) -> PhasePoint:
    """Shoot the chord in the plane, intersect with the boundary, reflect."""
    if x.chart != ARC:
        raise InvalidInput("step_geometric expects an ArcAngle state")
    _check_angle(x.v)
    psi0 = float(psi_of_s(h, x.u)) + TWO_PI * x.lift
    P0 = boundary_points(h, psi0)[0]
    phi = psi0 + x.v
    direction = np.array([-np.sin(phi), np.cos(phi)])
    normal = np.array([np.cos(phi), np.sin(phi)])

    def g(off):
        return float(normal @ (boundary_points(h, phi + off)[0] - P0))

    try:
        psi1 = phi + brentq(g, 0.0, np.pi, xtol=1e-15, maxiter=50)
    except RuntimeError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    N1 = np.array([np.cos(psi1), np.sin(psi1)])
    T1 = np.array([-np.sin(psi1), np.cos(psi1)])
    out = direction - 2.0 * (direction @ N1) * N1
    theta1 = float(np.arctan2(-(out @ N1), out @ T1))
    return arc_point(h, psi1, theta1)


def _bm_solve(h: SupportFunction, phi: float, p: float) -> float:
    lo, hi = GRAZE, np.pi - GRAZE

    def g(d):
        return h(phi + d) * np.cos(d) - h(phi + d, 1) * np.sin(d) - p

    if g(lo) < 0.0 or g(hi) > 0.0:
        raise OutOfRange(f"no next bounce for p={p:.6g} inside the non-grazing bracket")
    d = 0.5 * (lo + hi)
    for _ in range(50):
        f = g(d)
        if f > 0:
            lo = d
        else:
            hi = d
        df = -(h(phi + d) + h(phi + d, 2)) * np.sin(d)
        dn = d - f / df
        if not (lo < dn < hi):
            dn = 0.5 * (lo + hi)
        if abs(dn - d) < 1e-15:
            return dn
        d = dn
    if hi - lo < 1e-12:
        return d
    raise ConvergenceFailure("support-line bounce solve exceeded 50 iterations")


def step_bm(h: SupportFunction, x: PhasePoint) -> PhasePoint:
    """Next chord line from ``p = -S_1(phi, phi')`` and ``p' = S_2(phi, phi')``."""
    if x.chart != BM:
        raise InvalidInput("step_bm expects a SupportBM state")
    d = _bm_solve(h, x.u, x.v)
    psi = x.u + d
    p1 = h(psi) * np.cos(d) + h(psi, 1) * np.sin(d)
    r, w = _wrap(x.u + 2.0 * d, TWO_PI)
    return PhasePoint(BM, r, float(p1), x.lift + w)


def step(h: SupportFunction, x: PhasePoint) -> PhasePoint:
    return step_geometric(h, x) if x.chart == ARC else step_bm(h, x)


def jacobian(h: SupportFunction, x: PhasePoint) -> np.ndarray:
    """Derivative of one bounce in the chart of ``x``.

    For ``SupportBM`` the matrix is built from the second partials of the
    generating function and has unit determinant.  For ``ArcAngle`` it is the
    derivative of ``(s, theta) -> (s', theta')`` whose determinant is
    ``sin(theta) / sin(theta')``.
    """
    if x.chart == BM:
        d = _bm_solve(h, x.u, x.v)
        S = bm_generating(h, x.u, x.u + 2.0 * d)
        return np.array([[-S.d11 / S.d12, -1.0 / S.d12],
                         [S.d12 - S.d22 * S.d11 / S.d12, -S.d22 / S.d12]])
    _check_angle(x.v)
    psi, th = to_psi_theta(h, x)
    psi1, th1, st = _kernels.advance(h._a, h._b, psi, th)
    if st != _kernels.OK:
        raise ConvergenceFailure("bounce solve failed")
    J = _kernels.local_jacobian(h._a, h._b, psi, th, psi1, th1)
    r0 = h(psi) + h(psi, 2)
    r1 = h(psi1) + h(psi1, 2)
    return np.array([[r1 / r0 * J[0, 0], r1 * J[0, 1]],
                     [J[1, 0] / r0, J[1, 1]]])


def iterate(h: SupportFunction, x0: PhasePoint, n: int):
    """``n`` bounces from ``x0`` as arrays of unwrapped ``psi`` and ``theta``."""
    psi0, th0 = to_psi_theta(h, x0)
    _check_angle(th0)
    psi, th, _, st, k = _kernels.orbit(h._a, h._b, psi0, th0, n)
    if st == _kernels.GRAZING:
        raise GrazingState(f"orbit became grazing after {k} bounces")
    if st != _kernels.OK:
        raise ConvergenceFailure(f"bounce solve failed after {k} bounces")
    return psi, th


def rotation_number(h: SupportFunction, x0: PhasePoint, n_iter: int = 10_000) -> RotationEstimate:
    """Mean winding per bounce, with the change between n/2 and n as error."""
    if n_iter < 100:
        raise InvalidInput("n_iter must be >= 100")
    psi, _ = iterate(h, x0, n_iter)
    s = s_of_psi(h, psi[[0, n_iter // 2, n_iter]])
    P = h.perimeter
    full = (s[2] - s[0]) / (P * n_iter)
    half = (s[1] - s[0]) / (P * (n_iter // 2))
    return RotationEstimate(float(full), float(abs(full - half)))
