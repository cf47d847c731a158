"""Strictly convex domains described by their support function.

A domain is stored as a truncated Fourier series of ``h(psi)``, the
distance from the origin to the tangent line with outward normal
``(cos psi, sin psi)``.  Everything else (boundary points, curvature,
arclength, elliptic polar coordinates) is derived from the coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import _kernels
from .errors import InvalidInput, NotConvex, OnFocalSegment, TailNotResolved

DEFAULT_K = 64
DEFAULT_GRID = 1024


class SupportFunction:
    """Real trigonometric polynomial ``h(psi) = sum_k c_k exp(i k psi)``.

    Parameters
    ----------
    coeffs : array_like of complex, shape (2K+1,)
        Coefficients for ``k = -K..K``; must be Hermitian.
    validate : bool
        Check positivity of ``h`` and ``h + h''`` on a dense grid.
    """

    def __init__(self, coeffs, validate: bool = True):
        c = np.asarray(coeffs, dtype=complex).copy()
        if c.ndim != 1 or c.size % 2 == 0 or c.size < 5:
            raise InvalidInput("coefficient array must have odd length 2K+1 with K >= 2")
        K = c.size // 2
        scale = max(np.abs(c).max(), 1e-300)
        if np.abs(c - np.conj(c[::-1])).max() > 1e-13 * scale:
            raise InvalidInput("coefficients are not Hermitian")
        c = 0.5 * (c + np.conj(c[::-1]))
        c[K] = c[K].real
        c.setflags(write=False)
        self.coeffs = c
        self.K = K
        self._a = np.concatenate(([c[K].real], 2.0 * c[K + 1:].real))
        self._b = np.concatenate(([0.0], -2.0 * c[K + 1:].imag))
        if validate:
            self.check_convex()

    # construction helpers -------------------------------------------------
    @classmethod
    def from_modes(cls, modes: dict, K: int = DEFAULT_K, validate: bool = True):
        """Build from ``{k: c_k}`` for k >= 0 (negative modes by symmetry)."""
        c = np.zeros(2 * K + 1, dtype=complex)
        for k, v in modes.items():
            if abs(k) > K:
                raise InvalidInput(f"mode {k} exceeds truncation K={K}")
            if k == 0:
                c[K] += complex(v).real
            else:
                kk = abs(k)
                v = complex(v) if k > 0 else np.conj(complex(v))
                c[K + kk] += v
                c[K - kk] += np.conj(v)
        return cls(c, validate=validate)

    @classmethod
    def from_samples(cls, values, K: int = DEFAULT_K, validate: bool = True):
        """Trigonometric interpolant of samples on a uniform grid over [0, 2 pi)."""
        values = np.asarray(values, dtype=float)
        n = values.size
        if n < 2 * K + 1:
            raise InvalidInput("need at least 2K+1 samples")
        f = np.fft.fft(values) / n
        c = np.zeros(2 * K + 1, dtype=complex)
        c[K:] = f[:K + 1]
        c[:K] = f[n - K:]
        c = 0.5 * (c + np.conj(c[::-1]))
        return cls(c, validate=validate)

    def with_coeffs(self, coeffs, validate: bool = True) -> "SupportFunction":
        return SupportFunction(coeffs, validate=validate)

    def mode(self, k: int) -> complex:
        return self.coeffs[self.K + k] if abs(k) <= self.K else 0.0j

    @property
    def perimeter(self) -> float:
        return 2.0 * np.pi * self.coeffs[self.K].real

    # evaluation -----------------------------------------------------------
    def __call__(self, psi, deriv: int = 0):
        return eval_support(self, psi, deriv)

    def derivatives(self, psi) -> np.ndarray:
        """Array of shape (4, n) holding h, h', h'', h''' at ``psi``."""
        psi = np.atleast_1d(np.asarray(psi, dtype=float)).ravel()
        return _kernels.series_many(self._a, self._b, psi)

    def on_grid(self, N: int = DEFAULT_GRID, deriv: int = 0) -> np.ndarray:
        """Values of ``h^(deriv)`` on ``psi_j = 2 pi j / N`` by inverse FFT."""
        if N < 2 * self.K + 1:
            raise InvalidInput("grid too coarse for the truncation order")
        k = np.arange(-self.K, self.K + 1)
        spec = np.zeros(N, dtype=complex)
        spec[k % N] = self.coeffs * (1j * k) ** deriv
        return np.fft.ifft(spec).real * N

    def check_convex(self, N: int | None = None) -> None:
        N = N or max(DEFAULT_GRID, 8 * self.K)
        h = self.on_grid(N)
        rho = h + self.on_grid(N, 2)
        if h.min() <= 0.0:
            raise NotConvex("h <= 0 somewhere: origin is not inside the domain")
        if rho.min() <= 0.0:
            raise NotConvex("h + h'' <= 0 somewhere: boundary is not strictly convex")

    # transformations ------------------------------------------------------
    def rotated(self, omega: float) -> "SupportFunction":
        """Domain rotated counterclockwise by ``omega``."""
        k = np.arange(-self.K, self.K + 1)
        return SupportFunction(self.coeffs * np.exp(-1j * k * omega), validate=False)

    def translated(self, v) -> "SupportFunction":
        """Domain shifted by the vector ``v``."""
        c = self.coeffs.copy()
        z = 0.5 * (v[0] - 1j * v[1])
        c[self.K + 1] += z
        c[self.K - 1] += np.conj(z)
        return SupportFunction(c)

    def perturbed(self, terms) -> "SupportFunction":
        """Add ``amplitude * cos(k psi + phase)`` for each ``(k, amplitude, phase)``."""
        c = self.coeffs.copy()
        for k, amp, phase in terms:
            k = int(k)
            if k < 0 or k > self.K:
                raise InvalidInput(f"perturbation mode {k} outside 0..{self.K}")
            if k == 0:
                c[self.K] += amp * np.cos(phase)
            else:
                z = 0.5 * amp * np.exp(1j * phase)
                c[self.K + k] += z
                c[self.K - k] += np.conj(z)
        return SupportFunction(c)

    def __repr__(self) -> str:
        nz = np.flatnonzero(np.abs(self.coeffs[self.K:]) > 0)
        return f"SupportFunction(K={self.K}, active modes={nz.tolist()})"


@dataclass(frozen=True)
class EllipseParams:
    """Semi-axes of an ellipse with its major axis along x."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a >= self.b > 0):
            raise InvalidInput("ellipse needs a >= b > 0")

    @property
    def eccentricity(self) -> float:
        return float(np.sqrt(1.0 - (self.b / self.a) ** 2))

    @property
    def c0(self) -> float:
        return float(np.sqrt(self.a ** 2 - self.b ** 2))

    @property
    def lambda0(self) -> float:
        """Elliptic radius of the boundary, ``tanh(lambda0) = b/a``."""
        return float(np.arctanh(self.b / self.a)) if self.a > self.b else np.inf


@dataclass(frozen=True)
class BoundaryPoint:
    psi: float
    position: np.ndarray
    tangent_angle: float
    arclength: float


class ArclengthMap(NamedTuple):
    s_of_psi: Callable
    psi_of_s: Callable
    perimeter: float


def eval_support(h: SupportFunction, psi, deriv_order: int = 0):
    """Exact derivative of order 0..4 of the support function at ``psi``."""
    if deriv_order not in (0, 1, 2, 3, 4):
        raise InvalidInput("deriv_order must be in 0..4")
    scalar = np.isscalar(psi)
    x = np.atleast_1d(np.asarray(psi, dtype=float))
    if deriv_order < 4:
        out = _kernels.series_many(h._a, h._b, x.ravel())[deriv_order].reshape(x.shape)
    else:
        k = np.arange(-h.K, h.K + 1)
        out = (np.exp(1j * np.multiply.outer(x, k)) @ (h.coeffs * k ** 4.0)).real
    return float(out[0]) if scalar else out


def circle_support(R: float = 1.0, K: int = DEFAULT_K) -> SupportFunction:
    return SupportFunction.from_modes({0: R}, K=K)


def ellipse_support(E: EllipseParams, K: int = DEFAULT_K, tail_tol: float = 1e-12) -> SupportFunction:
    """Fourier series of ``a sqrt(1 - e^2 sin^2 psi)`` truncated at order K."""
    if E.eccentricity >= 0.95:
        raise InvalidInput("built-in ellipses are limited to eccentricity < 0.95")
    M = max(8 * K, 512)
    psi = 2.0 * np.pi * np.arange(M) / M
    vals = np.sqrt((E.a * np.cos(psi)) ** 2 + (E.b * np.sin(psi)) ** 2)
    f = np.fft.fft(vals) / M
    c = np.zeros(2 * K + 1, dtype=complex)
    c[K:] = f[:K + 1].real
    c[:K] = f[M - K:].real
    c[K + 1::2] = 0.0
    c[K - 1::-2] = 0.0
    tail = np.abs(f[K - 1:K + 1].real).max() / abs(f[0].real)
    resolved = np.abs(f[K + 1:M // 2].real).max() / abs(f[0].real)
    if max(tail, resolved) > tail_tol:
        raise TailNotResolved(
            f"ellipse a={E.a}, b={E.b}: Fourier tail {max(tail, resolved):.2e} at K={K}; raise K")
    c[np.abs(c) < 1e-16 * abs(c[K])] = 0.0
    return SupportFunction(c)


def cartesian_from_psi(h: SupportFunction, psi: float) -> BoundaryPoint:
    """Boundary point ``h n(psi) + h' t(psi)`` with its tangent and arclength."""
    hv, hp = eval_support(h, psi, 0), eval_support(h, psi, 1)
    c, s = np.cos(psi), np.sin(psi)
    pos = np.array([hv * c - hp * s, hv * s + hp * c])
    s_arc = float(np.mod(arclength_map(h).s_of_psi(psi), h.perimeter))
    return BoundaryPoint(float(psi), pos, float(psi + np.pi / 2), s_arc)


def boundary_points(h: SupportFunction, psi) -> np.ndarray:
    """Vectorized boundary positions, shape (n, 2)."""
    d = h.derivatives(psi)
    psi = np.atleast_1d(np.asarray(psi, dtype=float)).ravel()
    c, s = np.cos(psi), np.sin(psi)
    return np.stack([d[0] * c - d[1] * s, d[0] * s + d[1] * c], axis=-1)


def curvature_psi(h: SupportFunction, psi):
    """Curvature ``1/(h + h'')``."""
    rho = eval_support(h, psi, 0) + eval_support(h, psi, 2)
    if np.any(np.asarray(rho) <= 0.0):
        raise NotConvex("h + h'' <= 0")
    return 1.0 / rho


def s_of_psi(h: SupportFunction, psi):
    """Arclength from ``psi = 0``, valid on unwrapped angles."""
    K = h.K
    k = np.arange(1, K + 1)
    ck = h.coeffs[K + 1:] * (1.0 - k ** 2) / (1j * k)
    x = np.asarray(psi, dtype=float)
    e = np.exp(1j * np.multiply.outer(x, k)) - 1.0
    out = h.coeffs[K].real * x + 2.0 * (e @ ck).real
    return float(out) if np.ndim(out) == 0 else out


def psi_of_s(h: SupportFunction, s, tol: float = 1e-14):
    """Inverse of :func:`s_of_psi` by safeguarded Newton, unwrapped."""
    P = h.perimeter
    s = np.asarray(s, dtype=float)
    wraps = np.floor(s / P)
    r = s - wraps * P
    lo = np.zeros_like(r)
    hi = np.full_like(r, 2.0 * np.pi)
    x = 2.0 * np.pi * r / P
    for _ in range(100):
        f = s_of_psi(h, x) - r
        lo = np.where(f < 0, x, lo)
        hi = np.where(f >= 0, x, hi)
        d = h.derivatives(np.ravel(x))
        rho = (d[0] + d[2]).reshape(np.shape(x))
        xn = x - f / rho
        bad = (xn <= lo) | (xn >= hi)
        xn = np.where(bad, 0.5 * (lo + hi), xn)
        done = np.max(np.abs(xn - x)) < tol
        x = xn
        if done:
            break
    out = x + 2.0 * np.pi * wraps
    return float(out) if out.ndim == 0 else out


def arclength_map(h: SupportFunction) -> ArclengthMap:
    """Arclength parametrization ``(s_of_psi, psi_of_s, perimeter)``."""
    return ArclengthMap(lambda psi: s_of_psi(h, psi), lambda s: psi_of_s(h, s), h.perimeter)


def is_centrally_symmetric(h: SupportFunction, tol: float = 1e-12):
    """Largest odd-mode amplitude ``2|c_k|`` and whether it is below ``tol``."""
    odd = h.coeffs[h.K + 1::2]
    dev = float(2.0 * np.abs(odd).max()) if odd.size else 0.0
    return dev < tol, dev


def elliptic_polar_forward(c0: float, lam, theta):
    """``(c0 cosh(lam) cos(theta), c0 sinh(lam) sin(theta))``."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise InvalidInput("lambda must be >= 0")
    return np.stack([c0 * np.cosh(lam) * np.cos(theta), c0 * np.sinh(lam) * np.sin(theta)], axis=-1)


def elliptic_polar_inverse(c0: float, point, tol: float = 1e-13):
    """Elliptic radius and angle of points off the focal segment.

    ``point`` has shape (2,) or (n, 2).  Uses the focal-distance identity
    ``cosh(lam) = (r1 + r2) / (2 c0)``.
    """
    P = np.asarray(point, dtype=float)
    x, y = P[..., 0], P[..., 1]
    on_seg = (np.abs(y) <= tol * c0) & (np.abs(x) <= c0 * (1 + tol))
    if np.any(on_seg):
        raise OnFocalSegment("point lies on the closed focal segment")
    r1 = np.hypot(x - c0, y)
    r2 = np.hypot(x + c0, y)
    lam = np.arccosh(np.maximum((r1 + r2) / (2.0 * c0), 1.0))
    theta = np.arctan2(y / np.sinh(lam), x / np.cosh(lam))
    return lam, theta


def grid(N: int = DEFAULT_GRID) -> np.ndarray:
    return 2.0 * np.pi * np.arange(N) / N
