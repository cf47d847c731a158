"""Integral criterion, its spectral reduction and closeness to an ellipse.

Given the 4-loop angle table of a nearly centrally symmetric domain, this
module evaluates the criterion integrand ``U``, the Wirtinger-type
functional of ``mu = cos 2d``, the ellipse read off from the ``+-2`` modes of
``mu``, and the distance of the boundary to that ellipse in elliptic polar
coordinates.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import zeta

from .errors import (FocalSegmentCrossing, InvalidInput, NotAGraph, NotAnEllipseBranch,
                     OnFocalSegment)
from .geometry import (EllipseParams, SupportFunction, boundary_points,
                       elliptic_polar_inverse)
from .orbits import LoopAngleTable

TWO_PI = 2.0 * np.pi


@dataclass
class FourierSpectrum:
    """Complex coefficients of a real periodic signal, ``k = -K..K``."""

    coeffs: np.ndarray
    _norms: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_samples(cls, values, K: int | None = None) -> "FourierSpectrum":
        values = np.asarray(values, dtype=float)
        n = values.size
        K = (n - 1) // 2 if K is None else K
        f = np.fft.fft(values) / n
        c = np.concatenate([f[n - K:], f[:K + 1]])
        c = 0.5 * (c + np.conj(c[::-1]))
        return cls(c)

    @property
    def K(self) -> int:
        return self.coeffs.size // 2

    @property
    def k(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    def mode(self, k: int) -> complex:
        return self.coeffs[self.K + k] if abs(k) <= self.K else 0.0j

    def samples(self, N: int | None = None, deriv: int = 0) -> np.ndarray:
        N = N or max(8 * self.K, 64)
        spec = np.zeros(N, dtype=complex)
        spec[self.k % N] = self.coeffs * (1j * self.k) ** deriv
        return np.fft.ifft(spec).real * N

    def cl_norm(self, l: int) -> float:
        """``max_{j <= l} sup |f^(j)|`` on an 8x oversampled grid."""
        key = f"C{l}"
        if key not in self._norms:
            self._norms[key] = max(np.abs(self.samples(deriv=j)).max() for j in range(l + 1))
        return self._norms[key]

    def sobolev_norm(self, sigma: float) -> float:
        """``(sum <k>^(2 sigma) |c_k|^2)^(1/2)`` with ``<k> = max(1, |k|)``."""
        w = np.maximum(1.0, np.abs(self.k)) ** (2.0 * sigma)
        return float(np.sqrt(np.sum(w * np.abs(self.coeffs) ** 2)))

    @property
    def norms(self) -> dict:
        return {"C0": self.cl_norm(0), "C1": self.cl_norm(1), "C2": self.cl_norm(2),
                "H3.5": self.sobolev_norm(3.5)}

    def without(self, modes) -> "FourierSpectrum":
        c = self.coeffs.copy()
        for m in modes:
            if abs(m) <= self.K:
                c[self.K + m] = 0.0
        return FourierSpectrum(c)


def compute_U(h: SupportFunction, table: LoopAngleTable):
    """Criterion integrand on the table grid and its integral over the circle."""
    N = table.N
    hv, h1, h2 = h.on_grid(N), h.on_grid(N, 1), h.on_grid(N, 2)
    d = table.d
    rho = hv + h2
    U = (-hv * h1 ** 2 * rho * (d / 2 - np.sin(2 * d) / 4)
         + (h2 * hv ** 2 + 3 * hv * h1 ** 2) * rho * (d / 8 - np.sin(4 * d) / 32))
    return U, float(TWO_PI * U.mean())


def wirtinger_functional(mu: FourierSpectrum) -> float:
    """``integral((mu'')^2 - 4 (mu')^2)`` evaluated exactly from the spectrum."""
    if mu.K < 3:
        raise InvalidInput("need K >= 3")
    k = mu.k.astype(float)
    return float(TWO_PI * np.sum((k ** 4 - 4 * k ** 2) * np.abs(mu.coeffs) ** 2))


@dataclass
class ReductionResult:
    lhs: float
    rhs: float
    gap: float
    wirtinger: float


def reduction_check(h: SupportFunction, table: LoopAngleTable) -> ReductionResult:
    """Compare ``integral U`` with ``(pi R0^4 / 512) * wirtinger(mu)``."""
    _, lhs = compute_U(h, table)
    W = wirtinger_functional(FourierSpectrum.from_samples(table.mu))
    rhs = np.pi * table.R0 ** 4 / 512.0 * W
    return ReductionResult(lhs, float(rhs), float(abs(lhs - rhs)), W)


def scaling_exponents(eps, values) -> np.ndarray:
    """Local log-log slopes between consecutive (eps, value) pairs."""
    eps = np.asarray(eps, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    return np.diff(np.log(v)) / np.diff(np.log(eps))


@dataclass
class TruncationResidual:
    mu0: complex
    mu1: complex
    mu2: complex
    C0: float
    C1: float
    H2: float
    C0_from_H2: float


def mu_truncation_residual(mu: FourierSpectrum) -> TruncationResidual:
    """Size of ``mu`` minus its ``+-2`` Fourier modes.

    ``C0_from_H2`` is the Sobolev bound ``sqrt(sum <k>^-4) * ||r||_H2``.
    """
    r = mu.without([2, -2])
    H2 = r.sobolev_norm(2.0)
    emb = np.sqrt(1.0 + 2.0 * zeta(4.0))
    return TruncationResidual(mu.mode(0), mu.mode(1), mu.mode(2), r.cl_norm(0), r.cl_norm(1),
                              H2, float(emb * H2))


@dataclass
class CandidateEllipse:
    support: SupportFunction
    params: EllipseParams
    rotation: float
    amplitude: float


def candidate_ellipse(mu: FourierSpectrum, R0: float, K: int = 64) -> CandidateEllipse:
    """Ellipse ``(R0 / sqrt 2) sqrt(1 - (mu_-2 e^{-2i psi} + mu_2 e^{2i psi}))``.

    Axes follow from the mode amplitude ``m = 2|mu_2|``:
    ``a^2 = R0^2 (1 + m) / 2``, ``b^2 = R0^2 (1 - m) / 2``; ``rotation`` is
    the counterclockwise angle of the major axis.
    """
    c2 = mu.mode(2)
    m = 2.0 * abs(c2)
    if m >= 1.0:
        raise NotAnEllipseBranch(f"+-2 mode amplitude {m:.4f} >= 1")
    beta = np.angle(c2) if m > 0 else np.pi
    omega = float(np.mod((np.pi - beta) / 2.0, np.pi))
    a = R0 * np.sqrt((1 + m) / 2.0)
    b = R0 * np.sqrt((1 - m) / 2.0)
    N = max(1024, 8 * K)
    psi = TWO_PI * np.arange(N) / N
    vals = R0 / np.sqrt(2.0) * np.sqrt(1.0 - 2.0 * np.real(c2 * np.exp(2j * psi)))
    sup = SupportFunction.from_samples(vals, K=K)
    return CandidateEllipse(sup, EllipseParams(float(a), float(b)), omega, m)


@dataclass
class EllipticGraph:
    theta: np.ndarray
    lam: np.ndarray
    lambda0: float
    e0: float
    c0_distance: float
    c1_distance: float


def elliptic_graph_distance(h: SupportFunction, candidate, N: int = 1024,
                            rotation: float = 0.0) -> EllipticGraph:
    """Boundary as a graph ``lambda(theta)`` in the candidate's elliptic coordinates.

    ``candidate`` is a :class:`CandidateEllipse` or :class:`EllipseParams`
    (then ``rotation`` gives its axis angle).  Returns the resampled graph
    and its C0 and C1 distances to the constant ``lambda0``.
    """
    if isinstance(candidate, CandidateEllipse):
        E, rotation = candidate.params, candidate.rotation
    else:
        E = candidate
    c0 = E.c0
    if c0 < 1e-6 * E.a:  # roundoff in |mu_2| alone gives c0 ~ 1e-8 a
        raise FocalSegmentCrossing(
            "candidate is a circle: elliptic coordinates degenerate, use polar coordinates")
    psi = TWO_PI * np.arange(N) / N
    P = boundary_points(h, psi)
    c, s = np.cos(rotation), np.sin(rotation)
    P = P @ np.array([[c, -s], [s, c]])
    try:
        lam, th = elliptic_polar_inverse(c0, P)
    except OnFocalSegment as exc:
        raise FocalSegmentCrossing(str(exc)) from exc
    if lam.min() < 1e-6:
        raise FocalSegmentCrossing("boundary touches the focal segment")
    th = np.unwrap(th)
    if np.any(np.diff(th) <= 0) or th[-1] - th[0] >= TWO_PI:
        raise NotAGraph("elliptic angle is not monotone along the boundary")
    x = np.append(th, th[0] + TWO_PI)
    y = np.append(lam, lam[0])
    spline = CubicSpline(x, y, bc_type="periodic")
    theta = TWO_PI * np.arange(N) / N
    lam_u = spline(th[0] + np.mod(theta - th[0], TWO_PI))
    k = np.fft.fftfreq(N, 1.0 / N)
    k[N // 2] = 0.0
    dlam = np.fft.ifft(1j * k * np.fft.fft(lam_u)).real
    lam0 = E.lambda0
    c0d = float(np.abs(lam_u - lam0).max())
    return EllipticGraph(theta, lam_u, lam0, float(1.0 / np.cosh(lam0)), c0d,
                         float(max(c0d, np.abs(dlam).max())))


@dataclass
class InterpolationCheck:
    passed: bool
    delta: float
    C2: float
    H: float
    high: float
    low: float
    high_bound: float
    low_bound: float
    K_impl: float
    ratio: float

    def as_dict(self) -> dict:
        return asdict(self)


EMBED = float(np.sqrt(1.0 + 2.0 * zeta(3.0)))


def interpolation_bound_check(f, l: int, C: float) -> InterpolationCheck:
    """Check ``||f||_C2 <= ||f||_H(7/2) <= K_impl ||f||_C1^(1/4)``.

    ``f`` is a sample vector on a uniform grid or a :class:`FourierSpectrum`;
    ``C`` bounds ``||f||_Cl``.  The Sobolev sum is split at
    ``<k> = delta^(-1/4)``; the high part is bounded by ``C^2 S delta^(1/2)``
    with ``S = sum <k>^-(2l-9) = 1 + 2 zeta(2l-9)`` and the low part by
    ``2 delta^(1/2)``.  ``ratio`` is ``||f||_C2 / delta^(1/4)``.
    """
    if l < 6:
        raise InvalidInput("need l >= 6")
    spec = f if isinstance(f, FourierSpectrum) else FourierSpectrum.from_samples(f)
    if spec.cl_norm(l) > C * (1 + 1e-9):
        raise InvalidInput(f"||f||_C{l} = {spec.cl_norm(l):.6g} exceeds C = {C}")
    sigma = 3.5
    delta = spec.cl_norm(1)
    kk = np.maximum(1.0, np.abs(spec.k))
    w = kk ** (2 * sigma) * np.abs(spec.coeffs) ** 2
    split = delta ** -0.25 if delta > 0 else np.inf
    high = float(w[kk >= split].sum())
    low = float(w[kk < split].sum())
    S = 1.0 + 2.0 * zeta(2.0 * l - 9.0)
    high_bound = C ** 2 * S * np.sqrt(delta)
    low_bound = 2.0 * np.sqrt(delta) * max(1.0, delta ** 0.25)
    H = np.sqrt(high + low)
    K_impl = EMBED * np.sqrt(C ** 2 * S + 2.0 * max(1.0, delta ** 0.25))
    c2 = spec.cl_norm(2)
    tol = 1e-12 * max(1.0, H)
    ok = (c2 <= EMBED * H + tol and high <= high_bound * (1 + 1e-12) + 1e-300
          and low <= low_bound * (1 + 1e-12) + 1e-300 and c2 <= K_impl * delta ** 0.25 + tol)
    ratio = c2 / delta ** 0.25 if delta > 0 else 0.0
    return InterpolationCheck(bool(ok), float(delta), float(c2), float(H), high, low,
                              float(high_bound), float(low_bound), float(K_impl), float(ratio))


def random_trig_polynomial(rng: np.random.Generator, l: int = 6, K: int = 24,
                           bound: float = 1.0) -> FourierSpectrum:
    """Random real trigonometric polynomial with ``||f||_Cl <= bound``.

    Coefficients decay like ``<k>^-(l+1)`` with random phases; the result is
    rescaled to a uniformly drawn fraction of ``bound``.
    """
    k = np.arange(-K, K + 1)
    amp = rng.standard_normal(k.size) * np.maximum(1.0, np.abs(k)) ** -(l + 1.0)
    c = amp * np.exp(1j * rng.uniform(0, TWO_PI, k.size))
    c = 0.5 * (c + np.conj(c[::-1]))
    f = FourierSpectrum(c)
    scale = bound * rng.uniform(0.05, 1.0) / f.cl_norm(l)
    return FourierSpectrum(c * scale)


def mode_concentration(k: int, l: int = 6, bound: float = 1.0) -> FourierSpectrum:
    """``f = bound k^-l cos(k psi)``: all of the Cl budget in one mode."""
    if k < 1:
        raise InvalidInput("k must be >= 1")
    c = np.zeros(2 * k + 1, dtype=complex)
    c[0] = c[-1] = 0.5 * bound * float(k) ** -l
    return FourierSpectrum(c)
