import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from convex_billiards.billiard import (
    ARC, BM, PhasePoint, arc_point, bm_generating, chord_length, iterate, jacobian,
    rotation_number, step, step_bm, step_geometric, to_arc, to_bm, to_psi_theta)
from convex_billiards.errors import CoincidentPoints, GrazingState, OutOfRange
from convex_billiards.geometry import (EllipseParams, boundary_points, ellipse_support,
                                       psi_of_s)

from oracles import FOCAL_C0

TWO_PI = 2 * np.pi


def _random_states(h, rng, n, lo=0.2, hi=np.pi - 0.2):
    return [PhasePoint(ARC, rng.uniform(0, h.perimeter), rng.uniform(lo, hi))
            for _ in range(n)]


def _angle_dist(a, b, period=TWO_PI):
    return abs(np.remainder(a - b + period / 2, period) - period / 2)


def test_circle_step_advances_by_twice_theta(circle):
    for s, th in [(0.0, 0.3), (1.0, np.pi / 4), (5.9, 2.5)]:
        y = step_geometric(circle, PhasePoint(ARC, s, th))
        assert _angle_dist(y.u, s + 2 * th) < 1e-12
        assert y.v == pytest.approx(th, abs=1e-12)


def test_time_reversal(ellipse, rng):
    for x in _random_states(ellipse, rng, 20):
        y = step_geometric(ellipse, x)
        z = step_geometric(ellipse, PhasePoint(ARC, y.u, np.pi - y.v))
        assert _angle_dist(z.u, x.u, ellipse.perimeter) < 1e-10
        assert z.v == pytest.approx(np.pi - x.v, abs=1e-10)


def test_focal_chords_alternate(ellipse):
    f1, f2 = np.array([FOCAL_C0, 0.0]), np.array([-FOCAL_C0, 0.0])
    psi0 = 1.1
    p0 = boundary_points(ellipse, psi0)[0]
    d = f1 - p0
    t = np.array([-np.sin(psi0), np.cos(psi0)])
    theta0 = np.arctan2(t[0] * d[1] - t[1] * d[0], t @ d)
    psi, th = iterate(ellipse, arc_point(ellipse, psi0, theta0), 6)
    pts = boundary_points(ellipse, psi)
    for k in range(6):
        phi = psi[k] + th[k]
        direction = np.array([-np.sin(phi), np.cos(phi)])
        focus = f1 if k % 2 == 0 else f2
        r = focus - pts[k]
        assert abs(direction[0] * r[1] - direction[1] * r[0]) < 1e-8


def test_grazing_rejected(ellipse):
    with pytest.raises(GrazingState):
        step_geometric(ellipse, PhasePoint(ARC, 0.3, 1e-5))
    with pytest.raises(GrazingState):
        step(ellipse, PhasePoint(ARC, 0.3, np.pi - 1e-6))
    with pytest.raises(OutOfRange):
        step_bm(ellipse, PhasePoint(BM, 0.4, ellipse(0.4) * (1 - 1e-12)))


def test_circle_bm_step():
    from convex_billiards.geometry import circle_support
    R, d = 1.3, 0.7
    h = circle_support(R)
    y = step_bm(h, PhasePoint(BM, 0.2, R * np.cos(d)))
    assert y.u == pytest.approx(0.2 + 2 * d, abs=1e-13)
    assert y.v == pytest.approx(R * np.cos(d), abs=1e-13)


def test_cross_chart_agreement(ellipse, rng):
    worst = 0.0
    for x in _random_states(ellipse, rng, 100, 0.01, np.pi - 0.01):
        a = to_bm(ellipse, step_geometric(ellipse, x))
        b = step_bm(ellipse, to_bm(ellipse, x))
        worst = max(worst, _angle_dist(a.u, b.u), abs(a.v - b.v))
    assert worst < 1e-8


def test_chart_conversion_roundtrip(ellipse, rng):
    for x in _random_states(ellipse, rng, 20):
        y = to_arc(ellipse, to_bm(ellipse, x))
        assert _angle_dist(y.u, x.u, ellipse.perimeter) < 1e-12
        assert y.v == pytest.approx(x.v, abs=1e-12)


def test_chord_length_circle(circle):
    for s1, s2 in [(0.0, 1.0), (2.0, 5.5), (6.0, 0.5)]:
        g = chord_length(circle, s1, s2)
        assert g.value == pytest.approx(abs(2 * np.sin((s2 - s1) / 2)), abs=1e-13)
        assert g.value == pytest.approx(chord_length(circle, s2, s1).value, abs=1e-14)
    with pytest.raises(CoincidentPoints):
        chord_length(circle, 1.0, 1.0 + circle.perimeter)


def test_chord_partials_are_reflection_angles(ellipse, rng):
    """Arclength partials of l are -cos(theta) and cos(theta')."""
    for x in _random_states(ellipse, rng, 50):
        y = step_geometric(ellipse, x)
        s2 = y.u + (y.lift - x.lift) * ellipse.perimeter
        g = chord_length(ellipse, x.u, s2)
        assert g.d1 + np.cos(x.v) == pytest.approx(0.0, abs=1e-9)
        assert g.d2 - np.cos(y.v) == pytest.approx(0.0, abs=1e-9)


def test_chord_second_partials_by_differences(ellipse):
    s1, s2, e = 0.4, 2.9, 1e-5
    g = chord_length(ellipse, s1, s2)
    d = lambda a, b: chord_length(ellipse, a, b)
    assert (d(s1 + e, s2).d1 - d(s1 - e, s2).d1) / (2 * e) == pytest.approx(g.d11, abs=1e-7)
    assert (d(s1, s2 + e).d1 - d(s1, s2 - e).d1) / (2 * e) == pytest.approx(g.d12, abs=1e-7)
    assert (d(s1, s2 + e).d2 - d(s1, s2 - e).d2) / (2 * e) == pytest.approx(g.d22, abs=1e-7)


def test_twist_sign_and_linear_scaling(ellipse):
    P = ellipse.perimeter
    for s1 in np.linspace(0, P, 7, endpoint=False):
        H12 = [-chord_length(ellipse, s1, s1 + t).d12 for t in np.linspace(0.02, P - 0.02, 60)]
        assert max(H12) < 0
        ts = np.geomspace(1e-4, 1e-2, 9)
        ratio = np.array([chord_length(ellipse, s1, s1 + t).d12 / t for t in ts])  # |H12| / dist
        assert 0 < ratio.min() and ratio.max() / ratio.min() < 1.1


def test_bm_generating_circle():
    from convex_billiards.geometry import circle_support
    R = 0.7
    g = bm_generating(circle_support(R), 0.2, 1.4)
    d = 0.6
    assert (g.value, g.d1, g.d2) == (pytest.approx(2 * R * np.sin(d)),
                                     pytest.approx(-R * np.cos(d)), pytest.approx(R * np.cos(d)))


def test_bm_generating_differences(ellipse):
    f = lambda a, b: bm_generating(ellipse, a, b)
    g, e = f(0.3, 1.9), 1e-6
    assert (f(0.3 + e, 1.9).value - f(0.3 - e, 1.9).value) / (2 * e) == pytest.approx(g.d1, abs=1e-6)
    assert (f(0.3, 1.9 + e).value - f(0.3, 1.9 - e).value) / (2 * e) == pytest.approx(g.d2, abs=1e-6)
    e = 1e-4
    assert (f(0.3, 1.9 + e).d1 - f(0.3, 1.9 - e).d1) / (2 * e) == pytest.approx(g.d12, abs=1e-7)


def test_bm_generating_contract(ellipse, rng):
    """p = -S_1 and p' = S_2 along the orbit."""
    for x in _random_states(ellipse, rng, 50):
        a = to_bm(ellipse, x)
        b = step_bm(ellipse, a)
        phi1 = a.u + TWO_PI * a.lift
        phi2 = b.u + TWO_PI * b.lift
        g = bm_generating(ellipse, phi1, phi2)
        assert abs(a.v + g.d1) < 1e-9 and abs(b.v - g.d2) < 1e-9


def test_jacobian_area_preserving(ellipse, rng):
    h = ellipse.perturbed([(3, 0.01, 0.3)])
    for x in _random_states(h, rng, 200, 0.01, np.pi - 0.01):
        J = jacobian(h, to_bm(h, x))
        assert abs(np.linalg.det(J) - 1) < 1e-8
        Ja = jacobian(h, x)
        y = step_geometric(h, x)
        assert np.linalg.det(Ja) == pytest.approx(np.sin(x.v) / np.sin(y.v), rel=1e-8)


def test_jacobian_against_differences(ellipse):
    x = to_bm(ellipse, PhasePoint(ARC, 0.7, 1.1))
    J = jacobian(ellipse, x)
    e = 1e-6
    cols = []
    for du, dv in [(e, 0), (0, e)]:
        a = step_bm(ellipse, PhasePoint(BM, x.u + du, x.v + dv))
        b = step_bm(ellipse, PhasePoint(BM, x.u - du, x.v - dv))
        cols.append([(a.u - b.u) / (2 * e), (a.v - b.v) / (2 * e)])
    assert np.allclose(np.array(cols).T, J, atol=1e-5)


def test_twist_entry_sign_along_fiber(ellipse):
    phi = 0.9
    ps = np.linspace(0.05, 0.95, 19) * ellipse(phi)
    entries = [jacobian(ellipse, PhasePoint(BM, phi, p))[0, 1] for p in ps]
    assert np.all(np.sign(entries) == np.sign(entries[0]))


def test_circle_rotation_numbers(circle):
    r = rotation_number(circle, PhasePoint(ARC, 0.0, np.pi / 4), 10_000)
    assert r.value == pytest.approx(0.25, abs=1e-6)
    assert rotation_number(circle, PhasePoint(ARC, 0.0, np.pi / 3), 3000).value == \
        pytest.approx(1 / 3, abs=1e-6)


def test_caustic_orbit_rotation_is_stable(ellipse):
    psi, _ = iterate(ellipse, arc_point(ellipse, 0.0, 0.6), 8000)
    from convex_billiards.geometry import s_of_psi
    s = s_of_psi(ellipse, psi) / ellipse.perimeter
    rates = [(s[k + 2000] - s[k]) / 2000 for k in (0, 2000, 4000, 6000)]
    assert np.ptp(rates) < 1e-3


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 10.0), st.floats(0.01, np.pi - 0.01))
def test_step_lands_on_boundary_and_preserves_direction(s, theta):
    h = ellipse_support(EllipseParams(1.0, 0.8), K=32)
    x = PhasePoint(ARC, s % h.perimeter, theta)
    psi0, _ = to_psi_theta(h, x)
    y = step_geometric(h, x)
    psi1, _ = to_psi_theta(h, y)
    p0, p1 = boundary_points(h, [psi0, psi1])
    phi = psi0 + theta
    u = (p1 - p0) / np.linalg.norm(p1 - p0)
    assert np.allclose(u, [-np.sin(phi), np.cos(phi)], atol=1e-9)
    assert 0 < y.v < np.pi
    assert float(psi_of_s(h, y.u)) == pytest.approx(np.mod(psi1, TWO_PI), abs=1e-9)
