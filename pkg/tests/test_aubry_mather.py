import numpy as np
import pytest

from convex_billiards import aubry_mather as am
from convex_billiards.errors import BandEmpty, InvalidInput, NotConverged
from convex_billiards.geometry import SupportFunction, circle_support
from convex_billiards.orbits import find_birkhoff_pair, loop_angle_table

from oracles import (ALPHA0_CIRCLE, M12_MAX, M12_MIN, R_UNIT, SQUARE_ACTION,
                     circle_chord_action)


def _unit(h):
    return SupportFunction(h.coeffs / h.perimeter)


@pytest.fixture(scope="module")
def circle_grid():
    return am.iterate_action(am.build_action(circle_support(R_UNIT), 0.0, 256), 512)


@pytest.fixture(scope="module")
def unit_ellipse(ellipse):
    return _unit(ellipse)


def test_action_matches_chord_formula(circle_grid):
    g = circle_grid
    i, j = 3, np.array([10, 40, 100, 200])
    assert np.allclose(g.A1[i, j], circle_chord_action((j - i) / g.N), atol=1e-12)
    assert np.isinf(g.A1[i, i]) and np.isinf(g.A1[i, i + 1])


def test_action_shift_by_c(circle_grid):
    h = circle_support(R_UNIT)
    g = am.build_action(h, 0.3, 256)
    finite = np.isfinite(g.A1) & np.isfinite(circle_grid.A1)
    delta = np.mod(np.arange(256)[None, :] - np.arange(256)[:, None], 256) / 256
    assert np.allclose(g.A1[finite] - circle_grid.A1[finite], -0.3 * delta[finite], atol=1e-13)


def test_build_errors(circle):
    with pytest.raises(InvalidInput):
        am.build_action(circle, 0.0, 64)
    with pytest.raises(BandEmpty):
        am.build_action(circle, 0.0, 256, theta_band=(1.0, 0.5))
    with pytest.raises(BandEmpty):
        am.build_action(circle, 0.0, 128, theta_band=(0.001, 0.002))


def test_iteration_is_minplus_power(circle_grid):
    g = circle_grid
    A1, A3 = g.A1, am.iterate_action(g, 3).An
    A2 = np.min(A1[:, :, None] + A1[None, :, :], axis=1)
    ref = np.min(A2[:, :, None] + A1[None, :, :], axis=1)
    assert np.allclose(A3, ref, atol=1e-12)
    assert circle_grid.n == 512 and g.A1.flags.writeable is False


def test_extract_path_attains_value(circle_grid):
    g = circle_grid
    for i, j in [(0, 5), (17, 200)]:
        path = am.extract_path(g, i, j, 8)
        assert path[0] == i and path[-1] == j and len(path) == 9
        total = sum(g.A1[a, b] for a, b in zip(path[:-1], path[1:]))
        assert total == pytest.approx(g.powers[8][i, j], abs=1e-12)


def test_circle_alpha(circle_grid):
    est = am.alpha_estimate(circle_grid)
    assert est.alpha == pytest.approx(ALPHA0_CIRCLE, abs=1e-3)
    assert est.alpha_karp == pytest.approx(ALPHA0_CIRCLE, abs=1e-6)


def test_alpha_requires_power(circle):
    with pytest.raises(InvalidInput):
        am.alpha_estimate(am.build_action(circle, 0.0, 128))


def test_alpha_not_converged_carries_estimate(unit_ellipse):
    g = am.iterate_action(am.build_action(unit_ellipse, -0.8, 256), 512)
    with pytest.raises(NotConverged) as info:
        am.alpha_estimate(g, tol=1e-7)
    est = info.value.result
    assert est.slope_spread > 1e-7 and est.alpha == pytest.approx(est.alpha_karp, abs=1e-4)


def test_square_loop(circle_grid):
    v, path = am.closed_loop_minimum(circle_grid, 4, 1, starts=[0, 64])
    assert v == pytest.approx(SQUARE_ACTION, abs=1e-4)
    assert np.all(np.mod(np.diff(path), 256) == 64)


def test_lax_oleinik_and_calibration(unit_ellipse):
    g = am.build_action(unit_ellipse, -0.7, 256)
    sol = am.lax_oleinik_fixed_point(g)
    assert sol.converged and sol.residual < 1e-8
    nodes, psi = am.calibrated_orbit(g, sol, 0, 50)
    assert nodes[-1] == 0 and np.all(np.diff(psi) > 0)
    u = sol.u
    for a, b in zip(nodes[:-1], nodes[1:]):
        assert u[a] + g.A1[a, b] + sol.alpha == pytest.approx(u[b], abs=1e-9)


def test_lax_oleinik_gives_up(unit_ellipse):
    g = am.build_action(unit_ellipse, -0.7, 256)
    with pytest.raises(NotConverged) as info:
        am.lax_oleinik_fixed_point(g, u0=np.sin(np.arange(256)), tol=0.0, max_iter=2)
    assert not info.value.result.converged


def test_lax_oleinik_critical_cycle_fallback(unit_ellipse):
    g = am.build_action(unit_ellipse, -1.0, 256)
    sol = am.lax_oleinik_fixed_point(g, max_iter=3)
    assert sol.converged and sol.residual < 1e-9 and sol.iterations == 3
    ref = am.lax_oleinik_fixed_point(g)
    assert sol.alpha == ref.alpha


def test_alpha_convex_and_slope_is_rotation(unit_ellipse):
    cs = np.linspace(-1.0, 0.2, 7)
    al, rho = [], []
    for c in cs:
        g = am.iterate_action(am.build_action(unit_ellipse, c, 256), 512)
        al.append(am.alpha_estimate(g).alpha)
        rho.append(am.rotation_number_c(g, am.lax_oleinik_fixed_point(g)))
    assert np.diff(al, 2).min() > -1e-6
    assert np.all(np.diff(rho) >= 0) and rho[-1] == pytest.approx(0.5)
    mids = np.diff(al) / np.diff(cs)
    assert np.all((mids >= np.array(rho[:-1]) - 1e-2) & (mids <= np.array(rho[1:]) + 1e-2))


def test_peierls_on_circle(circle_grid):
    d = am.peierls_diagonal(circle_grid)
    assert d.min() > -1e-6 and np.abs(d).max() < 1e-4
    v = am.peierls_barrier(circle_grid, 0, 0)
    assert v.value == pytest.approx(d[0], abs=1e-12)


def test_peierls_at_quarter_rotation(unit_ellipse):
    c = am.invariant_curve_c(unit_ellipse, loop_angle_table(unit_ellipse, 256))
    g = am.iterate_action(am.build_action(unit_ellipse, c, 256), 512)
    d = am.peierls_diagonal(g)
    assert d.min() > -1e-6 and np.abs(d).max() < 1e-3


def test_invariant_curve_c_on_circle():
    h = circle_support(R_UNIT)
    assert am.invariant_curve_c(h, loop_angle_table(h, 256)) == pytest.approx(-np.sqrt(2) / 2)


def test_minimal_action_curve_ellipse(ellipse):
    m = am.minimal_action_curve(ellipse, 1, 2, N=128, dp_grid=128)
    assert m.values.min() == pytest.approx(M12_MIN, abs=1e-10)
    assert m.values.max() == pytest.approx(M12_MAX, abs=1e-10)
    assert m.residual < 1e-9
    assert np.mod(m.x[np.argmin(m.values)], 0.5) == pytest.approx(0.0, abs=1e-12)


def test_minimal_action_curve_circle_is_flat(circle):
    m = am.minimal_action_curve(circle, 1, 4, N=64, dp_grid=128)
    assert m.spread < 1e-10
    assert m.values[0] == pytest.approx(-4 * np.sqrt(2), abs=1e-10)


def test_minimal_action_curve_rejects_bad_pq(circle):
    with pytest.raises(InvalidInput):
        am.minimal_action_curve(circle, 2, 4)


def test_conjugate_points_split_birkhoff_pair(ellipse, circle):
    lo, hi = find_birkhoff_pair(ellipse, 1, 2)
    assert am.conjugate_point_check(ellipse, lo, kmax=20).first is None
    assert am.conjugate_point_check(ellipse, hi, kmax=20).first is not None
    assert am.conjugate_point_check(circle, (0.0, 0.7), kmax=40).first is None


@pytest.mark.slow
@pytest.mark.parametrize("kind,expected", [("circle", True), ("ellipse", True),
                                           ("perturbed", False)])
def test_foliation_probe(kind, expected, circle, ellipse):
    h = {"circle": circle, "ellipse": ellipse,
         "perturbed": ellipse.perturbed([(3, 0.02, 0.0)])}[kind]
    rep = am.foliation_probe(h, 4)
    assert rep.consistent is expected
    assert rep.verdict.startswith("consistent" if expected else "inconsistent")
    assert set(rep.as_dict()) >= {"spreads", "conjugate", "rho_monotone"}


def test_foliation_probe_rejects_q0(circle):
    with pytest.raises(InvalidInput):
        am.foliation_probe(circle, 7)


def test_action_bounded_below_and_circle_rows_shift(ellipse, circle_grid):
    g = am.build_action(ellipse, 0.4, 128)
    assert np.nanmin(np.where(np.isfinite(g.A1), g.A1, np.nan)) >= -ellipse(0.0) * 2 - 0.4 - 1e-12
    A = circle_grid.A1
    assert np.allclose(np.roll(A[0], 5), A[5], atol=1e-12)


def test_power_one_and_subadditivity(circle_grid, rng):
    g1 = am.iterate_action(circle_grid, 1)
    assert g1.An is circle_grid.A1
    A2, A1 = circle_grid.powers[2], circle_grid.A1
    for i, j, k in rng.integers(0, 256, size=(50, 3)):
        assert A2[i, k] <= A1[i, j] + A1[j, k] + 1e-12


def test_gauge_shift_moves_alpha(circle_grid):
    from dataclasses import replace
    from convex_billiards._kernels import karp
    shifted = replace(circle_grid, A1=circle_grid.A1 + 0.25)
    a0 = -karp(np.ascontiguousarray(circle_grid.A1))
    assert -karp(np.ascontiguousarray(shifted.A1)) == pytest.approx(a0 - 0.25, abs=1e-12)


def test_constant_is_weak_kam_on_circle(circle_grid):
    sol = am.lax_oleinik_fixed_point(circle_grid, u0=np.full(256, 3.0))
    assert np.ptp(sol.u) < 1e-12 and sol.iterations == 1


def test_extracted_path_is_locally_optimal(circle_grid, unit_ellipse):
    g = am.iterate_action(am.build_action(unit_ellipse, -0.7, 128), 8)
    path = am.extract_path(g, 0, 40, 8)
    A = g.A1
    for k in range(1, len(path) - 1):
        a, b = path[k - 1], path[k + 1]
        here = A[a, path[k]] + A[path[k], b]
        assert here <= np.min(A[a, :] + A[:, b]) + 1e-12


def test_calibrated_orbits_do_not_cross(unit_ellipse):
    g = am.build_action(unit_ellipse, -0.7, 256)
    sol = am.lax_oleinik_fixed_point(g)
    _, a = am.calibrated_orbit(g, sol, 0, 200)
    _, b = am.calibrated_orbit(g, sol, 37, 200)
    # align by lift so that the two sequences start in the same fundamental domain
    b = b - 2 * np.pi * np.floor((b[0] - a[0]) / (2 * np.pi))
    diff = b - a
    assert np.all(diff >= -1e-12) or np.all(diff <= 1e-12)


def test_calibrated_orbit_polishes_to_billiard_orbit(unit_ellipse):
    from convex_billiards.billiard import iterate
    from convex_billiards.chains import polish_chain
    g = am.build_action(unit_ellipse, -0.7, 512)
    sol = am.lax_oleinik_fixed_point(g)
    _, psi = am.calibrated_orbit(g, sol, 0, 12)
    chain, _ = polish_chain(unit_ellipse, psi[None, :])
    assert am.stationarity_residual(unit_ellipse, chain) < 1e-6
    assert np.abs(chain[0] - psi).max() < 20.0 / 512
    d = np.diff(am.boundary_points(unit_ellipse, chain[0, :2]), axis=0)[0]
    theta0 = np.mod(np.arctan2(-d[0], d[1]) - chain[0, 0], 2 * np.pi)
    traj, _ = iterate(unit_ellipse, am.arc_point(unit_ellipse, chain[0, 0], theta0), 3)
    assert np.abs(traj - chain[0, :4]).max() < 1e-6


def test_periodic_minimum_vanishes_at_quarter_rotation(unit_ellipse):
    c = am.invariant_curve_c(unit_ellipse, loop_angle_table(unit_ellipse, 256))
    g = am.iterate_action(am.build_action(unit_ellipse, c, 256), 4)
    alpha = am.lax_oleinik_fixed_point(g).alpha
    assert abs(np.min(np.diag(g.An)) + 4 * alpha) < 1e-3
    lo, hi = am.rotation_interval(unit_ellipse, c, 256)
    assert lo <= 0.25 + 1e-3 and hi >= 0.25 - 1e-3


def test_rotation_interval_on_plateau(unit_ellipse):
    lo, hi = am.rotation_interval(unit_ellipse, 0.0, 256)
    assert lo == pytest.approx(0.5, abs=1e-8) and hi == pytest.approx(0.5, abs=1e-8)


def test_three_periodic_spread_is_first_order(ellipse):
    spreads = [am.minimal_action_curve(ellipse.perturbed([(3, eps, 0.0)]), 1, 3,
                                       N=64, dp_grid=128).spread for eps in (2e-3, 1e-3)]
    assert spreads[0] / spreads[1] == pytest.approx(2.0, abs=0.1)


def test_strong_perturbation_conjugate_verdict(ellipse):
    h = ellipse.perturbed([(3, 0.05, 0.0)])
    m = am.minimal_action_curve(h, 1, 3, N=64, dp_grid=128)
    chain = m.chains[int(np.argmax(m.values))]
    d = np.diff(am.boundary_points(h, chain[:2]), axis=0)[0]
    theta0 = float(np.mod(np.arctan2(-d[0], d[1]) - chain[0], 2 * np.pi))
    rep = am.conjugate_point_check(h, (chain[0], theta0), kmax=9)
    # M_{1,3} is not constant, and its maximizer is not a minimizing orbit
    assert m.spread > 1e-3 and rep.first is not None
