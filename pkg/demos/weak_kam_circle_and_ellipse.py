"""Discrete weak-KAM quantities on the circle and on an ellipse.

Run: python demos/weak_kam_circle_and_ellipse.py [out_dir]

Both domains are rescaled to unit perimeter, so the slope of alpha(c) is a
rotation number.  The circle gives alpha(0) = 1/pi exactly; the ellipse
shows a flat rho = 1/2 plateau in alpha(c) and a vanishing Peierls barrier
on the invariant curve that carries the 4-loops.
"""

import sys
from pathlib import Path

import numpy as np

from convex_billiards import aubry_mather as am
from convex_billiards import io
from convex_billiards.geometry import EllipseParams, SupportFunction, circle_support, ellipse_support
from convex_billiards.orbits import loop_angle_table


def main(out=Path("demo_out"), N=512):
    out.mkdir(parents=True, exist_ok=True)
    circle = circle_support(1.0 / (2.0 * np.pi))
    g = am.iterate_action(am.build_action(circle, 0.0, N), 512)
    est = am.alpha_estimate(g)
    sq, _ = am.closed_loop_minimum(g, 4, 1, starts=[0])
    print(f"circle: alpha(0) = {est.alpha:.10f} (1/pi = {1 / np.pi:.10f})")
    print(f"  inscribed square action = {sq:.10f} (-2 sqrt2/pi = {-2 * np.sqrt(2) / np.pi:.10f})")

    e = ellipse_support(EllipseParams(1.0, 0.8))
    e = SupportFunction(e.coeffs / e.perimeter)
    cs = np.linspace(-1.0, 0.2, 13)
    alphas, rhos = [], []
    for c in cs:
        gc = am.iterate_action(am.build_action(e, c, N), 512)
        alphas.append(am.alpha_estimate(gc).alpha)
        rhos.append(am.rotation_number_c(gc, am.lax_oleinik_fixed_point(gc)))
        print(f"ellipse c = {c:+.2f}: alpha = {alphas[-1]:.6f}, rho = {rhos[-1]:.4f}")
    io.write_csv(out / "alpha_of_c.csv", ["c", "alpha", "rho"], [cs, alphas, rhos])

    c4 = am.invariant_curve_c(e, loop_angle_table(e, 512))
    gc = am.iterate_action(am.build_action(e, c4, N), 512)
    hc = am.peierls_diagonal(gc)
    print(f"c on the 4-loop curve = {c4:.6f}; rotation interval {am.rotation_interval(e, c4, N)}")
    print(f"  max |h_c(x, x)| = {np.abs(hc).max():.2e}")
    io.write_csv(out / "peierls_diagonal.csv", ["x", "h"], [gc.x, hc])


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_out"))
