#!/usr/bin/env python3
"""Full-generality solve: ellipse domain, x/z/nu-dependent right side.

Nothing in the solver is specific to balls or to constant psi; this
script exercises the general path.  The domain is the 0.5 x 0.35
ellipse (its uniform 2-convexity is checked before solving), and

    psi = (1 + x1^2) * (1 + z) * nu3

reads the position, the height and the upward normal component
nu3 = 1/w.  The graph is shallow (depth well under 1), so 1 + z stays
positive, and psi_z = (1 + x1^2) nu3 > 0 keeps the monotonicity
condition that guarantees uniqueness.

Automatic sphere-cap starting guesses exist only on balls, so here we
supply a subsolution: a quadratic bowl vanishing exactly on the ellipse
boundary, deep enough that its curvature product dominates psi.  The
solver certifies it (cone membership, K >= psi, boundary values) before
trusting it as the Newton start and comparison lower bound.

Writes SVG heatmaps of the solution and of the cone margin into the
working directory unless --no-svg is passed.
"""

import sys

import numpy as np

from etacurv import svgplot
from etacurv.certify import standard_certificates
from etacurv.domain import DomainShape, check_two_convex
from etacurv.grid import all_derivatives, build_grid
from etacurv.geometry import batch_geometry
from etacurv.solver import ProblemSpec, continuation_solve, initial_guess

PSI = "(1 + x1^2) * (1 + z) * nu3"
SUB = "0.2 * ((x1/0.5)^2 + (x2/0.35)^2 - 1)"
H = 1.0 / 48.0
EMIT_SVG = "--no-svg" not in sys.argv


def main():
    shape = DomainShape((0.5, 0.35))
    ok, K = check_two_convex(shape)
    print(f"ellipse (0.5, 0.35): uniformly 2-convex = {ok} (constant {K:.3f})")

    spec = ProblemSpec(n=2, shape=shape, psi=PSI, h=H, subsolution=SUB)
    grid = build_grid(shape, H)
    print(f"grid: {grid.size} nodes at h = {H:.5f}")

    u0 = initial_guess(spec, grid)
    u, report = continuation_solve(spec, grid, u0)
    print("solve:", report.summary())

    for cert in standard_certificates(u, u0, grid, report):
        print("certificate " + cert.line())

    if EMIT_SVG:
        p, r = all_derivatives(grid, u)
        geo = batch_geometry(p, r, coeffs=False)
        svgplot.write_heatmap("ellipse-u.svg", grid.pos, u, H,
                              title=f"u on the ellipse, psi = {PSI}")
        svgplot.write_heatmap("ellipse-margin.svg", grid.pos, geo.margin, H,
                              title="cone margin min_i lambda_i")
        print("wrote ellipse-u.svg, ellipse-margin.svg")


if __name__ == "__main__":
    main()
