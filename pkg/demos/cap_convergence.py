#!/usr/bin/env python3
"""Mesh-convergence study on the closed-form fixture.

psi == 1 on the disk of radius 1/2 is solved exactly by the unit sphere
cap u = -sqrt(1 - |x|^2) + sqrt(3/4): every principal curvature equals 1,
so each lambda_i = n - 1 = 1 and the curvature product is 1.  Running the
continuation solver on a sequence of meshes against this exact solution
exposes the discretization order directly.

Expected: second-order decay of the max-norm error (the boundary-fitted
stencils are exact on quadratics, and the cap is smooth up to the
boundary of this disk), with a ratio near 4 per mesh halving.
"""

import time

import numpy as np

from etacurv.domain import DomainShape
from etacurv.grid import build_grid
from etacurv.solver import ProblemSpec, continuation_solve, initial_guess

R0 = 0.5
MESHES = (1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0)


def solve_at(h):
    spec = ProblemSpec(n=2, shape=DomainShape((R0, R0)), psi="1", h=h)
    grid = build_grid(spec.shape, spec.h)
    u0 = initial_guess(spec, grid)
    t0 = time.perf_counter()
    u, report = continuation_solve(spec, grid, u0)
    elapsed = time.perf_counter() - t0
    exact = -np.sqrt(1.0 - np.sum(grid.pos ** 2, axis=-1)) + np.sqrt(0.75)
    return grid, report, float(np.abs(u - exact).max()), elapsed


def main():
    print("psi == 1 on the disk r0 = 1/2; exact solution: unit sphere cap")
    print(f"{'h':>10} {'nodes':>7} {'L_inf error':>13} {'ratio':>7} "
          f"{'iters/stage':>12} {'secs':>6}")
    prev = None
    for h in MESHES:
        grid, report, err, elapsed = solve_at(h)
        ratio = f"{prev / err:7.2f}" if prev is not None else "      -"
        iters = "/".join(str(s.iterations) for s in report.stages)
        print(f"{h:10.5f} {grid.size:7d} {err:13.3e} {ratio} "
              f"{iters:>12} {elapsed:6.2f}")
        prev = err
    print("\nfinal-stage summary:", report.summary())


if __name__ == "__main__":
    main()
