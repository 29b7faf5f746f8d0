"""Convex computational domains: balls, ellipses, ellipsoids.

Each shape is the sublevel set of the implicit function
phi(x) = sum_i (x_i / a_i)^2 - 1 (phi < 0 inside).  Boundary curvature
analysis works through the level-set shape operator P H P / |grad phi|
restricted to the tangent plane, so the same code covers every shape kind;
the classical conic formulas appear only in the tests as oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .cones import in_gamma_k


@dataclass(frozen=True)
class DomainShape:
    """Centered convex domain given by semiaxes; kind is derived.

    ball:       all semiaxes equal (any dimension 2 or 3 here)
    ellipse2:   two distinct semiaxes
    ellipsoid3: three semiaxes
    """

    semiaxes: tuple

    def __post_init__(self):
        axes = tuple(float(a) for a in self.semiaxes)
        if len(axes) not in (2, 3):
            raise ValueError("only 2-D and 3-D domains are supported")
        if any(a <= 0 for a in axes):
            raise ValueError("semiaxes must be positive")
        object.__setattr__(self, "semiaxes", axes)

    @property
    def n(self):
        return len(self.semiaxes)

    @property
    def kind(self):
        axes = self.semiaxes
        if all(a == axes[0] for a in axes):
            return "ball"
        return "ellipse2" if len(axes) == 2 else "ellipsoid3"

    @property
    def r0(self):
        if self.kind != "ball":
            raise ValueError("r0 is defined only for balls")
        return self.semiaxes[0]

    def implicit(self, x):
        """phi(x) = sum (x_i/a_i)^2 - 1; negative inside, zero on the boundary."""
        x = np.asarray(x, dtype=float)
        a = np.asarray(self.semiaxes)
        return np.sum((x / a) ** 2, axis=-1) - 1.0

    def implicit_gradient(self, x):
        x = np.asarray(x, dtype=float)
        a = np.asarray(self.semiaxes)
        return 2.0 * x / a ** 2

    def implicit_hessian(self):
        a = np.asarray(self.semiaxes)
        return np.diag(2.0 / a ** 2)

    def contains(self, x):
        return self.implicit(x) < 0.0

    def boundary_point(self, direction):
        """Radial projection: the unique t > 0 with t*direction on the boundary."""
        d = np.asarray(direction, dtype=float)
        s = np.sum((d / np.asarray(self.semiaxes)) ** 2, axis=-1)
        if np.any(s <= 0.0):
            raise ValueError("direction must be nonzero")
        return d / np.sqrt(s)[..., None]

    def sample_interior(self, rng, m):
        """m points uniform in the open interior (linear image of the unit ball)."""
        n = self.n
        v = rng.normal(size=(m, n))
        v /= np.linalg.norm(v, axis=-1, keepdims=True)
        rad = rng.uniform(0.0, 1.0, m) ** (1.0 / n)
        return v * rad[:, None] * np.asarray(self.semiaxes)


def boundary_directions(n, m):
    """m well-spread unit directions: uniform angles (n=2), Fibonacci sphere (n=3)."""
    if n == 2:
        t = 2.0 * np.pi * np.arange(m) / m
        return np.stack([np.cos(t), np.sin(t)], axis=-1)
    i = np.arange(m) + 0.5
    phi = np.pi * (3.0 - np.sqrt(5.0)) * i
    cz = 1.0 - 2.0 * i / m
    sz = np.sqrt(1.0 - cz ** 2)
    return np.stack([sz * np.cos(phi), sz * np.sin(phi), cz], axis=-1)


def sample_boundary(shape, rng, m):
    v = rng.normal(size=(m, shape.n))
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    return shape.boundary_point(v)


def boundary_curvatures(shape, point):
    """Principal curvatures of the boundary at a boundary point, inward-positive.

    Eigenvalues of the level-set shape operator: with P the projector onto the
    tangent plane of phi = 0, the operator is P . Hess(phi) . P / |grad phi|,
    diagonalized in an orthonormal tangent basis.
    """
    x = np.asarray(point, dtype=float)
    phi = float(shape.implicit(x))
    if abs(phi) > 1e-8:
        raise ValueError(f"point is not on the boundary (implicit value {phi:g})")
    g = shape.implicit_gradient(x)
    gn = np.linalg.norm(g)
    nhat = g / gn
    T = scipy.linalg.null_space(nhat[None, :])  # orthonormal tangent columns
    W = T.T @ shape.implicit_hessian() @ T / gn
    return np.linalg.eigvalsh(W)


_K_GRID = 2.0 ** np.arange(21)


def check_two_convex(shape, samples=2048):
    """Smallest K on the grid {1, 2, 4, ..., 2^20} such that every sampled
    boundary point has (kappa^b, K) in Gamma_2 (n >= 3), or plain strict
    convexity kappa^b > 0 for n = 2.  Returns (ok, K); K = 0 when not ok."""
    n = shape.n
    dirs = boundary_directions(n, max(samples, 1024))
    pts = shape.boundary_point(dirs)
    kb = np.stack([boundary_curvatures(shape, q) for q in pts])
    if n == 2:
        ok = bool(kb.min() > 0.0)
        return ok, (1.0 if ok else 0.0)
    for K in _K_GRID:
        aug = np.concatenate([kb, np.full((kb.shape[0], 1), K)], axis=1)
        if bool(np.all(in_gamma_k(aug, 2))):
            return True, float(K)
    return False, 0.0
