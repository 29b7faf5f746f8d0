"""Discrete residual, sparse Jacobian, damped Newton, and continuation.

The discrete problem at each interior node is the n-th root normalized
equation

    G(D^2 u, Du)^{1/n} = psi_eps(x, u, Du)^{1/n},

with (Du, D^2u) from the grid stencils and G the curvature product of the
graph.  The n-th root exploits the concavity of f^{1/n} on the admissible
cone, which keeps Newton steps well behaved as psi degenerates.  The
continuation drives eps down a schedule, warm-starting each stage, and
never solves eps = 0 when psi vanishes somewhere: the last positive eps
stands in as the C^{1,1} approximation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .cones import NotAdmissible
from .domain import check_two_convex
from .expr import EvalEnv, eval_with_derivs, evaluate, parse, variables
from .geometry import batch_geometry
from .grid import all_derivatives, build_grid

#: A grid function is a plain float vector, one value per interior node in
#: the grid's lexicographic node order; the boundary value is implicitly 0.
GridFunction = np.ndarray


class NegativePsi(ValueError):
    """psi evaluated negative at a node; the equation requires psi >= 0."""


class SolverFailure(Exception):
    """Base for Newton failures; carries the iteration history."""

    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = history or []


class Stagnation(SolverFailure):
    """Backtracking could not find an acceptable step."""


class LinearSolveFailure(SolverFailure):
    """The sparse factorization failed or lost too much accuracy."""


class MaxIterations(SolverFailure):
    """Newton did not meet the residual tolerance in the allowed iterations."""


class NoInitialGuess(Exception):
    """Automatic initial data exists only for balls; provide a subsolution."""


@dataclass
class NewtonParams:
    tol_residual: float = 1e-10
    max_iter: int = 40
    min_step: float = 1.0 / 1024.0
    #: re-check the Jacobian against a directional difference at every
    #: iterate (slow; raises LinearSolveFailure on disagreement)
    debug_fd: bool = False


@dataclass
class ProblemSpec:
    """Full description of one Dirichlet problem.

    psi, psi_lower and subsolution are expression trees (see expr.parse);
    strings are parsed on construction for convenience.
    """

    n: int
    shape: object
    psi: object
    h: float
    psi_lower: object = None
    subsolution: object = None
    eps_schedule: tuple = (1e-1, 1e-2, 1e-3, 1e-4, 0.0)
    newton: NewtonParams = field(default_factory=NewtonParams)

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        if self.shape.n != self.n:
            raise ValueError("shape dimension does not match n")
        for name in ("psi", "psi_lower", "subsolution"):
            v = getattr(self, name)
            if isinstance(v, str):
                object.__setattr__(self, name, parse(v))
        sched = tuple(float(e) for e in self.eps_schedule)
        if not sched:
            raise ValueError("eps schedule must not be empty")
        if any(e < 0 for e in sched):
            raise ValueError("eps schedule entries must be >= 0")
        if any(a <= b for a, b in zip(sched, sched[1:])):
            raise ValueError("eps schedule must be strictly decreasing")
        self.eps_schedule = sched
        if self.newton.tol_residual <= 0:
            raise ValueError("tol_residual must be positive")


@dataclass
class StageReport:
    eps: float
    iterations: int
    residual_norms: list
    step_lengths: list
    min_margin: float
    sup_u: float
    sup_du: float
    sup_d2u: float


@dataclass
class SolveReport:
    stages: list
    certificates: list = field(default_factory=list)

    @property
    def final(self):
        return self.stages[-1]

    def summary(self):
        s = self.final
        return (f"eps={s.eps:g} iters={s.iterations} "
                f"res={s.residual_norms[-1]:.3e} margin={s.min_margin:.3e} "
                f"sup|u|={s.sup_u:.6g} sup|Du|={s.sup_du:.6g} sup|D2u|={s.sup_d2u:.6g}")


def regularize_psi(psi_value, eps, n):
    """psi_eps = (psi^{1/(n-1)} + eps)^{n-1}; strictly positive for eps > 0."""
    v = np.asarray(psi_value, dtype=float)
    if np.any(v < 0.0):
        raise NegativePsi(f"psi must be nonnegative, worst value {v.min():g}")
    if eps == 0.0:
        return v + 0.0
    q = n - 1.0
    return (v ** (1.0 / q) + eps) ** q


def _psi_env(grid, u, p):
    return EvalEnv.from_gradient(grid.pos, np.asarray(u, dtype=float), p)


def _psi_eps_root(spec, grid, u, p, eps, derivs=False):
    """psi_eps^{1/n} and, optionally, its z- and p-derivatives at all nodes.

    Chain rule through t = psi^{1/(n-1)}:
        psi_eps^{1/n} = (t + eps)^{(n-1)/n},
        d/d(z or p)   = (1/n) (t + eps)^{-1/n} t^{2-n} psi_{z or p} ... for n = 2, 3
    with the degenerate convention 0 * unbounded = 0 where psi_z itself
    vanishes (psi touching 0 forces a flat slope there or a kink we clamp).
    """
    n = spec.n
    env = _psi_env(grid, u, p)
    if not derivs:
        val = np.asarray(evaluate(spec.psi, env), dtype=float)
        return regularize_psi(val, eps, n) ** (1.0 / n)
    val, dz, dp = eval_with_derivs(spec.psi, env)
    val = np.asarray(val, dtype=float)
    if np.any(val < 0.0):
        raise NegativePsi(f"psi must be nonnegative, worst value {val.min():g}")
    q = n - 1.0
    t = val ** (1.0 / q)
    root = (t + eps) ** (q / n)
    # d(root)/d(psi) = (q/n)(t+eps)^{-1/n} * (1/q) t^{1-q} = (1/n)(t+eps)^{-1/n} t^{2-n}
    base = np.maximum(t + eps, 1e-300) ** (-1.0 / n)
    tpow = np.maximum(t, 1e-300) ** (2.0 - n)
    chain = base * tpow / n
    droot_dz = np.where(dz == 0.0, 0.0, chain * dz)
    droot_dp = np.where(dp == 0.0, 0.0, chain[..., None] * dp)
    return root, droot_dz, droot_dp


def _state(spec, grid, u, eps, derivs=False):
    """Geometry + psi data for a trial iterate; never raises on bad cones."""
    p, r = all_derivatives(grid, u)
    geo = batch_geometry(p, r, coeffs=derivs)
    sigma1 = geo.kappa.sum(axis=-1)
    return p, r, geo, sigma1


def residual(spec, grid, u, eps):
    """Normalized residual G^{1/n} - psi_eps^{1/n} per node.

    Raises NotAdmissible (with the worst node) when any node's curvature
    vector leaves the cone.
    """
    p, r, geo, _ = _state(spec, grid, u, eps)
    if not np.all(geo.admissible):
        worst = int(np.argmin(geo.margin))
        raise NotAdmissible(
            f"iterate leaves the admissible cone at node {worst} "
            f"(margin {geo.margin[worst]:.3e})",
            margin=float(geo.margin[worst]), node=worst)
    return geo.K_eta ** (1.0 / spec.n) - _psi_eps_root(spec, grid, u, p, eps)


def residual_raw(spec, grid, u, eps):
    """Un-normalized K_eta - psi_eps (diagnostics only)."""
    p, r, geo, _ = _state(spec, grid, u, eps)
    env = _psi_env(grid, u, p)
    return geo.K_eta - regularize_psi(
        np.asarray(evaluate(spec.psi, env), dtype=float), eps, spec.n)


def _try_residual(spec, grid, u, eps, floor):
    """(ok, res, min_margin): ok demands margin >= floor * (1 + sigma_1)
    node-wise; res is None when not ok."""
    p, r, geo, sigma1 = _state(spec, grid, u, eps)
    need = floor * (1.0 + np.abs(sigma1))
    if not np.all(geo.margin >= need):
        return False, None, float(geo.margin.min())
    res = geo.K_eta ** (1.0 / spec.n) - _psi_eps_root(spec, grid, u, p, eps)
    return True, res, float(geo.margin.min())


def jacobian(spec, grid, u, eps, include_gs=True):
    """Sparse derivative of the normalized residual in CSR form.

    Row q chains (1/n) G^{1/n-1} through the Hessian stencils (G^{ij}) and
    gradient stencils (G^s), minus the psi_eps^{1/n} derivatives on the
    gradient stencils and the diagonal.  include_gs=False drops the G^s
    block (experiment toggle; the full derivative is the default).
    """
    p, r, geo, _ = _state(spec, grid, u, eps, derivs=True)
    if not np.all(geo.admissible):
        worst = int(np.argmin(geo.margin))
        raise NotAdmissible(
            f"iterate leaves the admissible cone at node {worst} "
            f"(margin {geo.margin[worst]:.3e})",
            margin=float(geo.margin[worst]), node=worst)
    n = spec.n
    m = grid.size
    ops = grid.ops()
    alpha = (1.0 / n) * geo.K_eta ** (1.0 / n - 1.0)
    _, droot_dz, droot_dp = _psi_eps_root(spec, grid, u, p, eps, derivs=True)

    J = scipy.sparse.csr_matrix((m, m))
    for i in range(n):
        for j in range(i, n):
            wgt = alpha * geo.G2[:, i, j] * (1.0 if i == j else 2.0)
            J = J + scipy.sparse.diags(wgt) @ ops.D2[(i, j)]
    for s in range(n):
        wgt = -droot_dp[:, s]
        if include_gs:
            wgt = wgt + alpha * geo.Gs[:, s]
        J = J + scipy.sparse.diags(wgt) @ ops.Dx[s]
    J = J - scipy.sparse.diags(droot_dz)
    return J.tocsr()


def newton_solve(spec, grid, u0, eps):
    """Damped Newton from an admissible start; returns (u, history).

    history rows: (inf-norm, 2-norm, step, min margin), the start plus one
    per accepted iterate.  Backtracking accepts the first s in {1, 1/2, ...}
    with (a) node-wise admissibility margin >= 1e-12 (1 + sigma_1) and
    (b) 2-norm decreased by the factor (1 - s/4) or inf-norm already at the
    stopping tolerance.   A warm start at the solution therefore costs one
    iteration at step 1, not a stagnation report.
    """
    nt = spec.newton
    u = np.asarray(u0, dtype=float).copy()
    if eps == 0.0:
        p0, _ = all_derivatives(grid, u)
        psi0 = np.asarray(evaluate(spec.psi, _psi_env(grid, u, p0)), dtype=float)
        if float(psi0.min()) <= 0.0:
            raise ValueError(
                f"eps = 0 requires psi > 0 on the grid (min {psi0.min():g})")
    res = residual(spec, grid, u, eps)  # raises NotAdmissible on a bad start
    margin_floor = 1e-12
    geo0 = batch_geometry(*all_derivatives(grid, u), coeffs=False)
    history = [(float(np.abs(res).max()), float(np.linalg.norm(res)), 0.0,
                float(geo0.margin.min()))]
    for it in range(nt.max_iter):
        J = jacobian(spec, grid, u, eps)
        if nt.debug_fd:
            _debug_fd_check(spec, grid, u, eps, J, it)
        try:
            lu = scipy.sparse.linalg.splu(J.tocsc())
            du = lu.solve(-res)
        except RuntimeError as exc:
            raise LinearSolveFailure(f"sparse factorization failed: {exc}",
                                     history) from exc
        lin = np.linalg.norm(J @ du + res)
        if not np.isfinite(lin) or lin > 1e-12 * max(np.linalg.norm(res), 1e-300):
            raise LinearSolveFailure(
                f"linear solve residual {lin:.3e} exceeds the 1e-12 contract",
                history)
        norm0 = history[-1][1]
        s = 1.0
        while s >= nt.min_step:
            ok, trial_res, margin = _try_residual(spec, grid, u + s * du, eps,
                                                  margin_floor)
            if ok and (np.linalg.norm(trial_res) <= (1.0 - s / 4.0) * norm0
                       or np.abs(trial_res).max() <= nt.tol_residual):
                u = u + s * du
                res = trial_res
                history.append((float(np.abs(res).max()),
                                float(np.linalg.norm(res)), s, margin))
                break
            s *= 0.5
        else:
            raise Stagnation(
                f"no step >= {nt.min_step:g} acceptable (eps={eps:g})", history)
        if history[-1][0] <= nt.tol_residual:
            return u, history
    raise MaxIterations(
        f"residual {history[-1][0]:.3e} > {nt.tol_residual:g} "
        f"after {nt.max_iter} iterations", history)


def _debug_fd_check(spec, grid, u, eps, J, it, t=1e-6, tol=1e-5):
    """Directional-difference audit of an assembled Jacobian (debug mode)."""
    rng = np.random.default_rng([911, it])
    delta = rng.standard_normal(grid.size)
    delta /= np.abs(delta).max()
    fd = (residual(spec, grid, u + t * delta, eps)
          - residual(spec, grid, u - t * delta, eps)) / (2.0 * t)
    jd = J @ delta
    err = np.linalg.norm(fd - jd) / max(np.linalg.norm(jd), 1e-300)
    if not err <= tol:
        raise LinearSolveFailure(
            f"Jacobian disagrees with directional difference: {err:.3e}")


_CAP_MULTIPLIERS = (1.05, 1.1, 1.2, 1.5, 2.0, 4.0)


def cap_function(grid, R):
    """Sphere-cap grid samples u = -sqrt(R^2 - |x|^2) + sqrt(R^2 - r0^2)."""
    r0 = grid.shape.r0
    rad2 = np.sum(grid.pos ** 2, axis=1)
    return -np.sqrt(R * R - rad2) + np.sqrt(R * R - r0 * r0)


def initial_guess(spec, grid):
    """Starting iterate: the provided subsolution, else an auto sphere cap.

    The cap radius R is the smallest multiple of r0 whose curvature product
    ((n-1)/R)^n dominates the sampled psi_eps at the first eps; if none
    does, the steepest cap (R = 1.05 r0) is used with a warning.
    """
    if spec.subsolution is not None:
        bad = variables(spec.subsolution) - {"x1", "x2", "x3", "r"}
        if bad:
            raise ValueError(f"subsolution may depend on x only, found {sorted(bad)}")
        from .certify import check_subsolution  # deferred; certify never imports solver
        cert = check_subsolution(spec.subsolution, spec)
        if not cert.passed:
            raise ValueError(f"provided subsolution fails its certificate: {cert.line()}")
        env = EvalEnv.from_gradient(grid.pos, np.zeros(grid.size),
                                    np.zeros_like(grid.pos))
        return np.asarray(evaluate(spec.subsolution, env), dtype=float)
    if grid.shape.kind != "ball":
        raise NoInitialGuess(
            "automatic caps exist only on balls; provide a subsolution")
    r0 = grid.shape.r0
    eps0 = spec.eps_schedule[0] if spec.eps_schedule else 0.0
    env = _psi_env(grid, np.zeros(grid.size), np.zeros_like(grid.pos))
    psi_max = float(regularize_psi(
        np.asarray(evaluate(spec.psi, env), dtype=float), eps0, spec.n).max())
    for mult in _CAP_MULTIPLIERS:
        R = mult * r0
        if ((spec.n - 1) / R) ** spec.n >= psi_max:
            return cap_function(grid, R)
    warnings.warn("no cap dominates psi; starting from the steepest cap")
    return cap_function(grid, _CAP_MULTIPLIERS[0] * r0)


def _stage_metrics(grid, u):
    p, r = all_derivatives(grid, u)
    sup_u = float(np.abs(u).max())
    sup_du = float(np.linalg.norm(p, axis=1).max())
    sup_d2u = float(np.abs(np.linalg.eigvalsh(r)).max())
    return sup_u, sup_du, sup_d2u


def continuation_solve(spec, grid=None, u0=None):
    """Solve down the eps schedule, warm-starting each stage.

    Returns (u, SolveReport); certificates are attached by the caller
    (the command layer runs the verify suite on the result).
    """
    ok, _ = check_two_convex(spec.shape)
    if not ok:
        raise ValueError("domain fails the 2-convexity check")
    if grid is None:
        grid = build_grid(spec.shape, spec.h)
    schedule = effective_schedule(spec, grid)
    u = initial_guess(spec, grid) if u0 is None else np.asarray(u0, dtype=float)
    stages = []
    for eps in schedule:
        try:
            u, history = newton_solve(spec, grid, u, eps)
        except SolverFailure as exc:
            raise type(exc)(f"{exc} (continuation stage eps={eps:g})",
                            exc.history) from exc
        sup_u, sup_du, sup_d2u = _stage_metrics(grid, u)
        stages.append(StageReport(
            eps=eps, iterations=len(history) - 1,
            residual_norms=[h[0] for h in history],
            step_lengths=[h[2] for h in history[1:]],
            min_margin=history[-1][3],
            sup_u=sup_u, sup_du=sup_du, sup_d2u=sup_d2u))
    return u, SolveReport(stages=stages)


def effective_schedule(spec, grid):
    """The problem's schedule with the degenerate guard applied: a trailing
    0 is replaced by 1e-5 whenever psi is not strictly positive on the grid."""
    schedule = list(spec.eps_schedule)
    if not schedule:
        raise ValueError("empty eps schedule")
    if schedule[-1] == 0.0:
        env = _psi_env(grid, np.zeros(grid.size), np.zeros_like(grid.pos))
        psi_min = float(np.asarray(evaluate(spec.psi, env), dtype=float).min())
        if psi_min < 0.0:
            raise NegativePsi(f"psi must be nonnegative, worst value {psi_min:g}")
        if psi_min <= 0.0:
            last = 1e-5 if len(schedule) == 1 else min(1e-5, schedule[-2] / 10.0)
            schedule[-1] = last
            warnings.warn(
                f"psi vanishes on the grid (min {psi_min:g}); "
                f"final stage runs at eps={last:g} instead of 0")
    return tuple(schedule)


def write_solution(path, spec, grid, u, report=None, config_echo=()):
    """Columnar solution file with a self-describing '#' header.

    Full 17-significant-digit decimals: identical configs reproduce the
    file bitwise.
    """
    n = spec.n
    p, r = all_derivatives(grid, u)
    geo = batch_geometry(p, r, coeffs=False)
    res = residual(spec, grid, u, spec.eps_schedule[-1] if report is None
                   else report.final.eps)
    cols = ["x1", "x2", "x3"][:n] + ["u"] + [f"du{s+1}" for s in range(n)]
    cols += [f"d2u{i+1}{j+1}" for i in range(n) for j in range(i, n)]
    cols += [f"kappa{i+1}" for i in range(n)] + ["Keta", "residual"]
    lines = [f"# etacurv solution n={n} nodes={grid.size} h={grid.h:.17g}"]
    lines += [f"# {line}" for line in config_echo]
    if report is not None:
        lines.append(f"# {report.summary()}")
    lines.append("# " + " ".join(cols))
    for q in range(grid.size):
        vals = list(grid.pos[q]) + [u[q]] + list(p[q])
        vals += [r[q, i, j] for i in range(n) for j in range(i, n)]
        vals += list(geo.kappa[q]) + [geo.K_eta[q], res[q]]
        lines.append(" ".join(f"{v:.17g}" for v in vals))
    text = "\n".join(lines) + "\n"
    with open(path, "w") as fh:
        fh.write(text)
    return text
