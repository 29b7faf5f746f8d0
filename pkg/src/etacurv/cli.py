"""Command-line front end: solve, radial, props, verify.

Configs are plain text, one "key = value" per line, '#' to end of line
as comment.  Dotted keys group related settings; unknown keys are hard
errors so typos cannot silently fall back to defaults.

Exit codes: 0 success, 1 configuration or I/O error, 2 solver failure,
3 certificate failure.  Diagnostics go to standard error.
"""

import argparse
import os
import re
import sys
from dataclasses import dataclass

import numpy as np

from . import radial, svgplot
from .certify import (
    Certificate,
    check_admissibility,
    check_comparison,
    check_maximum_principle,
    property_battery,
    standard_certificates,
)
from .cones import NotAdmissible
from .domain import DomainShape
from .expr import validate_psi
from .geometry import batch_geometry
from .grid import all_derivatives, build_grid
from .solver import (
    NegativePsi,
    NewtonParams,
    NoInitialGuess,
    ProblemSpec,
    SolverFailure,
    continuation_solve,
    effective_schedule,
    initial_guess,
    residual,
    write_solution,
)


class ConfigError(Exception):
    """Configuration-level failure; the command exits with code 1."""


class ParseError(ConfigError):
    def __init__(self, msg, line):
        super().__init__(f"line {line}: {msg}")
        self.line = line


class UnknownKey(ConfigError):
    pass


class MissingKey(ConfigError):
    pass


class GridMismatch(ConfigError):
    """Stored solution does not belong to the config's grid."""


def _as_text(raw):
    return raw


def _as_int(raw):
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"expected an integer, got '{raw}'")


def _as_float(raw):
    try:
        return float(raw)
    except ValueError:
        raise ValueError(f"expected a number, got '{raw}'")


def _as_floats(raw):
    return [_as_float(part.strip()) for part in raw.split(",")]


def _as_ints(raw):
    return [_as_int(part.strip()) for part in raw.split(",")]


# key -> value parser; this table is the whole schema
_KEYS = {
    "n": _as_int,
    "h": _as_float,
    "psi": _as_text,
    "psi.lower": _as_text,
    "subsolution": _as_text,
    "domain.kind": _as_text,
    "domain.r0": _as_float,
    "domain.semiaxes": _as_floats,
    "eps.schedule": _as_floats,
    "newton.tol_residual": _as_float,
    "newton.max_iter": _as_int,
    "newton.min_step": _as_float,
    "battery.seed": _as_int,
    "battery.samples": _as_int,
    "battery.dims": _as_ints,
    "radial.steps": _as_int,
    "radial.tol": _as_float,
    "radial.eps": _as_float,
    "output.prefix": _as_text,
}

_REQUIRED = ("n", "domain.kind", "psi")

_ECHO_ORDER = (
    "n", "h", "domain.kind", "domain.r0", "domain.semiaxes",
    "psi", "psi.lower", "subsolution", "eps.schedule",
    "newton.tol_residual", "newton.max_iter", "newton.min_step",
    "battery.seed", "battery.samples", "battery.dims",
    "radial.steps", "radial.tol", "radial.eps", "output.prefix",
)


@dataclass
class Config:
    """Parsed key/value document; values already typed per _KEYS."""

    values: dict

    def get(self, key, default=None):
        return self.values.get(key, default)

    def __contains__(self, key):
        return key in self.values


def load_config(path):
    """Strict parse: every key must be known, required keys present."""
    with open(path) as fh:
        raw = fh.read()
    values = {}
    unknown = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ParseError("expected 'key = value'", lineno)
        key, _, val = text.partition("=")
        key = key.strip()
        val = val.strip()
        if not key:
            raise ParseError("empty key", lineno)
        if key not in _KEYS:
            unknown.append(f"'{key}' (line {lineno})")
            continue
        if key in values:
            raise ParseError(f"duplicate key '{key}'", lineno)
        if not val:
            raise ParseError(f"empty value for '{key}'", lineno)
        try:
            values[key] = _KEYS[key](val)
        except ValueError as exc:
            raise ParseError(f"key '{key}': {exc}", lineno)
    if unknown:
        raise UnknownKey("unknown keys: " + ", ".join(unknown))
    missing = [key for key in _REQUIRED if key not in values]
    if missing:
        raise MissingKey("missing required keys: " + ", ".join(missing))
    kind = values["domain.kind"]
    if kind not in ("ball", "ellipse", "ellipsoid"):
        raise ConfigError(
            f"domain.kind must be ball, ellipse or ellipsoid, got '{kind}'")
    if kind == "ball" and "domain.r0" not in values:
        raise MissingKey("domain.kind = ball needs domain.r0")
    if kind != "ball" and "domain.semiaxes" not in values:
        raise MissingKey(f"domain.kind = {kind} needs domain.semiaxes")
    return Config(values)


def build_problem(cfg):
    """Config -> ProblemSpec; validation errors surface as ConfigError."""
    try:
        n = cfg.get("n")
        kind = cfg.get("domain.kind")
        if kind == "ball":
            shape = DomainShape((cfg.get("domain.r0"),) * n)
        else:
            axes = tuple(cfg.get("domain.semiaxes"))
            expected = 2 if kind == "ellipse" else 3
            if len(axes) != expected:
                raise ValueError(
                    f"domain.kind = {kind} needs {expected} semiaxes, "
                    f"got {len(axes)}")
            shape = DomainShape(axes)
        newton = NewtonParams(
            tol_residual=cfg.get("newton.tol_residual", 1e-10),
            max_iter=cfg.get("newton.max_iter", 40),
            min_step=cfg.get("newton.min_step", 1.0 / 1024.0),
        )
        kwargs = {}
        if "eps.schedule" in cfg:
            kwargs["eps_schedule"] = tuple(cfg.get("eps.schedule"))
        return ProblemSpec(
            n=n,
            shape=shape,
            psi=cfg.get("psi"),
            h=cfg.get("h", 1.0 / 32.0),
            psi_lower=cfg.get("psi.lower"),
            subsolution=cfg.get("subsolution"),
            newton=newton,
            **kwargs,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _fmt_value(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (list, tuple)):
        return ", ".join(_fmt_value(item) for item in v)
    if isinstance(v, int):
        return str(v)
    return f"{float(v):.17g}"


def config_echo(cfg, spec=None):
    """Effective config as 'key = value' lines, defaults filled in."""
    eff = dict(cfg.values)
    if spec is not None:
        eff.setdefault("h", spec.h)
        eff.setdefault("eps.schedule", list(spec.eps_schedule))
        eff.setdefault("newton.tol_residual", spec.newton.tol_residual)
        eff.setdefault("newton.max_iter", spec.newton.max_iter)
        eff.setdefault("newton.min_step", spec.newton.min_step)
    eff.setdefault("battery.seed", 42)
    eff.setdefault("battery.samples", 10000)
    eff.setdefault("battery.dims", [2, 3, 4, 5, 6])
    eff.setdefault("radial.steps", 4096)
    eff.setdefault("radial.tol", 1e-10)
    eff.setdefault("radial.eps", 0.0)
    eff.setdefault("output.prefix", "etacurv")
    return [f"{key} = {_fmt_value(eff[key])}" for key in _ECHO_ORDER
            if key in eff]


def _check_psi(spec):
    """Hard-fail on negative samples; soft-warn on the advisory checks."""
    rep = validate_psi(spec.psi, spec)
    if not rep.nonnegative:
        where = "(" + ", ".join(f"{c:.6g}" for c in rep.argmin[0]) + ")"
        raise ConfigError(
            f"psi takes negative values: min {rep.min_psi:.6g} at x={where}")
    if not rep.monotone_z:
        print(f"warning: psi_z sampled negative (min {rep.min_psi_z:.3g}); "
              "uniqueness is not guaranteed", file=sys.stderr)
    if rep.min_gap is not None and rep.min_gap < 0.0:
        print(f"warning: psi dips below psi.lower by {-rep.min_gap:.3g}",
              file=sys.stderr)
    return rep


def _plane_nodes(grid):
    """Plot plane: all nodes for n = 2, the x3 = 0 slab for n = 3."""
    if grid.pos.shape[1] == 2:
        return grid.pos, np.arange(grid.size)
    mask = np.abs(grid.pos[:, 2]) < grid.h / 2.0
    return grid.pos[mask][:, :2], np.where(mask)[0]


def _write_report(path, report, echo):
    lines = ["# etacurv solve report"]
    lines += [f"# {entry}" for entry in echo]
    for st in report.stages:
        lines.append(
            f"stage eps={st.eps:.17g} iterations={st.iterations} "
            f"residual={st.residual_norms[-1]:.17g} "
            f"margin={st.min_margin:.17g} sup_u={st.sup_u:.17g} "
            f"sup_du={st.sup_du:.17g} sup_d2u={st.sup_d2u:.17g}")
    for cert in report.certificates:
        lines.append("certificate " + cert.line())
    text = "\n".join(lines) + "\n"
    with open(path, "w") as fh:
        fh.write(text)
    return text


def cmd_solve(cfg, out_dir=".", emit_svg=False):
    spec = build_problem(cfg)
    _check_psi(spec)
    grid = build_grid(spec.shape, spec.h)
    u0 = initial_guess(spec, grid)
    u, report = continuation_solve(spec, grid, u0)
    report.certificates = standard_certificates(u, u0, grid, report)

    prefix = cfg.get("output.prefix", "etacurv")
    echo = config_echo(cfg, spec)
    sol_path = os.path.join(out_dir, f"{prefix}-solution.dat")
    rep_path = os.path.join(out_dir, f"{prefix}-report.txt")
    write_solution(sol_path, spec, grid, u, report=report, config_echo=echo)
    _write_report(rep_path, report, echo)
    if emit_svg:
        pts, idx = _plane_nodes(grid)
        p, r = all_derivatives(grid, u)
        geo = batch_geometry(p, r, coeffs=False)
        svgplot.write_heatmap(
            os.path.join(out_dir, f"{prefix}-u.svg"),
            pts, u[idx], grid.h, title="solution height u")
        svgplot.write_heatmap(
            os.path.join(out_dir, f"{prefix}-margin.svg"),
            pts, geo.margin[idx], grid.h, title="cone margin min eigenvalue")

    n_pass = sum(cert.passed for cert in report.certificates)
    print(f"solve: {report.summary()} certificates={n_pass}/"
          f"{len(report.certificates)} -> {sol_path}")
    for cert in report.certificates:
        if not cert.passed:
            print("certificate failed: " + cert.line(), file=sys.stderr)
    return 0 if n_pass == len(report.certificates) else 3


def cmd_radial(cfg, out_dir="."):
    spec = build_problem(cfg)
    if spec.shape.kind != "ball":
        raise ConfigError(
            f"radial reduction needs a ball domain, got {spec.shape.kind}")
    _check_psi(spec)
    prof = radial.shoot(
        spec.psi, spec.shape.r0, spec.n,
        tol=cfg.get("radial.tol", 1e-10),
        steps=cfg.get("radial.steps", 4096),
        eps=cfg.get("radial.eps", 0.0))
    prefix = cfg.get("output.prefix", "etacurv")
    path = os.path.join(out_dir, f"{prefix}-radial.dat")
    text = radial.dump_profile(prof, header_extra=config_echo(cfg, spec))
    with open(path, "w") as fh:
        fh.write(text)
    print(f"radial: u(0)={prof.center_value:.17g} "
          f"boundary_residual={prof.boundary_residual:.3e} -> {path}")
    return 0


def cmd_props(cfg=None, seed=None, samples=None):
    if seed is None:
        seed = cfg.get("battery.seed", 42) if cfg else 42
    if samples is None:
        samples = cfg.get("battery.samples", 10000) if cfg else 10000
    dims = tuple(cfg.get("battery.dims", [2, 3, 4, 5, 6])) if cfg \
        else (2, 3, 4, 5, 6)
    certs = property_battery(seed=seed, samples=samples, dims=dims)
    for cert in certs:
        print(cert.line())
    n_pass = sum(cert.passed for cert in certs)
    print(f"properties: {n_pass}/{len(certs)} pass "
          f"(seed={seed} samples={samples} dims={','.join(map(str, dims))})")
    return 0 if n_pass == len(certs) else 3


_HEADER = re.compile(
    r"# etacurv solution n=(\d+) nodes=(\d+) h=([0-9eE.+-]+)$")


def _read_solution(path, spec, grid):
    """u from a stored solution file, after checking it matches the grid."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise GridMismatch(f"{path}: empty file")
    m = _HEADER.match(lines[0])
    if m is None:
        raise GridMismatch(f"{path}: missing solution header")
    n, nodes, h = int(m.group(1)), int(m.group(2)), float(m.group(3))
    if n != spec.n or nodes != grid.size or h != grid.h:
        raise GridMismatch(
            f"{path}: file has n={n} nodes={nodes} h={h:.17g}, config grid "
            f"has n={spec.n} nodes={grid.size} h={grid.h:.17g}")
    rows = [line.split() for line in lines if not line.startswith("#")]
    if len(rows) != grid.size:
        raise GridMismatch(
            f"{path}: {len(rows)} data rows for {grid.size} nodes")
    data = np.array([[float(v) for v in row] for row in rows])
    # 17-digit decimals round-trip exactly, so coordinates must match bitwise
    if not np.array_equal(data[:, :n], grid.pos):
        raise GridMismatch(f"{path}: node coordinates differ from the grid")
    return data[:, n]


def cmd_verify(solution_path, cfg):
    spec = build_problem(cfg)
    grid = build_grid(spec.shape, spec.h)
    u = _read_solution(solution_path, spec, grid)

    certs = [check_maximum_principle(u), check_admissibility(u, grid)]
    try:
        usub = initial_guess(spec, grid)
    except Exception as exc:  # no certified start: skip the comparison check
        print(f"note: comparison certificate skipped ({exc})", file=sys.stderr)
        usub = None
    if usub is not None:
        certs.append(check_comparison(u, usub))
    eps_fin = effective_schedule(spec, grid)[-1]
    tol = 10.0 * spec.newton.tol_residual
    try:
        res = residual(spec, grid, u, eps_fin)
        worst = int(np.abs(res).argmax())
        res_inf = float(np.abs(res)[worst])
        certs.append(Certificate("residual_recompute", res_inf <= tol,
                                 worst, res_inf, tol))
    except NotAdmissible as exc:
        certs.append(Certificate("residual_recompute", False,
                                 exc.node, exc.margin, tol))
    for cert in certs:
        print(cert.line())
    n_pass = sum(cert.passed for cert in certs)
    print(f"verify: {n_pass}/{len(certs)} pass ({solution_path})")
    return 0 if n_pass == len(certs) else 3


class _Parser(argparse.ArgumentParser):
    """Usage errors raise ConfigError so main can map them to exit 1."""

    def error(self, message):
        raise ConfigError(message)


def _build_parser():
    parser = _Parser(
        prog="etacurv",
        description="Solvers and checks for the prescribed eta-curvature "
                    "Dirichlet problem over convex domains.")
    sub = parser.add_subparsers(dest="command", required=True)
    specs = (
        ("solve", "run the continuation solver and write solution files"),
        ("radial", "integrate the radial reduction on a ball"),
        ("props", "run the algebraic property battery"),
        ("verify", "re-run certificates on a stored solution file"),
    )
    for name, help_text in specs:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="path to a key = value config file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="battery seed override (props)")
        p.add_argument("--samples", type=int, default=None,
                       help="battery sample count override (props)")
        p.add_argument("--emit-svg", action="store_true",
                       help="also write SVG heatmaps (solve)")
        if name == "verify":
            p.add_argument("solution", help="stored solution file to check")
    return parser


def _dispatch(args):
    if args.command == "props":
        cfg = load_config(args.config) if args.config else None
        return cmd_props(cfg, seed=args.seed, samples=args.samples)
    if not args.config:
        raise ConfigError(f"'{args.command}' requires --config")
    cfg = load_config(args.config)
    if args.command == "solve":
        return cmd_solve(cfg, out_dir=args.out, emit_svg=args.emit_svg)
    if args.command == "radial":
        return cmd_radial(cfg, out_dir=args.out)
    return cmd_verify(args.solution, cfg)


def main(argv=None):
    try:
        args = _build_parser().parse_args(argv)
        return _dispatch(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SolverFailure, NoInitialGuess, NotAdmissible, NegativePsi,
            radial.BracketFailure, radial.StiffnessFailure,
            radial.DegenerateTangential) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
