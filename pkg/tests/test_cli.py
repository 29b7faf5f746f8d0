"""End-to-end command tests: config parsing and the exit-code contract."""

import numpy as np
import pytest

from etacurv import cli
from etacurv.cli import (
    Config,
    ConfigError,
    GridMismatch,
    MissingKey,
    ParseError,
    UnknownKey,
    build_problem,
    load_config,
    main,
)

CAP_CFG = """\
# disk cap fixture
n = 2
domain.kind = ball
domain.r0 = 0.5
psi = 1
h = 0.0625
eps.schedule = 1e-1, 1e-2, 0
"""


def write_cfg(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


@pytest.fixture
def cap_cfg(tmp_path):
    return write_cfg(tmp_path, CAP_CFG)


# ---------------------------------------------------------------- config

def test_load_config_minimal(tmp_path):
    cfg = load_config(write_cfg(
        tmp_path, "n = 2\ndomain.kind = ball\ndomain.r0 = 0.5\npsi = 1\n"))
    assert cfg.get("n") == 2
    assert cfg.get("domain.kind") == "ball"
    assert cfg.get("domain.r0") == 0.5
    assert cfg.get("psi") == "1"
    assert "h" not in cfg


def test_load_config_unknown_key(tmp_path):
    with pytest.raises(UnknownKey, match=r"'pssi' \(line 4\)"):
        load_config(write_cfg(
            tmp_path, "n = 2\ndomain.kind = ball\ndomain.r0 = 0.5\npssi = 1\n"))


def test_load_config_schedule_array(tmp_path):
    cfg = load_config(write_cfg(
        tmp_path,
        "n = 2\ndomain.kind = ball\ndomain.r0 = 0.5\npsi = 1\n"
        "eps.schedule = 1e-1, 1e-2, 1e-3\n"))
    assert cfg.get("eps.schedule") == [0.1, 0.01, 0.001]


def test_load_config_parse_error_line_number(tmp_path):
    with pytest.raises(ParseError, match="line 2"):
        load_config(write_cfg(tmp_path, "n = 2\nnot a key value pair\n"))


def test_load_config_duplicate_key(tmp_path):
    with pytest.raises(ParseError, match="duplicate"):
        load_config(write_cfg(tmp_path, "n = 2\nn = 3\n"))


def test_load_config_bad_value(tmp_path):
    with pytest.raises(ParseError, match="'n'"):
        load_config(write_cfg(
            tmp_path, "n = two\ndomain.kind = ball\ndomain.r0 = 0.5\npsi = 1\n"))


def test_load_config_missing_required(tmp_path):
    with pytest.raises(MissingKey, match="psi"):
        load_config(write_cfg(tmp_path, "n = 2\ndomain.kind = ball\ndomain.r0 = 0.5\n"))


def test_load_config_missing_domain_param(tmp_path):
    with pytest.raises(MissingKey, match="domain.r0"):
        load_config(write_cfg(tmp_path, "n = 2\ndomain.kind = ball\npsi = 1\n"))


def test_load_config_bad_kind(tmp_path):
    with pytest.raises(ConfigError, match="domain.kind"):
        load_config(write_cfg(
            tmp_path, "n = 2\ndomain.kind = torus\ndomain.r0 = 0.5\npsi = 1\n"))


def test_load_config_comments_and_blanks(tmp_path):
    cfg = load_config(write_cfg(
        tmp_path,
        "# full line comment\n\nn = 2   # trailing comment\n"
        "domain.kind = ball\ndomain.r0 = 0.5\npsi = 1\n"))
    assert cfg.get("n") == 2


def test_build_problem_ellipse_axis_count():
    cfg = Config({"n": 2, "domain.kind": "ellipse",
                  "domain.semiaxes": [0.5, 0.3, 0.2], "psi": "1"})
    with pytest.raises(ConfigError, match="semiaxes"):
        build_problem(cfg)


def test_build_problem_wraps_spec_errors():
    cfg = Config({"n": 4, "domain.kind": "ball", "domain.r0": 0.5, "psi": "1"})
    with pytest.raises(ConfigError):
        build_problem(cfg)


def test_config_echo_fills_defaults():
    cfg = Config({"n": 2, "domain.kind": "ball", "domain.r0": 0.5, "psi": "1"})
    spec = build_problem(cfg)
    echo = cli.config_echo(cfg, spec)
    joined = "\n".join(echo)
    assert "h = 0.03125" in joined
    assert "battery.seed = 42" in joined
    assert "psi = 1" in joined


# ---------------------------------------------------------------- solve

def test_solve_success(cap_cfg, tmp_path, capsys):
    out = tmp_path / "out"
    out.mkdir()
    rc = main(["solve", "--config", cap_cfg, "--out", str(out)])
    assert rc == 0
    assert (out / "etacurv-solution.dat").exists()
    assert (out / "etacurv-report.txt").exists()
    stdout = capsys.readouterr().out
    assert "certificates=4/4" in stdout
    report = (out / "etacurv-report.txt").read_text()
    assert "certificate maximum_principle=pass" in report
    assert report.count("stage eps=") == 3


def test_solve_negative_psi_exits_1(tmp_path, capsys):
    cfg = write_cfg(tmp_path, CAP_CFG.replace("psi = 1", "psi = -1"))
    assert main(["solve", "--config", cfg, "--out", str(tmp_path)]) == 1
    assert "negative" in capsys.readouterr().err


def test_solve_unreachable_out_dir(cap_cfg, capsys):
    assert main(["solve", "--config", cap_cfg, "--out", "/nonexistent/xyz"]) == 1
    assert "error:" in capsys.readouterr().err


def test_solve_missing_config_file(capsys):
    assert main(["solve", "--config", "/nonexistent/run.cfg"]) == 1


def test_solve_requires_config_flag(capsys):
    assert main(["solve"]) == 1
    assert "requires --config" in capsys.readouterr().err


def test_solve_bitwise_deterministic(cap_cfg, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir(), b.mkdir()
    assert main(["solve", "--config", cap_cfg, "--out", str(a)]) == 0
    assert main(["solve", "--config", cap_cfg, "--out", str(b)]) == 0
    fa = (a / "etacurv-solution.dat").read_bytes()
    fb = (b / "etacurv-solution.dat").read_bytes()
    assert fa == fb


def test_solve_emit_svg(cap_cfg, tmp_path):
    out = tmp_path / "svg"
    out.mkdir()
    rc = main(["solve", "--config", cap_cfg, "--out", str(out), "--emit-svg"])
    assert rc == 0
    for name in ("etacurv-u.svg", "etacurv-margin.svg"):
        text = (out / name).read_text()
        assert text.startswith("<svg")
        assert text.rstrip().endswith("</svg>")
        assert text.count("<rect") > 100


def test_solve_output_prefix(tmp_path):
    cfg = write_cfg(tmp_path, CAP_CFG + "output.prefix = cap\n")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert (tmp_path / "cap-solution.dat").exists()


# ---------------------------------------------------------------- radial

def test_radial_ball(cap_cfg, tmp_path, capsys):
    rc = main(["radial", "--config", cap_cfg, "--out", str(tmp_path)])
    assert rc == 0
    text = (tmp_path / "etacurv-radial.dat").read_text()
    line = next(ln for ln in text.splitlines() if "center" in ln)
    center = float(line.split("=")[-1])
    # closed form: full unit sphere cap over r0 = 1/2
    assert abs(center - (np.sqrt(0.75) - 1.0)) < 1e-9
    assert "richardson" in text


def test_radial_ellipse_exits_1(tmp_path, capsys):
    cfg = write_cfg(
        tmp_path,
        "n = 2\ndomain.kind = ellipse\ndomain.semiaxes = 0.5, 0.3\npsi = 1\n")
    assert main(["radial", "--config", cfg, "--out", str(tmp_path)]) == 1
    assert "ball" in capsys.readouterr().err


# ---------------------------------------------------------------- props

def test_props_small_sample_passes(capsys):
    rc = main(["props", "--samples", "10"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "properties: 85/85 pass" in out
    assert out.count("=pass") == 85


def test_props_config_overrides(tmp_path, capsys):
    cfg = write_cfg(
        tmp_path,
        "n = 2\ndomain.kind = ball\ndomain.r0 = 0.5\npsi = 1\n"
        "battery.samples = 12\nbattery.dims = 2, 3\n")
    rc = main(["props", "--config", cfg])
    assert rc == 0
    assert "pass (seed=42 samples=12 dims=2,3)" in capsys.readouterr().out


def test_props_mutated_build_exits_3(monkeypatch, capsys):
    from etacurv import cones

    real = cones.f_grad

    def broken(kappa, strict=True):
        return 1.01 * real(kappa, strict=strict)

    monkeypatch.setattr(cones, "f_grad", broken)
    assert main(["props", "--samples", "10"]) == 3
    assert "fail" in capsys.readouterr().out


# ---------------------------------------------------------------- verify

@pytest.fixture(scope="module")
def solved(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("solved")
    cfg = write_cfg(tmp, CAP_CFG)
    assert main(["solve", "--config", cfg, "--out", str(tmp)]) == 0
    return tmp / "etacurv-solution.dat", cfg


def test_verify_roundtrip(solved, capsys):
    sol, cfg = solved
    assert main(["verify", str(sol), "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert "residual_recompute=pass" in out
    assert "verify: 4/4 pass" in out


def test_verify_wrong_h_exits_1(solved, tmp_path, capsys):
    sol, _ = solved
    cfg = write_cfg(tmp_path, CAP_CFG.replace("h = 0.0625", "h = 0.125"))
    assert main(["verify", str(sol), "--config", cfg]) == 1
    assert "h=" in capsys.readouterr().err


def test_verify_tampered_exits_3(solved, tmp_path, capsys):
    sol, cfg = solved
    lines = sol.read_text().splitlines()
    for k, ln in enumerate(lines):
        if not ln.startswith("#"):
            parts = ln.split()
            parts[2] = f"{float(parts[2]) - 0.01:.17g}"
            lines[k] = " ".join(parts)
            break
    bad = tmp_path / "tampered.dat"
    bad.write_text("\n".join(lines) + "\n")
    assert main(["verify", str(bad), "--config", cfg]) == 3
    out = capsys.readouterr().out
    assert "residual_recompute=fail" in out


def test_verify_garbage_file_exits_1(solved, tmp_path):
    _, cfg = solved
    junk = tmp_path / "junk.dat"
    junk.write_text("this is not a solution file\n")
    assert main(["verify", str(junk), "--config", cfg]) == 1


def test_verify_coordinate_mismatch(solved, tmp_path):
    sol, cfg = solved
    lines = sol.read_text().splitlines()
    for k, ln in enumerate(lines):
        if not ln.startswith("#"):
            parts = ln.split()
            parts[0] = f"{float(parts[0]) + 1e-9:.17g}"
            lines[k] = " ".join(parts)
            break
    moved = tmp_path / "moved.dat"
    moved.write_text("\n".join(lines) + "\n")
    assert main(["verify", str(moved), "--config", cfg]) == 1


# ---------------------------------------------------------------- misc

def test_main_no_arguments_exits_1(capsys):
    assert main([]) == 1


def test_main_unknown_subcommand_exits_1(capsys):
    assert main(["frobnicate"]) == 1


def test_heatmap_rejects_bad_shapes():
    from etacurv import svgplot
    with pytest.raises(ValueError):
        svgplot.heatmap(np.zeros((4, 3)), np.zeros(4), 0.1)
    with pytest.raises(ValueError):
        svgplot.heatmap(np.zeros((0, 2)), np.zeros(0), 0.1)


def test_heatmap_constant_field():
    from etacurv import svgplot
    pts = np.array([[0.0, 0.0], [0.1, 0.0], [0.0, 0.1]])
    text = svgplot.heatmap(pts, np.ones(3), 0.1, title="flat")
    assert text.count("<rect") >= 3 + 64
    assert "flat" in text
