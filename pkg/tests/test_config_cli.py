"""Config parsing/emission and the command-line driver."""

import os
import subprocess
import sys
from importlib import resources
from pathlib import Path

import pytest

from wedgecheck import emit_config, load_config, parse_config
from wedgecheck.cli import main
from wedgecheck.errors import ConfigurationError

PACKAGED = ("dbar_aps.toml", "dbar_classical.toml", "dirac.toml",
            "jordan.toml", "weight_line.toml", "rotating_dirac.toml")


def _config_path(name):
    return Path(str(resources.files("wedgecheck") / "configs" / name))


def _config_text(name):
    return _config_path(name).read_text()


# ---------------------------------------------------------------------------
# parsing and emission


@pytest.mark.parametrize("name", PACKAGED)
def test_packaged_configs_are_emit_fixed_points(name):
    text = _config_text(name)
    cfg = parse_config(text)
    assert emit_config(cfg) == text
    # and emission is idempotent on the reparse
    assert emit_config(parse_config(emit_config(cfg))) == emit_config(cfg)


def test_parse_builds_a_working_operator():
    from wedgecheck import assemble_pencil, boundary_spectrum, build_trace_space
    cfg = parse_config(_config_text("dirac.toml"))
    op = cfg.build_operator()
    assert op.fiber.kind == "circle" and op.fiber.rank == 2
    assert cfg.boundary_kind() == "classical"
    trace = build_trace_space(boundary_spectrum(assemble_pencil(op)))
    bc = cfg.build_boundary(trace)
    assert bc(1.0).shape == (1, trace.dim)


def test_rotating_config_matches_the_closed_form():
    cfg = parse_config(_config_text("rotating_dirac.toml"))
    op = cfg.build_operator()
    from wedgecheck import build_model
    ref = build_model("rotating_dirac")
    for y in (0.0, 0.8, 2.0):
        import numpy.testing as npt
        npt.assert_allclose(op.a_x.at_theta(0.0, y),
                            ref.a_x.at_theta(0.0, y), atol=1e-12)
        npt.assert_allclose(op.a_fiber.at_theta(0.0, y),
                            ref.a_fiber.at_theta(0.0, y), atol=1e-12)


def test_refine_scales_the_grids():
    text = _config_text("dirac.toml").replace("refine = 1", "refine = 2")
    cfg = parse_config(text)
    base = parse_config(_config_text("dirac.toml"))
    assert cfg.build_fiber().modes == 2 * base.build_fiber().modes
    assert cfg.sweep_kwargs()["n_window"] == 2 * base.sweep_kwargs()["n_window"]


BAD_SNIPPETS = [
    # TOML syntax error
    "[fiber\nkind = \"point\"",
    # missing required section
    "[fiber]\nkind = \"point\"\nrank = 1\n",
    # unknown key
    """
    [fiber]
    kind = "point"
    rank = 1
    wobble = 3
    [operator]
    a_x = [[[1.0, 0.0]]]
    a_edge = [[[[0.0, 1.0]]]]
    a_zero = [[[0.0, 0.0]]]
    """,
    # matrix entry is not an [re, im] pair
    """
    [fiber]
    kind = "point"
    rank = 1
    [operator]
    a_x = [[1.0]]
    a_edge = [[[[0.0, 1.0]]]]
    a_zero = [[[0.0, 0.0]]]
    """,
    # circle fiber without a tangential coefficient
    """
    [fiber]
    kind = "circle"
    rank = 1
    modes = 2
    [operator]
    a_x = [[[1.0, 0.0]]]
    a_edge = [[[[0.0, 1.0]]]]
    a_zero = [[[0.0, 0.0]]]
    """,
    # eta sample on the degenerate ray
    """
    [fiber]
    kind = "point"
    rank = 1
    [operator]
    a_x = [[[1.0, 0.0]]]
    a_edge = [[[[0.0, 1.0]]]]
    a_zero = [[[0.0, 0.0]]]
    [grids]
    eta_samples = [-1.0, 0.0, 1.0]
    """,
    # nonpositive tolerance
    """
    [fiber]
    kind = "point"
    rank = 1
    [operator]
    a_x = [[[1.0, 0.0]]]
    a_edge = [[[[0.0, 1.0]]]]
    a_zero = [[[0.0, 0.0]]]
    [tolerances]
    iso = 0.0
    """,
    # aps boundary conditions carry no matrices
    """
    [fiber]
    kind = "point"
    rank = 1
    [operator]
    a_x = [[[1.0, 0.0]]]
    a_edge = [[[[0.0, 1.0]]]]
    a_zero = [[[0.0, 0.0]]]
    [boundary_condition]
    kind = "aps"
    b_plus = [[[1.0, 0.0]]]
    """,
]


@pytest.mark.parametrize("snippet", BAD_SNIPPETS)
def test_bad_configs_are_rejected(snippet):
    with pytest.raises(ConfigurationError):
        parse_config(snippet)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "nope.toml")


# ---------------------------------------------------------------------------
# in-process CLI driver


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_check_passes_on_dbar(tmp_path, capsys):
    code, out, _ = _run(["check", "--config", str(_config_path("dbar_aps.toml")),
                         "--out", str(tmp_path)], capsys)
    assert code == 0
    assert "overall: PASS" in out
    assert (tmp_path / "report.json").exists()
    assert (tmp_path / "spectrum.csv").exists()


def test_cli_check_reports_weight_line(tmp_path, capsys):
    code, out, err = _run(
        ["check", "--config", str(_config_path("weight_line.toml")),
         "--out", str(tmp_path)], capsys)
    assert code == 1
    assert "condition (9.2) weight-line clearance: FAIL" in out + err


def test_cli_reports_are_byte_identical(tmp_path, capsys):
    blobs = []
    for tag in ("a", "b"):
        out_dir = tmp_path / tag
        code, _, _ = _run(["check", "--config",
                           str(_config_path("dirac.toml")),
                           "--out", str(out_dir)], capsys)
        assert code == 0
        blobs.append({p.name: p.read_bytes()
                      for p in sorted(out_dir.iterdir())})
    assert blobs[0] == blobs[1]


def test_cli_spectrum_and_trace(tmp_path, capsys):
    cfgp = str(_config_path("jordan.toml"))
    code, out, _ = _run(["spectrum", "--config", cfgp, "--out", str(tmp_path)],
                        capsys)
    assert code == 0 and "margin" in out
    assert (tmp_path / "spectrum.json").exists()
    code, out, _ = _run(["trace", "--config", cfgp], capsys)
    assert code == 0 and "dim" in out


def test_cli_pairing_oracle(capsys):
    code, out, _ = _run(["pairing", "--config",
                         str(_config_path("dbar_aps.toml")), "--oracle"],
                        capsys)
    assert code == 0
    assert "quadrature" in out


def test_cli_kernel_with_oracle(capsys):
    code, out, _ = _run(["kernel", "--config",
                         str(_config_path("dbar_aps.toml")),
                         "--eta", "-1.0", "--oracle"], capsys)
    assert code == 0
    assert "N'" in out


def test_cli_kernel_requires_nonzero_eta(capsys):
    code, _, err = _run(["kernel", "--config",
                         str(_config_path("dbar_aps.toml")), "--eta", "0.0"],
                        capsys)
    assert code == 2


def test_cli_sweep(tmp_path, capsys):
    code, out, _ = _run(["sweep", "--config",
                         str(_config_path("dbar_aps.toml")),
                         "--samples", "4", "--out", str(tmp_path)], capsys)
    assert code == 0
    header = (tmp_path / "sweep.csv").read_text().splitlines()[0]
    assert header == "eta,n_prime,n_prime_adj,gap,injective,surjective,rank_identity"


def test_cli_symbols_homog(capsys):
    code, out, _ = _run(["symbols", "homog", "--config",
                         str(_config_path("dbar_aps.toml"))], capsys)
    assert code == 0


def test_cli_worker_env_validation(capsys, monkeypatch):
    monkeypatch.setenv("WEDGECHECK_WORKERS", "0")
    code, _, err = _run(["sweep", "--config",
                         str(_config_path("dbar_aps.toml"))], capsys)
    assert code == 2
    assert "config error" in err


# ---------------------------------------------------------------------------
# the installed console entry point (subprocess contract)


def _subprocess(args, **kw):
    env = dict(os.environ)
    env.setdefault("PYTHONIOENCODING", "utf-8")
    return subprocess.run([sys.executable, "-m", "wedgecheck.cli", *args],
                          capture_output=True, text=True, env=env, **kw)


def test_subprocess_exit_codes(tmp_path):
    ok = _subprocess(["check", "--config",
                      str(_config_path("dbar_aps.toml"))])
    assert ok.returncode == 0

    finding = _subprocess(["check", "--config",
                           str(_config_path("weight_line.toml"))])
    assert finding.returncode == 1
    assert "(9.2)" in finding.stdout + finding.stderr

    bad = tmp_path / "broken.toml"
    bad.write_text("[fiber\nkind =")
    usage = _subprocess(["check", "--config", str(bad)])
    assert usage.returncode == 2
    assert "config error" in usage.stderr
