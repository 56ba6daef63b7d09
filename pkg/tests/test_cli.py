import csv
import io
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ruelle.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, dispatch, fmt, main
from ruelle.config import RunConfig, parse_config
from ruelle.errors import ConfigError


def test_parse_zero_potential():
    cfg = parse_config("system.name = doubling\npotential.kind = geometric\npotential.t = 0")
    assert cfg.system().name == "doubling" and cfg.potential().t == 0.0


def test_parse_middle_thirds_and_defaults():
    cfg = parse_config("# comment\nsystem.name = linear_cantor  # trailing\nsystem.N = 2\nsystem.r = 3\n\n")
    assert cfg.system().params == (2, 3.0)
    assert (cfg.grid_size, cfg.depth, cfg.trunc_epsilon, cfg.tol, cfg.tol_t, cfg.max_iter) == \
        (257, 12, 1e-10, 1e-9, 1e-8, 10000)
    assert cfg.resolved_anchor() == 0.5


def test_gauss_low_t_parses_then_diverges(tmp_path, capsys):
    cfg = parse_config("system.name = gauss\npotential.t = 0.4")
    assert dispatch("pressure", cfg) == EXIT_NUMERIC
    assert "DIVERGENT" in capsys.readouterr().err


@pytest.mark.parametrize("text,where", [
    ("system.nam = doubling", "line 1: unknown key 'system.nam'"),
    ("system.name = henon", "key 'system.name'"),
    ("potential.t = 1\npotential.t = 2", "line 2: duplicate key 'potential.t'"),
    ("run.grid_size = 1", "key 'run.grid_size'"),
    ("run.tol = 0", "key 'run.tol'"),
    ("run.depth = 2.5", "key 'run.depth'"),
    ("system.name = doubling\nrun.anchor = -1", "line 2: key 'run.anchor'"),
    ("potential.kind = quantum", "key 'potential.kind'"),
    ("potential.kind = builtin\npotential.name = sine", "line 2: key 'potential.name'"),
    ("potential.kind = constant\npotential.values = 1,2,3", "key 'potential.values'"),
    ("system.name = gauss\nsystem.eps = 0.1", "line 2: key 'system.eps'"),
    ("this is not a key", "line 1"),
    ("run.depth =", "line 1: key 'run.depth'"),
    ("system.name = perturbed_doubling\nsystem.eps = 0.3", "key 'system.name'"),
])
def test_parse_errors_name_line_and_key(text, where):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert where in str(info.value)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_seventeen_digits_round_trip(x):
    assert float(fmt(x)) == x


def _write(tmp_path, text):
    p = tmp_path / "run.cfg"
    p.write_text(text)
    return str(p)


def test_dimension_command(tmp_path, capsys):
    path = _write(tmp_path, "system.name = linear_cantor\nsystem.N = 2\nsystem.r = 3\n")
    assert main(["dimension", "--config", path]) == EXIT_OK
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["s_hat", "t_lo", "t_hi", "pressure_lower_at_s", "pressure_upper_at_s"]
    assert float(rows[1][0]) == pytest.approx(math.log(2) / math.log(3), abs=1e-7)


def test_pressure_command_and_overrides(tmp_path, capsys):
    path = _write(tmp_path, "system.name = doubling\n")
    assert main(["pressure", "--config", path, "--t", "0", "--depth", "5"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "depth=5" in out and f"point={fmt(math.log(2))}" in out
    csv_path = tmp_path / "p.csv"
    assert main(["pressure", "--config", path, "--out", str(csv_path)]) == EXIT_OK
    rows = list(csv.reader(csv_path.open()))
    assert rows[0] == ["potential", "depth", "lower", "point", "upper", "anchor"]


def test_curve_command(tmp_path):
    path = _write(tmp_path, "system.name = golden_cantor\n")
    out = tmp_path / "curve.csv"
    assert main(["curve", "--config", path, "--t-min", "0", "--t-max", "1", "--t-steps", "5",
                 "--out", str(out)]) == EXIT_OK
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["t", "depth", "lower", "point", "upper"]
    assert [float(r[0]) for r in rows[1:]] == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert float(rows[1][3]) == pytest.approx(math.log(2))


def test_eigen_command(tmp_path):
    path = _write(tmp_path, "system.name = doubling\npotential.t = 1\nrun.grid_size = 9\n")
    out = tmp_path / "eigen.csv"
    assert main(["eigen", "--config", path, "--out", str(out)]) == EXIT_OK
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["x", "h"] and len(rows) == 10
    assert all(float(r[1]) == 1.0 for r in rows[1:])


def test_measure_command(tmp_path):
    path = _write(tmp_path, "system.name = doubling\npotential.t = 0\nrun.depth = 4\n")
    out = tmp_path / "meas.csv"
    assert main(["measure", "--config", path, "--out", str(out)]) == EXIT_OK
    mu = list(csv.reader((tmp_path / "meas_mu.csv").open()))
    m = list(csv.reader((tmp_path / "meas_m.csv").open()))
    assert mu[0] == ["word", "representative", "weight"] and len(mu) == 17
    assert mu[1][0] == "1-1-1-1" and float(mu[1][2]) == 1 / 16
    assert mu == m


def test_gibbs_command(tmp_path, capsys):
    path = _write(tmp_path, "system.name = perturbed_doubling\nsystem.eps = 0.05\n")
    assert main(["gibbs", "--config", path, "--depth", "8"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("# C_hat=") and out.count("pass") == 8


def test_verify_command(tmp_path, capsys):
    path = _write(tmp_path, "system.name = doubling\npotential.t = 0\n")
    assert main(["verify", "--config", path]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert all(line.startswith("PASS") for line in lines[:-1])
    assert lines[-1].endswith("passed")


def test_verify_reports_failures(tmp_path, capsys):
    # max_iter too small: the eigen solver cannot converge
    path = _write(tmp_path, "system.name = gauss\nrun.max_iter = 2\n")
    assert main(["verify", "--config", path]) == EXIT_NUMERIC


def test_exit_codes(tmp_path, capsys):
    assert main(["pressure", "--config", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG
    assert main(["pressure"]) == EXIT_CONFIG
    assert main(["explode", "--config", "x"]) == EXIT_CONFIG
    path = _write(tmp_path, "system.name = gauss\n")
    assert main(["dimension", "--config", path]) == EXIT_CONFIG
    path = _write(tmp_path, "potential.kind = builtin\npotential.name = cosine\n")
    assert main(["pressure", "--config", path, "--t", "1"]) == EXIT_CONFIG
    path = _write(tmp_path, "system.name = linear_cantor\ndimension.t_lo = 0.9\ndimension.t_hi = 1.5\n")
    assert main(["dimension", "--config", path]) == EXIT_NUMERIC
    assert "NO_SIGN_CHANGE" in capsys.readouterr().err


def test_gibbs_failure_exit_code(tmp_path):
    # a bracket check that fails maps to exit code 1
    from ruelle import cli

    class Bad:
        ok = False
        C_hat = 1.0
        levels = []

    orig = cli.measures.gibbs_verify
    cli.measures.gibbs_verify = lambda *a, **k: Bad()
    try:
        cfg = RunConfig(system_name="doubling", depth=3)
        assert dispatch("gibbs", cfg, io.StringIO()) == EXIT_CHECK
    finally:
        cli.measures.gibbs_verify = orig


def test_replace_revalidates():
    with pytest.raises(ConfigError):
        parse_config("system.name = doubling").replace(depth=0)
