import json

import numpy as np
import pytest

from fluidframe.cli_runner import ConfigError, main, parse_config_text, resolve_config
from fluidframe.diagnostics import SCHEMA_VERSION, read_rows

MINIMAL = """
[run]
scenario = minkowski
n = 16
"""


def test_minimal_config_gets_defaults():
    cfg, params, sweep, overrides = resolve_config(parse_config_text(MINIMAL), {})
    assert (cfg.scenario, cfg.n) == ("minkowski", 16)
    assert (cfg.fd_order, cfg.cfl, cfg.ko, cfg.kappa) == (4, 0.25, 0.0, 1.0)
    assert params == {} and overrides == {} and sweep == [16, 32, 64]


def test_cfl_out_of_range_rejected():
    with pytest.raises(ConfigError, match="cfl"):
        resolve_config(parse_config_text(MINIMAL + "cfl = 2.0\n"), {})


def test_unknown_key_reports_line_and_key():
    text = "[run]\nscenario = flrw\nresolution = 32\n"
    with pytest.raises(ConfigError) as info:
        parse_config_text(text, source="cfg.ini")
    assert "line 3" in str(info.value) and "'resolution'" in str(info.value)


def test_bad_value_and_section_rejected():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("[run]\nn = many\n")
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config_text("[grid]\nn = 8\n")
    with pytest.raises(ConfigError, match="unknown scenario"):
        resolve_config(parse_config_text("[run]\nscenario = kerr\n"), {})


def test_scenario_section_parsed():
    text = MINIMAL + "\n[scenario]\namplitude = 1e-4\nwavevector = 0 1 0\n\n[sweep]\nn_values = 8 16\n"
    cfg, params, sweep, _ = resolve_config(parse_config_text(text), {})
    assert params == {"amplitude": 1e-4, "wavevector": (0.0, 1.0, 0.0)}
    assert sweep == [8, 16]


def test_flag_wins_and_is_recorded(tmp_path, capsys):
    cfgfile = tmp_path / "run.ini"
    cfgfile.write_text("[run]\nscenario = flrw\nn = 8\nt_final = 0.05\ncfl = 0.2\n")
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfgfile), "--cfl", "0.25", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["cfl"] == 0.25
    assert manifest["overrides"] == {"cfl": {"file": 0.2, "flag": 0.25}}
    assert manifest["exit_status"] == "ok"
    assert manifest["csv_schema_version"] == SCHEMA_VERSION
    assert set(manifest["files"]) == {"diagnostics.csv", "manifest.json"}


def test_run_csv_columns(tmp_path):
    out = tmp_path / "flrw"
    assert main(["run", "--scenario", "flrw", "--n", "8", "--t-final", "0.05", "--out", str(out)]) == 0
    rows = read_rows(out / "diagnostics.csv")
    for key in ("t", "rho", "hubble_trace", "torsion_linf", "d_tensor_linf", "friedrich_div_linf", "q_linf"):
        assert key in rows[0]
    assert rows[-1]["t"] == pytest.approx(0.05)
    assert rows[0]["hubble_trace"] == pytest.approx(np.sqrt(2.0 / 3.0))


def test_unwritable_output_dir_exits_2(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code = main(["run", "--scenario", "minkowski", "--n", "8", "--t-final", "0.01", "--out", str(blocker / "sub")])
    assert code == 2
    assert "I/O error" in capsys.readouterr().err


def test_missing_config_exits_2(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.ini")]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_numerical_failure_exits_1(tmp_path, monkeypatch, capsys):
    import fluidframe.cli_runner as cli
    from fluidframe.evolution import NumericalBreakdown

    def blow_up(*args, **kwargs):
        raise NumericalBreakdown("non-finite values at t=0.01")

    monkeypatch.setattr(cli, "evolve", blow_up)
    out = tmp_path / "fail"
    assert main(["run", "--scenario", "flrw", "--n", "8", "--t-final", "0.05", "--out", str(out)]) == 1
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["exit_status"] == "numerical_failure"
    assert "non-finite" in manifest["message"] and manifest["files"] == ["manifest.json"]


@pytest.mark.parametrize(
    "scenario_section",
    ["eos = linear\nc = 0\n", "amplitude = 3.0\n", "r0 = -1\n"],
)
def test_inadmissible_scenario_parameters_exit_2(tmp_path, capsys, scenario_section):
    cfgfile = tmp_path / "bad.ini"
    cfgfile.write_text("[run]\nscenario = perturbed_flrw\nn = 8\nt_final = 0.01\n\n[scenario]\n" + scenario_section)
    assert main(["run", "--config", str(cfgfile), "--out", str(tmp_path / "o")]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_dt_above_cfl_exits_2(tmp_path, capsys):
    assert main(["run", "--scenario", "flrw", "--n", "8", "--t-final", "0.1", "--dt", "0.1", "--out", str(tmp_path)]) == 2
    assert "CFL" in capsys.readouterr().err


def test_sweep_rejects_bad_resolution_before_running(tmp_path, capsys):
    out = tmp_path / "s"
    assert main(["sweep", "--scenario", "flrw", "--n-values", "8", "4", "--out", str(out)]) == 2
    assert not out.exists()


def test_speeds_command(capsys):
    assert main(["speeds", "--scenario", "minkowski", "--n", "8", "--kappa", "0", "--direction", "0", "0", "2"]) == 0
    line = capsys.readouterr().out.strip().splitlines()[-1]
    speeds = sorted(float(s) for s in line.split("speeds:")[1].split())
    nu = np.sqrt(2.0 / 3.0)
    np.testing.assert_allclose(speeds, [-1.0, -nu, -0.5, 0.0, 0.5, nu, 1.0], atol=1e-9)


def test_check_initial_data(tmp_path, capsys):
    out = tmp_path / "check"
    assert main(["check-initial-data", "--scenario", "boosted_uniform", "--n", "8", "--kappa", "0", "--out", str(out)]) == 0
    report = json.loads((out / "initial_data.json").read_text())
    assert report["hamiltonian_linf"] < 1e-13 and report["momentum_linf"] < 1e-13
    assert report["lorentz_orthogonality"] < 1e-13 and report["u_normalization"] < 1e-13
    assert report["torsion_linf"] < 1e-13


def test_sweep_writes_manifests_and_table(tmp_path, capsys):
    out = tmp_path / "sweep"
    args = ["sweep", "--scenario", "flrw", "--n-values", "8", "16", "--t-final", "0.02", "--out", str(out)]
    assert main(args) == 0
    for n in (8, 16):
        assert json.loads((out / f"n{n}" / "manifest.json").read_text())["grid"]["n"] == n
    table = json.loads((out / "convergence.json").read_text())
    assert table["n_values"] == [8, 16]
    assert [r["quantity"] for r in table["table"]] == ["torsion_linf", "d_tensor_linf", "friedrich_div_linf", "q_linf"]


def test_sweep_needs_two_resolutions(tmp_path, capsys):
    assert main(["sweep", "--scenario", "flrw", "--n-values", "8", "--out", str(tmp_path / "s")]) == 2
