import json

import pytest

from modulon.cli import (EXIT_BAD_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE,
                         main, parse_config, build_model)
from modulon.errors import ConfigError


BASE_CFG = """\
[model]
symbol = bbm
[wave]
m = 2
a = 0.05
[numerics]
N = 64
k_count = 32
[output]
dir = {out}
"""


def write_cfg(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_parse_config_happy(tmp_path):
    cfg = parse_config(write_cfg(tmp_path, BASE_CFG.format(out=tmp_path)))
    assert cfg.get("numerics", "N") == 64
    assert cfg.get("wave", "m") == 2.0
    model = build_model(cfg)
    assert model.family == "bbm"
    assert model.kappa == 2.0


def test_parse_config_unknown_key(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(write_cfg(tmp_path, "[wave]\nbogus = 1\n"))


def test_parse_config_unknown_section(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(write_cfg(tmp_path, "[nonsense]\nx = 1\n"))


def test_parse_config_bad_value(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(write_cfg(tmp_path, "[numerics]\nN = елка\n"))


def test_parse_config_out_of_range(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(write_cfg(tmp_path, "[wave]\na = 0.5\n"))


def test_usage_exit_code(tmp_path):
    path = write_cfg(tmp_path, "[wave]\nbogus = 1\n")
    assert main(["wave", path]) == EXIT_USAGE


def test_missing_wave_is_bad_data(tmp_path):
    path = write_cfg(tmp_path, BASE_CFG.format(out=tmp_path))
    code = main(["spectrum", path, "--wave", str(tmp_path / "missing"),
                 "--jobs", "1"])
    assert code == EXIT_BAD_DATA


def test_pipeline_wave_spectrum_verify_evolve(tmp_path, capsys):
    path = write_cfg(tmp_path, BASE_CFG.format(out=tmp_path) +
                     "[evolve]\nt_end = 2.0\nsnap_every = 10\n")
    assert main(["wave", path, "--name", "w"]) == EXIT_OK
    assert (tmp_path / "w.fld").exists()
    sidecar = json.loads((tmp_path / "w.json").read_text())
    assert sidecar["converged"]
    assert abs(sidecar["c"] - (0.2 - 0.05 ** 2 * 5 / 24)) < 1e-5
    assert "provenance" in sidecar

    wave_base = str(tmp_path / "w")
    assert main(["spectrum", path, "--wave", wave_base, "--name", "s",
                 "--jobs", "1"]) == EXIT_OK
    summary = json.loads((tmp_path / "s.json").read_text())
    assert summary["lambda0"] > 1e-8
    assert summary["bands"]
    assert summary["q"] <= 8
    csv_lines = (tmp_path / "s.csv").read_text().splitlines()
    assert csv_lines[0].startswith("# modulon=")
    assert csv_lines[1] == "k,re_lambda,im_lambda"

    assert main(["verify", path, "--wave", wave_base, "--name", "v",
                 "--jobs", "1"]) == EXIT_OK
    verdicts = json.loads((tmp_path / "v.json").read_text())
    assert verdicts["pass"] is True
    assert verdicts["trichotomy"]["dim_Eu"] == verdicts["trichotomy"]["dim_Es"]

    assert main(["evolve", path, "--wave", wave_base, "--name", "e",
                 "--jobs", "1"]) == EXIT_OK
    rows = (tmp_path / "e.csv").read_text().splitlines()
    assert rows[1] == ("t,l2_perturbation,orbital_distance,mass_drift,"
                       "momentum_drift,energy_drift")
    last = rows[-1].split(",")
    assert abs(float(last[5])) < 1e-9     # equilibrium: tiny energy drift


def test_spectrum_determinism(tmp_path):
    path = write_cfg(tmp_path, BASE_CFG.format(out=tmp_path))
    assert main(["wave", path, "--name", "w"]) == EXIT_OK
    wave_base = str(tmp_path / "w")
    assert main(["spectrum", path, "--wave", wave_base, "--name", "s1",
                 "--jobs", "1"]) == EXIT_OK
    assert main(["spectrum", path, "--wave", wave_base, "--name", "s2",
                 "--jobs", "1"]) == EXIT_OK
    assert (tmp_path / "s1.csv").read_bytes() == (tmp_path / "s2.csv").read_bytes()


def test_experiment_on_stable_wave_is_numeric_failure(tmp_path):
    cfg_text = """\
[model]
symbol = bbm
[wave]
m = 1.5
a = 0.05
[numerics]
N = 64
k_count = 32
[experiment]
deltas = 1e-3
[output]
dir = {out}
""".format(out=tmp_path)
    path = write_cfg(tmp_path, cfg_text)
    assert main(["wave", path, "--name", "w15"]) == EXIT_OK
    code = main(["experiment", path, "--wave", str(tmp_path / "w15"),
                 "--jobs", "1"])
    assert code == EXIT_NUMERIC


def test_env_override_output(tmp_path, monkeypatch):
    other = tmp_path / "elsewhere"
    monkeypatch.setenv("MODULON_OUT", str(other))
    path = write_cfg(tmp_path, BASE_CFG.format(out=tmp_path))
    assert main(["wave", path, "--name", "w"]) == EXIT_OK
    assert (other / "w.fld").exists()


def test_report_subcommand(tmp_path, capsys):
    path = write_cfg(tmp_path, BASE_CFG.format(out=tmp_path))
    assert main(["wave", path, "--name", "w"]) == EXIT_OK
    assert main(["report", path]) == EXIT_OK
    out = capsys.readouterr().out
    assert "w.json" in out


def test_wave_zero_amplitude_whitham(tmp_path):
    cfg_text = """\
[model]
symbol = whitham
[wave]
a = 0.0
kappa = 1.0
[numerics]
N = 32
[output]
dir = {out}
""".format(out=tmp_path)
    path = write_cfg(tmp_path, cfg_text)
    assert main(["wave", path, "--name", "z"]) == EXIT_OK
    sidecar = json.loads((tmp_path / "z.json").read_text())
    import numpy as np
    assert abs(sidecar["c"] - np.sqrt(np.tanh(1.0))) < 1e-12  # c = alpha(kappa)
    assert sidecar["amplitude"] == 0.0


def test_experiment_multiperiodic_through_cli(tmp_path):
    cfg_text = """\
[model]
symbol = whitham
[wave]
a = 0.05
kappa = 2.0
[numerics]
N = 96
k_count = 48
[experiment]
deltas = 1e-3
[output]
dir = {out}
""".format(out=tmp_path)
    path = write_cfg(tmp_path, cfg_text)
    assert main(["wave", path, "--name", "wk"]) == EXIT_OK
    assert main(["experiment", path, "--wave", str(tmp_path / "wk"),
                 "--name", "exp", "--jobs", "1"]) == EXIT_OK
    obj = json.loads((tmp_path / "exp.json").read_text())
    assert obj["kind"] == "multiperiodic"
    assert obj["q"] <= 8
    run = obj["runs"][0]
    assert run["escaped"]
    assert abs(run["growth_rate"] - obj["reference_rate"]) \
        <= 0.05 * obj["reference_rate"]
    assert (tmp_path / "exp_delta0.csv").exists()


def test_experiment_localized_kind(tmp_path):
    cfg_text = """\
[model]
symbol = whitham
[wave]
a = 0.05
kappa = 2.0
[numerics]
N = 96
k_count = 48
[experiment]
kind = localized
deltas = 1e-2
Q = 64
[output]
dir = {out}
""".format(out=tmp_path)
    path = write_cfg(tmp_path, cfg_text)
    assert main(["wave", path, "--name", "wk"]) == EXIT_OK
    code = main(["experiment", path, "--wave", str(tmp_path / "wk"),
                 "--name", "loc", "--jobs", "1"])
    assert code == EXIT_OK
    obj = json.loads((tmp_path / "loc.json").read_text())
    assert obj["kind"] == "localized"
    assert obj["packet"]["Q"] == 64
    assert abs(obj["packet"]["lambda_fit"] - obj["lambda0"]) \
        <= 0.05 * obj["lambda0"]
