import csv
import json
import math
import os
import shutil
import subprocess
import sys

import pytest

from entroflow import cli
from entroflow.cli import (EXIT_BOUNDARY, EXIT_CONFIG, EXIT_FAIL, EXIT_INCONCLUSIVE,
                           EXIT_NUMERIC, EXIT_OK, main, scenario_names)
from entroflow.space import TruncationWarning

CIRCLE = {"preset": "circle", "grid_size": 128}
TIMES = {"start": 0.05, "stop": 1.0, "num": 21}


def _write(tmp_path, name, cfg):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def _run(tmp_path, command, cfg, *flags, out="out"):
    path = _write(tmp_path, f"{command}.json", cfg)
    d = tmp_path / out
    return main([command, "--config", path, "--out", str(d), *flags]), d


def _header(path):
    with open(path) as fh:
        return next(csv.reader(fh))


def test_scenarios_listed(capsys):
    assert main(["scenarios"]) == EXIT_OK
    names = capsys.readouterr().out.split()
    assert names == scenario_names()
    for expected in ("circle_flat", "cone_rigidity", "gaussian_saturation_N2", "line_lsi"):
        assert expected in names


def test_space_outputs_and_headers(tmp_path):
    code, d = _run(tmp_path, "space", {"space": CIRCLE})
    assert code == EXIT_OK
    assert _header(d / "space.csv") == ["x", "m", "V", "dV", "d2V", "k_eff"]
    assert _header(d / "volumes.csv") == ["r", "ball_volume", "bg_margin"]
    rows = list(csv.DictReader(open(d / "space.csv")))
    assert all(float(r["k_eff"]) == 0.0 for r in rows)


def test_space_accepts_bare_preset(tmp_path):
    code, d = _run(tmp_path, "space", {"preset": "cone_half_line", "N": 2, "grid_size": 2001})
    assert code == EXIT_OK
    kappa = json.loads((d / "kappa.json").read_text())
    assert kappa["converged"] and abs(kappa["kappa"] - 1 / (2 * math.pi)) < 1e-3


def test_custom_V_with_null_is_a_config_error(tmp_path, capsys):
    table = [[0, 0], [1, 0.5], [2, None], [3, 1.0]]
    space = {"preset": "custom", "N": 2, "grid_size": 64, "truncation": 2.5, "custom_V": table}
    code, _ = _run(tmp_path, "space", {"space": space})
    assert code == EXIT_CONFIG
    assert "space.custom_V" in capsys.readouterr().err


@pytest.mark.parametrize("cfg, key", [
    ({"space": dict(CIRCLE, grid_size=8)}, "space.grid_size"),
    ({"space": dict(CIRCLE, colour="red")}, "space.colour"),
    ({"space": {"grid_size": 64}}, "space.preset"),
])
def test_space_schema_errors_name_the_key(tmp_path, capsys, cfg, key):
    code, _ = _run(tmp_path, "space", cfg)
    assert code == EXIT_CONFIG
    assert key in capsys.readouterr().err


def test_flow_config_errors(tmp_path):
    base = {"space": CIRCLE, "initial": {"kind": "trig", "cos": [0.3]}}
    assert _run(tmp_path, "flow", dict(base, flow={"times": []}))[0] == EXIT_CONFIG
    assert _run(tmp_path, "flow", dict(base, flow={"solver": "cn", "times": [0.1]}))[0] \
        == EXIT_CONFIG
    assert _run(tmp_path, "flow", {"flow": {"times": [0.1]}, "model": {"name": "euclidean",
                                                                        "N": 1}})[0] == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["flow", "--config", str(bad), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert main(["flow", "--scenario", "nope", "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_flow_outputs(tmp_path):
    cfg = {"space": CIRCLE, "initial": {"kind": "trig", "cos": [0.3]},
           "flow": {"solver": "cn", "dt": 1e-3, "times": TIMES}, "N": 1}
    code, d = _run(tmp_path, "flow", cfg)
    assert code == EXIT_OK
    assert _header(d / "flow.csv") == ["t", "x", "u"]
    from entroflow.functionals import SERIES_HEADER

    assert tuple(_header(d / "functionals.csv")) == SERIES_HEADER


def test_flow_boundary_contamination_strict_exit_4(tmp_path):
    cfg = {"space": {"preset": "cone_half_line", "N": 2, "grid_size": 201, "truncation": 2.0},
           "initial": {"kind": "kernel", "t0": 0.05}, "flow": {"times": [0.1, 1.0]}}
    with pytest.warns(TruncationWarning):
        assert _run(tmp_path, "flow", cfg, "--strict")[0] == EXIT_BOUNDARY
    with pytest.warns(TruncationWarning):
        assert _run(tmp_path, "flow", cfg, out="lenient")[0] == EXIT_OK


def test_verify_pass_and_fail_exit_codes(tmp_path, capsys):
    cfg = {"space": CIRCLE, "initial": {"kind": "trig", "cos": [0.5]},
           "flow": {"times": TIMES}, "N": 1,
           "checks": [{"name": "edi"}, {"name": "w_monotone"}, {"name": "edi", "K": 0.0}]}
    code, d = _run(tmp_path, "verify", cfg)
    assert code == EXIT_OK
    report = json.loads((d / "report.json").read_text())
    assert [r["name"] for r in report["results"]] == ["edi", "w_monotone", "edi_2"]
    assert report["environment"] == {"grid_size": 128, "solver": "spectral"}
    assert (d / "edi_2.csv").exists() and _header(d / "edi.csv") == ["t", "margin"]
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 3 and out[0].split()[1] == "pass"
    cfg["checks"] = [{"name": "edi", "K": 1.0}]
    assert _run(tmp_path, "verify", cfg, out="neg")[0] == EXIT_FAIL


def test_verify_inconclusive_strict_exit_5(tmp_path):
    cfg = {"space": {"preset": "sphere_zonal", "n": 2, "grid_size": 201},
           "initial": {"kind": "legendre", "coeffs": [0.5]},
           "partner": {"initial": {"kind": "legendre", "coeffs": [-0.5]}},
           "flow": {"times": [0.05, 0.1]}, "checks": [{"name": "eks", "t": 0.05, "K": 1e4}]}
    assert _run(tmp_path, "verify", cfg)[0] == EXIT_OK
    assert _run(tmp_path, "verify", cfg, "--strict", out="strict")[0] == EXIT_INCONCLUSIVE


def test_verify_pair_checks_need_partner_and_time(tmp_path, capsys):
    cfg = {"space": CIRCLE, "initial": {"kind": "trig", "cos": [0.5]},
           "flow": {"times": TIMES}, "checks": [{"name": "hwi", "t": 0.1}]}
    assert _run(tmp_path, "verify", cfg)[0] == EXIT_CONFIG
    assert "partner" in capsys.readouterr().err
    cfg["partner"] = {"initial": {"kind": "trig", "cos": [-0.2]}}
    cfg["checks"] = [{"name": "hwi"}]
    assert _run(tmp_path, "verify", cfg)[0] == EXIT_CONFIG
    assert "checks.0.t" in capsys.readouterr().err


def test_lsi_outputs_and_nonconvergence(tmp_path):
    cfg = {"space": CIRCLE, "N": 1, "t": 2.0, "initial": {"kind": "random", "modes": 3}}
    code, d = _run(tmp_path, "lsi", cfg)
    assert code == EXIT_OK
    res = json.loads((d / "result.json").read_text())
    assert res["converged"] and set(res) >= {"mu", "el_residual", "iters"}
    assert _header(d / "minimizer.csv") == ["x", "rho"]
    cfg["max_iter"] = 1
    assert _run(tmp_path, "lsi", cfg, "--strict", out="strict")[0] == EXIT_NUMERIC
    assert _run(tmp_path, "lsi", cfg, out="lenient")[0] == EXIT_OK


def test_rigidity_json(tmp_path):
    code, d = _run(tmp_path, "rigidity", {
        "space": {"preset": "cone_half_line", "N": 2, "grid_size": 1001, "truncation": 10},
        "initial": {"kind": "kernel"}, "flow": {"times": {"start": 0.05, "stop": 0.5, "num": 11}}})
    assert code == EXIT_OK
    doc = json.loads((d / "rigidity.json").read_text())
    assert doc["status"] == "RIGID"
    assert set(doc["criteria"]) == {"h_sup", "W_range", "lap_dev", "bg_max"}


def test_repeat_runs_are_byte_identical(tmp_path):
    a = main(["verify", "--scenario", "circle_flat", "--out", str(tmp_path / "a")])
    b = main(["verify", "--scenario", "circle_flat", "--out", str(tmp_path / "b")])
    assert a == b == EXIT_OK
    names = sorted(os.listdir(tmp_path / "a"))
    assert names == sorted(os.listdir(tmp_path / "b"))
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes(), n


def test_seed_changes_only_random_densities(tmp_path):
    cfg = {"space": CIRCLE, "initial": {"kind": "random"}, "flow": {"times": [0.1]}}
    _run(tmp_path, "flow", cfg, "--seed", "1", out="s1")
    _run(tmp_path, "flow", cfg, "--seed", "2", out="s2")
    assert (tmp_path / "s1" / "flow.csv").read_bytes() != (tmp_path / "s2" / "flow.csv").read_bytes()


def test_plots_written(tmp_path):
    assert main(["verify", "--scenario", "gaussian_saturation_N2", "--out",
                 str(tmp_path / "v"), "--plots"]) == EXIT_OK
    assert (tmp_path / "v" / "margins.png").stat().st_size > 0
    assert main(["flow", "--scenario", "circle_flow", "--out", str(tmp_path / "f"),
                 "--plots"]) == EXIT_OK
    assert (tmp_path / "f" / "flow.png").exists() and (tmp_path / "f" / "functionals.png").exists()
    assert main(["space", "--scenario", "cone_space", "--out", str(tmp_path / "s"),
                 "--plots"]) == EXIT_OK
    assert (tmp_path / "s" / "space.png").exists()
    assert main(["lsi", "--scenario", "line_lsi", "--out", str(tmp_path / "l"),
                 "--plots"]) == EXIT_OK
    assert (tmp_path / "l" / "minimizer.png").exists()


@pytest.mark.parametrize("name", scenario_names())
def test_every_scenario_validates(name):
    cfg = cli.load_config(scenario=name)
    for command in ("verify", "lsi", "flow", "space", "rigidity"):
        try:
            cli.validate_config(command, cfg)
            return
        except cli.ConfigError:
            continue
    pytest.fail(f"scenario {name} matches no command schema")


def test_console_script(tmp_path):
    exe = shutil.which("entroflow")
    cmd = [exe] if exe else [sys.executable, "-m", "entroflow.cli"]
    proc = subprocess.run(cmd + ["verify", "--scenario", "circle_negative", "--out",
                                 str(tmp_path / "n")], capture_output=True, text=True)
    assert proc.returncode == EXIT_FAIL
    assert "fail" in proc.stdout
