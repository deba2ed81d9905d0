import os
import xml.etree.ElementTree as ET

import numpy as np
import pytest
import yaml

from pilotwave_com.artifacts import emit_csv, emit_svg, format_float, read_csv
from pilotwave_com.cli import main
from pilotwave_com.config import load_preset, preset_names, resolve_config
from pilotwave_com.errors import ConfigError


def test_csv_three_point_series(tmp_path):
    path = tmp_path / "tiny.csv"
    emit_csv(path, ["t", "value"], [[0.0, 0.1, 0.2], [1.0, 2.0, 3.0]])
    lines = path.read_text().strip().split("\n")
    assert len(lines) == 4
    assert lines[0] == "t,value"


def test_csv_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    data = rng.normal(size=50) * 10.0 ** rng.integers(-12, 12, size=50)
    path = tmp_path / "rt.csv"
    emit_csv(path, ["v"], [data])
    _, (back,) = read_csv(path)
    assert np.array_equal(back, data)


def test_format_float_round_trip():
    for v in (1 / 3, 1e-300, -2.5e17, 0.1 + 0.2):
        assert float(format_float(v)) == v


def test_svg_well_formed(tmp_path):
    path = tmp_path / "plot.svg"
    x = np.linspace(0, 1, 20)
    emit_svg(path, x, [np.sin(x), np.cos(x)], labels=["s", "c"], title="demo")
    root = ET.parse(path).getroot()
    polylines = [e for e in root.iter() if e.tag.endswith("polyline")]
    assert len(polylines) == 2


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="numerics.dx"):
        resolve_config({"experiment": "fig1", "numerics": {"dx": 0.1}})


def test_unknown_top_level_key_rejected():
    with pytest.raises(ConfigError, match="unknown key wavelength"):
        resolve_config({"experiment": "fig1", "wavelength": 1.0})


def test_bad_type_rejected():
    with pytest.raises(ConfigError, match="seed"):
        resolve_config({"experiment": "fig1", "seed": "tomorrow"})


def test_missing_experiment_rejected():
    with pytest.raises(ConfigError, match="experiment"):
        resolve_config({"seed": 1})


def test_defaults_echoed():
    cfg = resolve_config({"experiment": "fig2"})
    assert cfg["numerics"]["dt"] == 1e-3
    assert cfg["physics"]["packet"]["sigma"] == 1.0
    assert cfg["output"]["svg"] is True


def test_presets_all_resolve():
    names = preset_names()
    assert names == sorted(names)
    for name in names:
        cfg = load_preset(name)
        assert cfg["experiment"] in name or name == "cat-state"


def test_list_presets_cli(capsys):
    assert main(["list-presets"]) == 0
    out = capsys.readouterr().out.split()
    assert "fig1" in out and "appendix-a" in out


def test_cli_run_appendix_a(tmp_path, capsys):
    code = main(["run", "appendix-a", "--check", "--out", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "[PASS]" in out
    assert (tmp_path / "run_metadata.json").exists()
    assert (tmp_path / "resolved_config.yaml").exists()


def test_cli_rejects_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("experiment: fig1\nnumerics:\n  dx: 0.1\n")
    assert main(["run", str(bad), "--out", str(tmp_path / "out")]) == 2
    assert "dx" in capsys.readouterr().err


def test_cli_env_var_output(tmp_path, capsys, monkeypatch):
    target = tmp_path / "from-env"
    monkeypatch.setenv("PILOTWAVE_COM_OUT", str(target))
    assert main(["run", "appendix-b"]) == 0
    assert (target / "identities.csv").exists()


def test_cli_numeric_failure_exit_code(tmp_path, capsys):
    # deliberately under-resolved fast packet: the parabola gate must fail
    cfg = {
        "experiment": "custom",
        "seed": 1,
        "physics": {
            "packet": {"sigma": 1.0, "x0": -15.0, "k0": 10.0},
            "potential": {"kind": "linear", "slope": 2.0},
        },
        "numerics": {
            "grid": {"x_min": -40.0, "x_max": 28.0, "n_points": 400},
            "dt": 5.0e-3,
            "t_max": 3.0,
            "record_stride": 100,
            "n_trajectories": 64,
        },
    }
    path = tmp_path / "bad_numerics.yaml"
    path.write_text(yaml.safe_dump(cfg))
    code = main(["run", str(path), "--check", "--out", str(tmp_path / "out")])
    assert code == 1
    assert "[FAIL]" in capsys.readouterr().out


def test_cat_state_run_deterministic(tmp_path, capsys):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert main(["run", "cat-state", "--check", "--out", str(out_a)]) == 0
    assert main(["run", "cat-state", "--check", "--out", str(out_b)]) == 0
    capsys.readouterr()
    csv_a = (out_a / "cat_summary.csv").read_bytes()
    csv_b = (out_b / "cat_summary.csv").read_bytes()
    assert csv_a == csv_b


def test_seed_override_changes_output(tmp_path, capsys):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert main(["run", "cat-state", "--out", str(out_a)]) == 0
    assert main(["run", "cat-state", "--seed", "99", "--out", str(out_b)]) == 0
    capsys.readouterr()
    assert (out_a / "cat_summary.csv").read_bytes() \
        != (out_b / "cat_summary.csv").read_bytes()
