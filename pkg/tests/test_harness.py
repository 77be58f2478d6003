import json
import os

import numpy as np
import pytest

from hartree_lab.errors import ConfigError, LabError
from hartree_lab.harness.cli import main
from hartree_lab.harness.config import EXPERIMENTS, defaults, load_config
from hartree_lab.harness.experiments import run_experiment
from hartree_lab.harness.report import config_hash, load_checkpoint, save_checkpoint

SMALL = {"experiment": "exchange_scaling", "sweep": {"N": [64, 128, 256, 512]}, "fit_exclude": 0}


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


@pytest.mark.parametrize("exp", EXPERIMENTS)
def test_defaults_validate(exp):
    cfg = load_config(experiment=exp)
    assert cfg["experiment"] == exp


@pytest.mark.parametrize("patch, field", [
    ({"grid": {"points": 31}}, "grid.points"),
    ({"grid": {"extent": -1}}, "grid.extent"),
    ({"potential": {"kind": "yukawa"}}, "potential.kind"),
    ({"potential": {"kind": "gaussian", "sigma": 0}}, "potential.sigma"),
    ({"potential": {"kind": "cosine", "width": 1}}, "potential"),
    ({"time": {"dt": 2.0, "t_final": 1.0}}, "time.dt"),
    ({"sweep": {"N": [128, 64]}}, "sweep.N"),
    ({"sweep": {"N": []}}, "sweep.N"),
    ({"tolerances": {"slope": -1}}, "tolerances.slope"),
    ({"tolerances": {"bogus": 1}}, "tolerances.bogus"),
    ({"params": {"bogus": 1}}, "params.bogus"),
    ({"threads": 0}, "threads"),
    ({"colour": "red"}, "colour"),
])
def test_invalid_fields_are_named(patch, field):
    with pytest.raises(ConfigError) as err:
        load_config(experiment="exchange_scaling", overrides=patch)
    assert str(err.value).startswith(field)


def test_unknown_experiment_and_bad_files(tmp_path):
    with pytest.raises(ConfigError):
        defaults("nope")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(str(bad))
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.json"))
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, SMALL), experiment="residuals")


def test_potential_is_replaced_not_merged():
    cfg = load_config(experiment="residuals", overrides={"potential": {"kind": "cosine", "u0": 1.0, "k0": 1.0}})
    assert "sigma" not in cfg["potential"]


def test_config_hash_is_canonical():
    a = {"b": 1, "a": [1, 2]}
    assert config_hash(a) == config_hash({"a": [1, 2], "b": 1})
    assert config_hash(a) != config_hash({"a": [2, 1], "b": 1})


def test_report_artifacts_and_determinism(tmp_path):
    cfg = load_config(_write(tmp_path, SMALL))
    r1 = run_experiment(cfg, out=str(tmp_path / "a"))
    r2 = run_experiment(cfg, out=str(tmp_path / "b"))
    assert r1.passed and r2.passed
    names = sorted(os.listdir(tmp_path / "a"))
    assert {"manifest.json", "plotdata.csv", "exchange_vs_N.csv", "exchange_vs_N.png",
            "coulomb_vs_N.png"} <= set(names)
    for n in names:
        if n.endswith(".csv") or n.endswith(".png"):
            assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes(), n
    m = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert m["config_hash"] == config_hash(cfg) and m["passed"]
    assert {c["name"] for c in m["checks"]} >= {"exchange.slope", "coulomb.slope"}
    assert (tmp_path / "a" / "exchange_vs_N.csv").read_bytes().count(b"\r\n") == 5


def test_threads_do_not_change_results(tmp_path):
    one = run_experiment(load_config(_write(tmp_path, SMALL)))
    two = run_experiment(load_config(_write(tmp_path, dict(SMALL, threads=2), "t.json")))
    assert one.tables[0].rows == two.tables[0].rows


def test_cli_exit_codes(tmp_path, capsys):
    path = _write(tmp_path, SMALL)
    assert main(["exchange_scaling", "--config", path, "--out", str(tmp_path / "o")]) == 0
    assert "PASS" in capsys.readouterr().out
    assert main(["exchange_scaling", "--config", path, "--tol", "slope=0.0001"]) == 1
    assert "FAIL" in capsys.readouterr().out
    assert main(["exchange_scaling", "--config", path, "--tol", "nonsense=1"]) == 2
    with pytest.raises(SystemExit):
        main(["exchange_scaling", "--tol", "noequals"])


def test_checkpoint_round_trip(tmp_path):
    arrays = {"psi": np.arange(6, dtype=complex).reshape(2, 3), "t": np.array([0.5])}
    p = str(tmp_path / "ck.bin")
    save_checkpoint(p, arrays, {"step": 3})
    back, meta = load_checkpoint(p)
    assert meta == {"step": 3}
    assert all(np.array_equal(arrays[k], back[k]) for k in arrays)
    (tmp_path / "junk.bin").write_bytes(b"nope")
    with pytest.raises(LabError):
        load_checkpoint(str(tmp_path / "junk.bin"))
