import json

import pytest

from weakkam import cli
from weakkam.config import ConfigError, barrier_key, bundled_configs, load_config, validate

SMALL = {
    "model": {"family": "mechanical", "potential": [[2, 1.0, 0.0]]},
    "alpha": {"kind": "vanishing_band", "start": 0.55, "end": 0.70},
    "alpha_alternatives": [{"kind": "constant", "level": 1.0}],
    "grid": {"N": 64, "K": 4, "dt": 1 / 32},
    "ladder": {"rungs": 6},
}

CSVS = ["critical.csv", "barrier.csv", "aubry.csv", "mather.csv", "discounted.csv", "trajectory.csv",
        "ladder.csv", "selection.csv"]


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return str(p)


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_defaults():
    cfg = validate({"model": {"family": "mechanical", "potential": [[2, 1.0, 0.0]]},
                    "alpha": {"kind": "vanishing_band", "start": 0.55, "end": 0.70}})
    assert (cfg.N, cfg.K, cfg.dt) == (256, 4, 1 / 64)
    assert len(cfg.lambdas) == 10 and cfg.lambdas[0] == 0.5 and cfg.lambdas[-1] == 0.5 * 2**-9
    assert cfg.tol_h == pytest.approx(256e-9)
    assert cfg.tol_aubry == pytest.approx(10 * cfg.tol_h)
    assert cfg.tol_sel == pytest.approx(1e-6 * 256 / 64)
    assert cfg.tol_fp == 1e-10 and cfg.tol_mmc == 1e-9 and cfg.tol_tight is None


@pytest.mark.parametrize("doc, where", [
    ({"grdi": {}}, "grdi"),
    ({"grid": {"dt": 0.0}}, "grid.dt"),
    ({"grid": {"dt": -1}}, "grid.dt"),
    ({"grid": {"dtt": 0.1}}, "grid.dtt"),
    ({"grid": {"N": 4}}, "grid.N"),
    ({"grid": {"K": 100}}, "grid.K"),
    ({"ladder": {"ratio": 1.5}}, "ladder.ratio"),
    ({"ladder": {"rungs": 40}}, "ladder.rungs"),
    ({"tolerances": {"tol_fp": -1}}, "tolerances.tol_fp"),
    ({"alpha": {"kind": "band"}}, "alpha.kind"),
    ({"alpha": {"kind": "constant", "level": 1, "start": 0}}, "alpha.start"),
    ({"alpha": {"kind": "positive_sinusoid", "base": 1.0, "amplitude": 2.0}}, "alpha"),
    ({"model": {"family": "rotation"}}, "model.omega"),
    ({"model": {"family": "rotation", "omega": 1, "potential": []}}, "model.potential"),
    ({"outputs": {"tables": ["plots"]}}, "outputs.tables[0]"),
    ({"seed": -3}, "seed"),
    ({"grid": {"N": True}}, "grid.N"),
])
def test_schema_errors_name_the_key(doc, where):
    with pytest.raises(ConfigError) as exc:
        validate(doc)
    assert exc.value.path == where
    assert str(exc.value).startswith(where)


def test_not_an_object():
    with pytest.raises(ConfigError):
        validate([1, 2])


def test_bundled_configs_load():
    assert bundled_configs() == ["alpha_zero_on_aubry", "mechanical_band", "rotation_sinusoid"]
    for name in bundled_configs():
        load_config(name)
    assert load_config("rotation_sinusoid.json").model.family.value == "rotation"


def test_barrier_key_ignores_alpha():
    a = validate(SMALL)
    b = validate(dict(SMALL, alpha={"kind": "constant", "level": 2.0}))
    assert barrier_key(a) == barrier_key(b)


def test_exit_code_config_errors(tmp_path, capsys):
    code, _, err = run(capsys, "critical", "--config", write(tmp_path, {"grid": {"dt": 0}}))
    assert code == 2 and "grid.dt" in err
    code, _, err = run(capsys, "critical", "--config", write(tmp_path, {"grdi": {}}))
    assert code == 2 and "grdi" in err
    code, _, err = run(capsys, "critical", "--config", write(tmp_path, "{not json"))
    assert code == 2 and "invalid JSON" in err
    code, _, err = run(capsys, "critical", "--config", str(tmp_path / "missing.json"))
    assert code == 2 and "not found" in err
    code, _, err = run(capsys, "critical", "--config", "mechanical_band", "--threads", "-1",
                       "--out", str(tmp_path / "o"))
    assert code == 2 and "--threads" in err


def test_no_command(capsys):
    code, out, _ = run(capsys)
    assert code == 2 and "usage" in out


def test_list_configs(capsys):
    code, out, _ = run(capsys, "--list-configs")
    assert code == 0 and out.split() == bundled_configs()


def test_stages_write_tables(tmp_path, capsys):
    cfg = write(tmp_path, SMALL)
    out = tmp_path / "o"
    code, stdout, _ = run(capsys, "critical", "--config", cfg, "--out", str(out))
    assert code == 0 and "c_grid" in stdout
    assert (out / "critical.csv").exists() and (out / "config.effective.json").exists()
    eff = json.loads((out / "config.effective.json").read_text())
    assert eff["grid"]["N"] == 64 and eff["grid"]["quadrature"] == "source"
    code, stdout, _ = run(capsys, "barrier", "--config", cfg, "--out", str(out))
    assert code == 0 and "reused" not in stdout
    code, stdout, _ = run(capsys, "mather", "--config", cfg, "--out", str(out))
    assert code == 0 and "reused" in stdout and (out / "mather.csv").exists()
    code, _, _ = run(capsys, "discounted", "--config", cfg, "--out", str(out))
    assert code == 0 and (out / "discounted.csv").exists() and (out / "trajectory.csv").exists()
    code, stdout, _ = run(capsys, "limit", "--config", cfg, "--out", str(out))
    assert code == 0 and "final gap" in stdout
    for name in CSVS:
        assert (out / name).exists(), name


def test_critical_csv_contents(tmp_path, capsys):
    out = tmp_path / "o"
    run(capsys, "critical", "--config", write(tmp_path, SMALL), "--out", str(out))
    lines = (out / "critical.csv").read_text().splitlines()
    head = lines[0].split(",")
    row = dict(zip(head, lines[1].split(",")))
    assert {"c_grid", "mu_star", "c_analytic", "error"} <= set(head)
    assert float(row["c_grid"]) == pytest.approx(1.0, abs=0.05)


def test_table_selection(tmp_path, capsys):
    doc = dict(SMALL, outputs={"directory": str(tmp_path / "o"), "tables": ["critical"]})
    code, _, _ = run(capsys, "barrier", "--config", write(tmp_path, doc))
    assert code == 0
    assert (tmp_path / "o" / "critical.csv").exists()
    assert not (tmp_path / "o" / "barrier.csv").exists()


def test_nonconvergence_exit_code(tmp_path, capsys):
    doc = dict(SMALL, solver={"max_iter": 5})
    code, _, err = run(capsys, "limit", "--config", write(tmp_path, doc), "--out", str(tmp_path / "o"))
    assert code == 3 and "non-convergence" in err


def test_alpha_zero_on_aubry_limit(tmp_path, capsys):
    code, _, err = run(capsys, "limit", "--config", "alpha_zero_on_aubry", "--out", str(tmp_path / "o"))
    assert code == 1 and "alpha vanishes on Aubry set" in err


def test_verify_small_and_deterministic(tmp_path, capsys):
    cfg = write(tmp_path, SMALL)
    a, b = tmp_path / "a", tmp_path / "b"
    code, out, _ = run(capsys, "verify", "--config", cfg, "--out", str(a), "--seed", "3")
    assert code == 0, out
    code, _, _ = run(capsys, "verify", "--config", cfg, "--out", str(b), "--seed", "3")
    assert code == 0
    for name in CSVS:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    report = json.loads((a / "report.json").read_text())["checks"]
    names = {(c["module"], c["name"]) for c in report}
    for mod in ("model", "lattice", "criticality", "barrier", "discounted", "selection", "cli"):
        assert any(m == mod for m, _ in names), mod
    for c in report:
        assert c["status"] in ("pass", "warn", "fail")
        assert c["anchor"]
    assert json.loads((a / "config.effective.json").read_text())["seed"] == 3


@pytest.mark.slow
def test_verify_mechanical_band(tmp_path, capsys):
    code, out, _ = run(capsys, "verify", "--config", "mechanical_band", "--out", str(tmp_path / "o"))
    assert code == 0, out
    assert "0 warn, 0 fail" in out


@pytest.mark.slow
def test_verify_rotation_sinusoid(tmp_path, capsys):
    code, out, _ = run(capsys, "verify", "--config", "rotation_sinusoid", "--out", str(tmp_path / "o"))
    assert code == 0, out
    assert " 0 fail" in out


def test_verify_alpha_zero_on_aubry(tmp_path, capsys):
    code, out, _ = run(capsys, "verify", "--config", "alpha_zero_on_aubry", "--out", str(tmp_path / "o"))
    assert code == 1
    assert "alpha vanishes on Aubry set" in out
