import json
import math
from pathlib import Path

import pytest
import yaml

from gwldp import cli
from gwldp.config import load, resolve, validate
from gwldp.errors import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _write(tmp_path, doc, name="c.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(doc))
    return p


def test_shipped_configs_validate():
    for path in CONFIGS.glob("*.yaml"):
        if path.stem == "bad_offspring":
            continue
        mode = {"bounds": "bounds", "verify_moments": "verify-moments",
                "lotka_nagaev": "lotka-nagaev", "simulate": "simulate"}.get(
            path.stem, "predict" if path.stem.startswith("predict") else "sweep")
        resolve({"mode": mode, **load(path)})


def test_schema_rejects_unknown_keys_and_types():
    with pytest.raises(ConfigError):
        validate({"mode": "simulate", "replicates": "many"})
    with pytest.raises(ConfigError):
        validate({"mode": "fly"})
    with pytest.raises(ConfigError):
        resolve({"mode": "simulate", "summand": {"family": "symmetric_pareto"}})
    with pytest.raises(ConfigError):
        resolve({"mode": "simulate", "summand": {"family": "cauchy", "alpha": 1.0}})


def test_resolve_is_idempotent():
    raw = {"mode": "sweep", **load(CONFIGS / "sweep_main3_iv.yaml")}
    r1 = resolve(raw)
    assert resolve(r1) == r1
    assert r1["summand"]["body_mass"] == 0.0 and r1["workers"] == 1
    assert r1["model"] == {"N": 18, "n_samples": 10 ** 6, "seed": 0}


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load(tmp_path / "nope.yaml")


def _run(args):
    return cli.main([str(a) for a in args])


def test_exit_code_success_and_outputs(tmp_path):
    code = _run(["simulate", "--config", CONFIGS / "simulate.yaml", "--out", tmp_path,
                 "--replicates", 10_000])
    assert code == 0
    assert (tmp_path / "simulate.csv").is_file() and (tmp_path / "simulate.json").is_file()
    doc = json.loads((tmp_path / "simulate.json").read_text())
    assert doc["config"]["replicates"] == 10_000 and len(doc["rows"]) == 4


def test_exit_code_config_error(tmp_path, capsys):
    code = _run(["simulate", "--config", CONFIGS / "bad_offspring.yaml", "--out", tmp_path])
    assert code == 1
    diag = json.loads(capsys.readouterr().err)
    assert diag["exit_code"] == 1 and diag["error"] == "ConfigError"


def test_exit_code_unclassifiable(tmp_path, capsys):
    cfg = {"offspring": {"kind": "geom_shift", "a": 0.5},
           "summand": {"family": "symmetric_pareto", "alpha": 1.5},
           "threshold": {"kind": "diverging", "c": 1.0, "rho": 2.0, "form": "polynomial"}}
    code = _run(["predict", "--config", _write(tmp_path, cfg), "--out", tmp_path])
    assert code == 2
    diag = json.loads(capsys.readouterr().err)
    assert diag["theorem_id"] == "None" and diag["assumptions"]


def test_exit_code_hypothesis_error(tmp_path):
    cfg = {"offspring": {"kind": "two_point", "j": 3, "p": 0.5}, "summand": "lotka-nagaev",
           "lotka_nagaev": {"mode": "UpperDeviation", "eps": 0.5}, "replicates": 10_000}
    assert _run(["lotka-nagaev", "--config", _write(tmp_path, cfg), "--out", tmp_path]) == 2


def test_mode_mismatch_is_config_error(tmp_path):
    p = _write(tmp_path, {"mode": "bounds"})
    assert _run(["simulate", "--config", p, "--out", tmp_path]) == 1


def test_rerun_from_resolved_config_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run(["simulate", "--config", CONFIGS / "simulate.yaml", "--out", a,
                 "--replicates", 10_000, "--seed", 77]) == 0
    resolved = json.loads((a / "simulate.json").read_text())["config"]
    resolved["output"]["dir"] = str(b)
    p = tmp_path / "resolved.json"
    p.write_text(json.dumps(resolved))
    assert _run(["simulate", "--config", p]) == 0
    assert (a / "simulate.csv").read_bytes() == (b / "simulate.csv").read_bytes()


def test_predict_main2_json(tmp_path):
    cfg = {**load(CONFIGS / "predict_main2.yaml"), "model": {"n_samples": 20_000}}
    assert _run(["predict", "--config", _write(tmp_path, cfg), "--out", tmp_path]) == 0
    doc = json.loads((tmp_path / "predict.json").read_text())
    assert doc["theorem_id"] == "Main2" and not doc["heuristic"]
    # I_beta = E[W**(1 - beta)] = Gamma(1.5) for W ~ Exp(1), beta = 0.5
    assert doc["predicted"]["lo"] == pytest.approx(math.gamma(1.5), rel=1e-4)
    assert [r["n"] for r in doc["rows"]] == [4, 5, 6, 7, 8]
    assert all(a["passed"] for a in doc["assumptions"])
