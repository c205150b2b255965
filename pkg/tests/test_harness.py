from __future__ import annotations

import csv
import json
import math
import os

import pytest

from locbound import cli
from locbound.errors import ConfigValidationError, IoError, ParseError
from locbound.harness import (
    RUNNERS,
    ExperimentConfig,
    Outcome,
    emit_table,
    parse_config,
    run_experiment,
    schema_docs,
)

MINIMAL = '{"model": {"geometry": {"kind": "path", "size": [4]}}, "experiment": {"kind": "constants"}}'


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_parse_minimal_fills_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.model.spin == 0.5 and cfg.model.coupling == 1.0 and cfg.model.preset == "heisenberg"
    assert cfg.profile.kind == "power" and cfg.profile.rates == [1.0]
    assert cfg.seed == 0 and cfg.output.dir == "out"


def test_parse_rejects_unknown_key():
    text = '{"model": {"geometry": {"kind": "path", "size": [4]}, "spn": 1}, "experiment": {"kind": "constants"}}'
    with pytest.raises(ConfigValidationError) as info:
        parse_config(text)
    assert any("spn" in e for e in info.value.errors)


def test_parse_odd_ring_twist():
    text = json.dumps({"model": {"geometry": {"kind": "ring", "size": [7]}, "twist": {"theta": 1.0}},
                       "experiment": {"kind": "constants"}})
    with pytest.raises(ConfigValidationError) as info:
        parse_config(text)
    assert any("L must be even" in e for e in info.value.errors)
    text = json.dumps({"model": {"geometry": {"kind": "ring", "size": [7]}}, "experiment": {"kind": "lsm-scan"}})
    with pytest.raises(ConfigValidationError, match="L must be even"):
        parse_config(text)


def test_parse_json_error_reports_line():
    with pytest.raises(ParseError) as info:
        parse_config('{\n  "model": {\n    "geometry": ,\n  }\n}')
    assert info.value.line == 3


def test_parse_kind_from_subcommand():
    text = '{"model": {"geometry": {"kind": "path", "size": [3]}}}'
    assert parse_config(text, kind="constants").kind == "constants"
    with pytest.raises(ConfigValidationError, match="requested"):
        parse_config(MINIMAL, kind="lr-sweep")


def test_parse_missing_model():
    with pytest.raises(ConfigValidationError, match="needs a model"):
        parse_config('{"experiment": {"kind": "constants"}}')


def test_config_roundtrip():
    with open(os.path.join(os.path.dirname(__file__), "..", "configs", "cluster.json")) as fh:
        cfg = parse_config(fh.read())
    again = parse_config(cfg.to_json())
    assert again == cfg
    assert ExperimentConfig.model_validate_json(cfg.to_json()) == cfg


def test_emit_table_bytes(tmp_path):
    p = tmp_path / "empty.csv"
    emit_table([], ["a", "b"], str(p))
    assert p.read_bytes() == b"a,b\n"
    p = tmp_path / "zeros.csv"
    emit_table([{"a": 0.0, "b": 0}], ["a", "b"], str(p))
    assert p.read_bytes() == b"a,b\n0,0\n"
    p = tmp_path / "mixed.csv"
    emit_table([[0.1, math.nan, True, (0, 3), 1e-300]], ["x", "y", "z", "pair", "tiny"], str(p))
    assert p.read_bytes() == b"x,y,z,pair,tiny\n0.10000000000000001,nan,true,0-3,1e-300\n"
    with pytest.raises(ValueError):
        emit_table([{"a": 1}], ["a", "b"], str(p))


def test_emit_table_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(IoError):
        emit_table([], ["a"], str(blocker / "sub" / "t.csv"))


def test_constants_three_site_flat(tmp_path):
    cfg = parse_config(json.dumps({
        "model": {"geometry": {"kind": "path", "size": [3]}},
        "profile": {"kind": "power", "param": 0, "rates": [0.0]},
        "experiment": {"kind": "constants"}}))
    res = run_experiment(cfg, out_dir=str(tmp_path))
    assert res.status == 0
    row = read_csv(res.csv_path)[0]
    assert float(row["f_norm"]) == 3 and float(row["conv"]) == 3
    meta = json.loads(open(res.meta_path).read())
    assert meta["versions"]["locbound"] and meta["constants"][0]["f_norm"] == 3
    assert "output" not in meta["config"]


def test_lr_sweep_chain10_21_rows(tmp_path):
    cfg = parse_config(json.dumps({
        "model": {"geometry": {"kind": "path", "size": [10]}},
        "experiment": {"kind": "lr-sweep", "A": {"site": 0}, "B": [{"site": 7}]}}))
    res = run_experiment(cfg, out_dir=str(tmp_path))
    assert res.status == 0
    rows = read_csv(res.csv_path)
    assert len(rows) == 21
    assert all(float(r["empirical"]) <= float(r["analytic"]) for r in rows)


def test_lsm_scan_figure_shape(tmp_path):
    cfg = parse_config(json.dumps({
        "model": {"geometry": {"kind": "ring", "size": [8]}},
        "experiment": {"kind": "lsm-scan"}}))
    res = run_experiment(cfg, out_dir=str(tmp_path))
    rows = read_csv(res.csv_path)
    assert len(rows) == 65 and list(rows[0]) == ["theta", "E0", "E1", "E2"]
    mid = rows[32]
    assert float(mid["theta"]) == pytest.approx(math.pi)
    assert float(mid["E1"]) - float(mid["E0"]) < 1e-8


def test_violation_writes_outputs_and_exits_one(tmp_path, monkeypatch, capsys):
    def fake(cfg):
        return Outcome(["t", "v"], [[0.0, 1.0]], {}, ["forced violation"])

    monkeypatch.setitem(RUNNERS, "constants", fake)
    cfg = parse_config(MINIMAL)
    res = run_experiment(cfg, out_dir=str(tmp_path))
    assert res.status == 1 and os.path.exists(res.csv_path)
    meta = json.loads(open(res.meta_path).read())
    assert meta["violations"] == ["forced violation"] and meta["passed"] is False
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(MINIMAL)
    assert cli.main(["constants", "--config", str(cfg_path), "--out-dir", str(tmp_path)]) == 1
    assert "BoundViolated" in capsys.readouterr().err


def test_module_error_exits_three(tmp_path):
    cfg = parse_config(json.dumps({
        "model": {"geometry": {"kind": "path", "size": [3]}},
        "experiment": {"kind": "cluster", "A": [{"site": 0}], "B": [{"site": 2}]}}))
    res = run_experiment(cfg, out_dir=str(tmp_path))
    assert res.status == 3 and "DegenerateGround" in res.message
    assert res.csv_path is None


def test_bad_observable_site(tmp_path):
    cfg = parse_config(json.dumps({
        "model": {"geometry": {"kind": "path", "size": [3]}},
        "experiment": {"kind": "product-corr", "A": {"site": 0}, "B": {"site": 9}}}))
    with pytest.raises(ConfigValidationError):
        run_experiment(cfg, out_dir=str(tmp_path))


def test_explicit_terms_match_preset(tmp_path):
    from locbound.interaction import heisenberg_bond

    block = heisenberg_bond(0.5)
    entries = [[float(z.real), float(z.imag)] for z in block.ravel()]
    terms = [{"support": [i, i + 1], "entries": entries} for i in range(3)]
    base = {"geometry": {"kind": "path", "size": [4]}}
    outs = []
    for model in ({**base}, {**base, "preset": "none", "terms": terms}):
        cfg = parse_config(json.dumps({"model": model, "experiment": {"kind": "constants"}}))
        res = run_experiment(cfg, out_dir=str(tmp_path / str(len(outs))))
        outs.append(open(res.csv_path).read())
    assert outs[0] == outs[1]


def test_seed_override_recorded(tmp_path):
    cfg = parse_config(MINIMAL)
    res = run_experiment(cfg, out_dir=str(tmp_path), seed=2**64 - 1)
    assert json.loads(open(res.meta_path).read())["seed"] == 2**64 - 1
    with pytest.raises(ConfigValidationError):
        run_experiment(cfg, out_dir=str(tmp_path), seed=2**64)


def test_cli_list(capsys):
    assert cli.main(["--list"]) == 0
    out = capsys.readouterr().out
    for kind in RUNNERS:
        assert kind in out
    assert out.strip() == schema_docs().strip()


def test_cli_errors(tmp_path, capsys):
    assert cli.main(["constants", "--config", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"model": {"geometry": {"kind": "path", "size": [3]}, "spn": 2}}')
    assert cli.main(["constants", "--config", str(bad)]) == 2
    assert "spn" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        cli.main(["constants", "--config", str(bad), "--seed", "-1"])
    with pytest.raises(SystemExit):
        cli.main(["constants", "--config", str(bad), "--seed", str(2**64)])


def test_cli_runs_and_writes(tmp_path, capsys):
    good = tmp_path / "c.json"
    good.write_text(MINIMAL)
    assert cli.main(["constants", "--config", str(good), "--out-dir", str(tmp_path / "o"), "--seed", "7"]) == 0
    assert sorted(os.listdir(tmp_path / "o")) == ["constants.csv", "constants.meta.json"]
