import json

import pytest
import yaml

from ultraregular import cli
from ultraregular.scenario import parse
from ultraregular.errors import SchemaError

SMALL = {
    "name": "small",
    "weights": {"kind": "gevrey", "sigma": 2.0, "P": 128},
    "regular_class": {"kind": "affine", "a": 1.0, "b": 1.0},
    "grid": {"dim": 1, "lo": -2.0, "hi": 2.0, "count": 16384},
    "ladder": {"eps_max": 0.3, "eps_min": 0.05, "count": 8},
    "nets": [{"name": "d", "op": "mollify", "spec": {"delta": 0.0}}],
    "analyses": [{"type": "scan", "net": "d", "m_max": 3}, {"type": "classify", "net": "d"}],
}


def write(tmp_path, data, name="s.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return str(p)


def test_list(capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out
    names = [line.split()[0] for line in out.splitlines()]
    assert names == sorted(["crossed_sheets_product", "delta_classification", "delta_sheet_wavefront",
                            "gevrey_sequence_audit", "heavy_tail_sigma", "r4_stability"])


def test_validate_bundled(capsys):
    assert cli.main(["validate", "delta_classification"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("OK\n")
    assert json.loads(out[3:])["name"] == "delta_classification"


def test_misspelled_key(tmp_path, capsys):
    bad = dict(SMALL)
    bad["weigths"] = bad.pop("weights")
    assert cli.main(["validate", write(tmp_path, bad)]) == 1
    assert "unknown key 'weigths'" in capsys.readouterr().err


def test_geometry_error(tmp_path, capsys):
    bad = dict(SMALL, ladder={"eps_max": 0.3, "eps_min": 0.0005, "count": 8})
    assert cli.main(["validate", write(tmp_path, bad)]) == 1
    assert "below 4 dx" in capsys.readouterr().err


def test_expression_sandbox(tmp_path, capsys):
    bad = dict(SMALL, nets=[{"name": "d", "op": "constant", "expr": "__import__('os').getcwd()"}])
    assert cli.main(["validate", write(tmp_path, bad)]) == 1
    assert "error:" in capsys.readouterr().err


def test_unknown_scenario(capsys):
    assert cli.main(["run", "no_such_scenario"]) == 1


def test_empty_analyses(tmp_path):
    data = dict(SMALL, analyses=[])
    out = tmp_path / "out"
    assert cli.main(["run", write(tmp_path, data), "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["analyses"] == [] and rep["overall"] == "PASS"


def test_run_small_reports(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["run", write(tmp_path, SMALL), "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert "wall_time" not in json.dumps(rep)
    cls = rep["analyses"][1]["result"]["class"]
    assert cls["kind"] == "affine"
    csvs = sorted(p.name for p in out.glob("*.csv"))
    assert csvs == ["00_scan.scan.csv", "01_classify.scan.csv"]
    for name in csvs:
        assert (out / name).read_text().splitlines()[0] == "order,epsilon,sup_norm"
    assert "wall_time_s" in (out / "report.txt").read_text()


def test_bundled_delta_classification(tmp_path):
    out = tmp_path / "d"
    assert cli.main(["run", "delta_classification", "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    cls = rep["analyses"][1]["result"]["class"]
    assert cls["kind"] == "affine"
    assert cls["a"] == pytest.approx(1.0, abs=0.05) and cls["b"] == pytest.approx(1.0, abs=0.05)
    assert rep["analyses"][2]["verdict"] == "PASS"


def test_failing_scenario_exit_code(tmp_path):
    assert cli.main(["run", "heavy_tail_sigma", "--out", str(tmp_path / "h")]) == 2
    assert cli.main(["run", "gevrey_sequence_audit", "--out", str(tmp_path / "g")]) == 0


def test_deterministic_and_thread_independent(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    path = write(tmp_path, SMALL)
    cli.main(["run", path, "--out", str(a)])
    cli.main(["run", path, "--out", str(b), "--seed", "7"])
    cli.main(["run", path, "--out", str(c), "--threads", "2"])
    ref = (a / "report.json").read_bytes()
    assert (b / "report.json").read_bytes() == ref
    assert (c / "report.json").read_bytes() == ref


def test_wavefront_csv_schema(tmp_path):
    out = tmp_path / "w"
    assert cli.main(["run", "delta_sheet_wavefront", "--out", str(out)]) == 2
    csv = next(out.glob("*.wavefront.csv")).read_text().splitlines()
    assert csv[0] == "x,y,sector_center_angle,verdict,a,b,k,margin"
    assert len(csv) == 1 + 3 * 8


def test_env_override(monkeypatch):
    base = parse(SMALL).config_hash()
    monkeypatch.setenv("ULTRAREG_CLASSIFY_M_MAX", "5")
    sc = parse(SMALL)
    assert sc.config.classify.m_max == 5 and sc.config_hash() != base
    # scenario config wins over the environment
    sc = parse(dict(SMALL, config={"classify": {"m_max": 6}}))
    assert sc.config.classify.m_max == 6


def test_schema_errors_direct():
    with pytest.raises(SchemaError):
        parse(dict(SMALL, analyses=[{"type": "classify", "net": "missing"}]))
    with pytest.raises(SchemaError):
        parse(dict(SMALL, analyses=[{"type": "nonsense"}]))
