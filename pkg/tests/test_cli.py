import csv
import json
import subprocess
import sys

import pytest

from cscf.cli import main
from cscf.fronts import read_front
from fixtures import trio_doc


def _write(tmp_path, doc, name="problem.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture
def problem_file(tmp_path):
    return _write(tmp_path, trio_doc())


def test_run_writes_front_and_manifest(tmp_path, problem_file):
    out = tmp_path / "run"
    assert main(["run", str(problem_file), str(out)]) == 0
    ff = read_front(out / "front_p0.jsonl")
    full = [r for r in ff.records if r["actions"] == ["a2", "a3", "a1"]]
    assert full and full[0]["cost"] == 22.5 and full[0]["cost_undiscounted"] == 30.0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["instances"][0]["status"] == "ok"
    assert ff.header["manifest"] == manifest["manifest"]
    stats = (out / "stats_p0.jsonl").read_text().splitlines()
    assert len(stats) == 31
    assert json.loads(stats[0])["generation"] == 0


def test_run_skips_accepted_instances(tmp_path):
    doc = trio_doc()
    doc["instances"].append({"id": "done", "values": {"Job": "Developer", "Edu": "MSc", "Loc": "US"}})
    out = tmp_path / "run"
    assert main(["run", str(_write(tmp_path, doc)), str(out)]) == 0
    entries = {e["id"]: e for e in json.loads((out / "manifest.json").read_text())["instances"]}
    assert entries["done"]["status"] == "skipped_accepted"
    assert not (out / "front_done.jsonl").exists()


def test_malformed_problem_has_no_outputs(tmp_path):
    doc = trio_doc()
    doc["actions"][0]["feature"] = "Salary"
    out = tmp_path / "run"
    assert main(["run", str(_write(tmp_path, doc)), str(out)]) == 1
    assert not out.exists()


def test_empty_front_exit_code(tmp_path):
    doc = trio_doc()
    doc["classifier"]["model"]["layers"][0]["bias"] = [-100.0]
    assert main(["run", str(_write(tmp_path, doc)), str(tmp_path / "run")]) == 2


def test_no_discount_equals_graph_removed(tmp_path, problem_file):
    doc = trio_doc()
    del doc["consequence_graph"]
    bare = _write(tmp_path, doc, "bare.json")
    assert main(["run", str(problem_file), str(tmp_path / "a"), "--no-discount"]) == 0
    assert main(["run", str(bare), str(tmp_path / "b")]) == 0
    recs_a = read_front(tmp_path / "a" / "front_p0.jsonl").records
    recs_b = read_front(tmp_path / "b" / "front_p0.jsonl").records
    assert recs_a == recs_b


def test_oracle(tmp_path, problem_file):
    out = tmp_path / "oracle"
    assert main(["oracle", str(problem_file), str(out)]) == 0
    ff = read_front(out / "front_p0.jsonl")
    assert ff.header["evaluated"] == 15
    assert any(r["actions"] == ["a2", "a3", "a1"] and r["cost"] == 22.5 for r in ff.records)


def test_oracle_refuses_continuous(tmp_path, caplog):
    doc = trio_doc()
    doc["features"].append({"name": "Hrs", "kind": "numeric", "min": 0, "max": 80})
    doc["actions"].append({"id": "a4", "feature": "Hrs", "values": {"kind": "range", "lo": 0, "hi": 80}})
    doc["efforts"]["a4"] = {"kind": "per_unit", "rate": 0.1}
    doc["classifier"]["model"]["layers"][0]["weights"].append(0.0)
    doc["classifier"]["model"]["layers"][0]["cols"] += 1
    del doc["classifier"]["model"]["encoding"]
    doc["instances"][0]["values"]["Hrs"] = 40
    out = tmp_path / "oracle"
    assert main(["oracle", str(_write(tmp_path, doc)), str(out)]) == 1
    assert "oracle requires finite grids" in caplog.text
    assert not out.exists()


def test_oracle_cap(tmp_path, problem_file, caplog):
    assert main(["oracle", str(problem_file), str(tmp_path / "o"), "--cap", "10"]) == 1
    assert "enumeration size 15" in caplog.text


def _front_file(path, instance, costs):
    header = {"schema": "cscf.front/1", "instance": instance, "manifest": "m"}
    lines = [json.dumps(header)] + [json.dumps({"actions": ["x"], "cost_undiscounted": c}) for c in costs]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.mark.parametrize("a,b,expected", [(10.0, 20.0, 0.5), (5.0, 5.0, 0.0), (27.5, 22.5, -0.1818)])
def test_compare_costs(tmp_path, a, b, expected):
    fa = _front_file(tmp_path / "a.jsonl", "p", [a])
    fb = _front_file(tmp_path / "b.jsonl", "p", [b])
    out = tmp_path / "cmp.csv"
    assert main(["compare-costs", str(fa), str(fb), "--output", str(out)]) == 0
    (row,) = csv.DictReader(out.open())
    assert float(row["relative_difference"]) == pytest.approx(expected, abs=1e-4)
    assert row["manifest_a"] == "m"


def test_compare_costs_mismatched_instances(tmp_path):
    fa = _front_file(tmp_path / "a.jsonl", "p", [1.0])
    fb = _front_file(tmp_path / "b.jsonl", "q", [1.0])
    assert main(["compare-costs", str(fa), str(fb)]) == 1


def test_flows(tmp_path, problem_file):
    main(["oracle", str(problem_file), str(tmp_path / "o")])
    out = tmp_path / "flows.json"
    assert main(["flows", str(tmp_path / "o"), "--output", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["schema"] == "cscf.flows/1"
    assert doc["sources"][0]["instance"] == "p0"
    assert sum(t["count"] for t in doc["terminations"]) == len(read_front(tmp_path / "o" / "front_p0.jsonl").records)


def test_probe_positions(tmp_path, problem_file):
    main(["run", str(problem_file), str(tmp_path / "run")])
    out = tmp_path / "probe"
    assert main(["probe-positions", str(problem_file), str(tmp_path / "run"), "--output", str(out)]) == 0
    rows = list(csv.DictReader((out / "samples.csv").open()))
    assert rows
    assert (out / "summary.csv").exists()
    assert json.loads((out / "manifest.json").read_text())["sources"][0]["manifest"]


def test_probe_positions_empty(tmp_path, problem_file):
    out = tmp_path / "probe"
    assert main(["probe-positions", str(problem_file), "--output", str(out)]) == 0
    assert (out / "samples.csv").read_text().count("\n") == 1


def test_probe_positions_classifier_mismatch(tmp_path, problem_file):
    main(["run", str(problem_file), str(tmp_path / "run")])
    doc = trio_doc()
    doc["classifier"]["model"]["layers"][0]["bias"] = [-24.0]
    other = _write(tmp_path, doc, "other.json")
    assert main(["probe-positions", str(other), str(tmp_path / "run"), "--output", str(tmp_path / "p")]) == 1


@pytest.fixture
def training_files(tmp_path):
    schema = tmp_path / "schema.json"
    schema.write_text(json.dumps({"features": trio_doc()["features"]}))
    data = tmp_path / "train.csv"
    data.write_text("Job,Edu,Loc,label\n"
                    "Developer,BSc,US,accept\nDeveloper,MSc,US,accept\n"
                    "Seller,HS,Germany,reject\nSeller,BSc,Germany,reject\n")
    return schema, data


def test_train(tmp_path, training_files, capsys):
    schema, data = training_files
    out1, out2 = tmp_path / "m1.json", tmp_path / "m2.json"
    assert main(["train", str(data), str(schema), str(out1), "--steps", "500"]) == 0
    assert "training accuracy: 1.0000" in capsys.readouterr().out
    assert main(["train", str(data), str(schema), str(out2), "--steps", "500"]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_train_missing_label(tmp_path, training_files):
    schema, data = training_files
    assert main(["train", str(data), str(schema), str(tmp_path / "m.json"), "--label", "y"]) == 1


def test_train_single_class(tmp_path, training_files):
    schema, _ = training_files
    data = tmp_path / "one.csv"
    data.write_text("Job,Edu,Loc,label\nDeveloper,BSc,US,1\nSeller,HS,US,1\n")
    assert main(["train", str(data), str(schema), str(tmp_path / "m.json")]) == 1


def test_console_entry_point(tmp_path, problem_file):
    res = subprocess.run([sys.executable, "-m", "cscf.cli", "oracle", str(problem_file), str(tmp_path / "o")],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
