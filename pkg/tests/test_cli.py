import csv
import json
import subprocess
import sys
from pathlib import Path

import jsonschema
import pytest

from qetomo import __version__
from qetomo.cli import CSV_COLUMNS, PRESETS, main, parse_truth
from qetomo.errors import InvalidArgumentError
from qetomo.su2 import U_A, process_infidelity

SCHEMAS = Path(__file__).resolve().parents[1] / "docs" / "schemas"


def schema(name):
    return json.loads((SCHEMAS / f"{name}.schema.json").read_text())


def test_dist_text_examples(capsys):
    assert main(["dist", "--n", "4", "--m", "2", "--p", "0.5"]) == 0
    rows = [line.split() for line in capsys.readouterr().out.splitlines()[2:]]
    probs = [float(r[2]) for r in rows]
    assert probs == pytest.approx([0.375, 0, 0.25, 0, 0.375], abs=1e-12)
    assert main(["dist", "--n", "4", "--m", "2", "--p", "0"]) == 0
    rows = [line.split() for line in capsys.readouterr().out.splitlines()[2:]]
    assert [float(r[2]) for r in rows] == [0, 0, 1, 0, 0]


def test_dist_json_matches_schema(capsys):
    assert main(["dist", "--n", "1", "--m", "1", "--p", "0.3", "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    jsonschema.validate(doc, schema("dist"))
    assert [o["probability"] for o in doc["outcomes"]] == pytest.approx([0.7, 0.3])


@pytest.mark.parametrize("argv", [
    ["dist", "--n", "4", "--m", "2", "--p", "1.5"],
    ["dist", "--n", "4", "--m", "5", "--p", "0.5"],
    ["dist", "--n", "4"],
    ["dist", "--n", "four", "--p", "0.5"],
    ["nonsense"],
])
def test_dist_usage_errors(argv, capsys):
    assert main(argv) == 2
    assert capsys.readouterr().err


def test_version_flag(capsys):
    assert main(["--version"]) == 0
    assert __version__ in capsys.readouterr().out


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "qetomo", "dist", "--n", "2", "--p", "0.5"],
                         capture_output=True, text=True, check=True).stdout
    assert "|1,1>" in out


def test_parse_truth_forms():
    assert parse_truth("UA") == U_A
    assert parse_truth("1,0,0,0") == (1, 0, 0, 0)
    assert parse_truth("[2, 0, 0, 0]") == (1, 0, 0, 0)
    assert parse_truth('{"a": 0.5, "b": 0.5, "c": 0.5, "d": 0.5}') == (0.5,) * 4
    printed = '[["0.70+0.21j", "-0.65-0.20j"], ["0.65-0.20j", "0.70-0.21j"]]'
    assert process_infidelity(parse_truth(printed), U_A) < 1e-12
    pairs = "[[[1, 0], [0, 0]], [[0, 0], [1, 0]]]"
    assert parse_truth(pairs) == (1, 0, 0, 0)
    assert parse_truth("haar", 3) == parse_truth("haar", 3)
    assert parse_truth("haar", 3) != parse_truth("haar", 4)
    for bad in ("XX", "1,2", "[[1, 1], [0, 1]]"):
        with pytest.raises(InvalidArgumentError):
            parse_truth(bad)


def simulate(tmp_path, name, *extra):
    out = tmp_path / name
    code = main(["simulate", "--truth", "UA", "--seed", "7", "-o", str(out), *extra])
    return code, out


def test_simulate_is_deterministic(tmp_path, capsys):
    _, a = simulate(tmp_path, "a.json")
    _, b = simulate(tmp_path, "b.json")
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    jsonschema.validate(doc, schema("experiment"))
    assert doc["config"]["seed"] == 7
    assert doc["version"].startswith(__version__)
    assert "seed: 7" in capsys.readouterr().out


def test_simulate_two_hundred_probes(tmp_path):
    code, out = simulate(tmp_path, "e.json", "--budget", "800", "--coarse-fraction", "0")
    assert code == 0
    doc = json.loads(out.read_text())
    assert sum(r["shots"] for r in doc["main"]) == 200
    assert doc["coarse"] == []


def test_simulate_io_error(tmp_path):
    code, _ = simulate(tmp_path, "missing/dir/e.json")
    assert code == 3


def test_simulate_budget_too_small(tmp_path, capsys):
    code, _ = simulate(tmp_path, "e.json", "--budget", "5")
    assert code == 2
    assert "minimum" in capsys.readouterr().err


def test_estimate_identity(tmp_path, capsys):
    rec = tmp_path / "id.json"
    assert main(["simulate", "--truth", "identity", "--budget", "3600", "-o", str(rec)]) == 0
    out = tmp_path / "est.json"
    assert main(["estimate", str(rec), "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    jsonschema.validate(doc, schema("estimate"))
    assert doc["infidelity_vs_truth"] < 1e-6
    assert "infidelity_vs_truth" in capsys.readouterr().out


def test_estimate_verbose_lists_candidates(tmp_path, capsys):
    _, rec = simulate(tmp_path, "e.json")
    capsys.readouterr()
    assert main(["estimate", str(rec), "--verbose"]) == 0
    doc = json.loads(capsys.readouterr().out)
    jsonschema.validate(doc, schema("estimate"))
    assert len(doc["candidates"]) == doc["candidates_considered"]
    assert {"unfolded", "signs", "params", "log_likelihood"} <= set(doc["candidates"][0])


def test_estimate_missing_basis(tmp_path, capsys):
    _, rec = simulate(tmp_path, "e.json")
    doc = json.loads(rec.read_text())
    doc["main"] = [r for r in doc["main"] if r["basis"] != "DA"]
    rec.write_text(json.dumps(doc))
    assert main(["estimate", str(rec)]) == 2
    assert "DA" in capsys.readouterr().err


def test_estimate_malformed_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "main": [\n    {"basis": "HV",,}\n  ]\n}\n')
    assert main(["estimate", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "bad.json:3:" in err and '"basis": "HV",,' in err


def test_estimate_missing_file(tmp_path):
    assert main(["estimate", str(tmp_path / "nope.json")]) == 3


def sweep(tmp_path, name, *extra):
    prefix = tmp_path / name
    return main(["sweep", "--out", str(prefix), *extra]), prefix


def read_csv(prefix):
    with open(f"{prefix}.csv", newline="") as fh:
        return list(csv.DictReader(fh))


def test_sweep_fig3_small(tmp_path):
    code, prefix = sweep(tmp_path, "f3", "--preset", "fig3", "--trials", "3", "--threads", "1")
    assert code == 0
    rows = read_csv(prefix)
    assert list(rows[0]) == CSV_COLUMNS
    assert len(rows) == 3 * 3 * 2
    doc = json.loads(Path(f"{prefix}.json").read_text())
    jsonschema.validate(doc, schema("sweep"))
    assert doc["config"]["budgets"] == PRESETS["fig3"]["budgets"]
    assert len(doc["stats"]) == 3 * 2 * 2


def test_sweep_random_reports_fidelity(tmp_path):
    code, prefix = sweep(tmp_path, "r", "--mode", "random", "--count", "4",
                         "--probes-per-unitary", "40", "--threads", "1")
    assert code == 0
    doc = json.loads(Path(f"{prefix}.json").read_text())
    jsonschema.validate(doc, schema("sweep"))
    assert doc["fidelity"]["min"] <= doc["fidelity"]["mean"] <= doc["fidelity"]["max"]
    assert len(read_csv(prefix)) == 4


def test_sweep_thread_count_does_not_change_output(tmp_path):
    args = ["--preset", "fig3", "--trials", "3", "--budgets", "600,1200"]
    _, one = sweep(tmp_path, "one", *args, "--threads", "1")
    _, many = sweep(tmp_path, "many", *args, "--threads", "3")
    for ext in (".csv", ".json"):
        assert Path(f"{one}{ext}").read_bytes() == Path(f"{many}{ext}").read_bytes()


def test_sweep_config_roundtrip(tmp_path):
    code, first = sweep(tmp_path, "first", "--mode", "budget", "--truth", "UB",
                        "--budgets", "600", "--trials", "2", "--seed", "9", "--threads", "1")
    assert code == 0
    cfg = json.loads(Path(f"{first}.json").read_text())["config"]
    cfg.pop("command")
    conf = tmp_path / "conf.json"
    conf.write_text(json.dumps(cfg))
    _, second = sweep(tmp_path, "second", "--config", str(conf), "--threads", "1")
    for ext in (".csv", ".json"):
        assert Path(f"{first}{ext}").read_bytes() == Path(f"{second}{ext}").read_bytes()


def test_sweep_unknown_config_key(tmp_path, capsys):
    conf = tmp_path / "conf.json"
    conf.write_text(json.dumps({"trails": 5}))
    code, _ = sweep(tmp_path, "x", "--config", str(conf))
    assert code == 2
    err = capsys.readouterr().err
    assert "trails" in err and "trials" in err


def test_sweep_rejects_zero_trials(tmp_path, capsys):
    code, _ = sweep(tmp_path, "x", "--preset", "fig3", "--trials", "0")
    assert code == 2
    assert "trials" in capsys.readouterr().err


def test_sweep_flags_override_preset(tmp_path):
    code, prefix = sweep(tmp_path, "o", "--preset", "fig3", "--trials", "2", "--budgets", "600",
                         "--probe-ns", "4", "--threads", "1")
    assert code == 0
    rows = read_csv(prefix)
    assert {(r["budget"], r["probe_n"]) for r in rows} == {("600", "4")}
