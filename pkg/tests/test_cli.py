import csv
import json

import pytest

from rfsmon.cli import main


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        return header, list(csv.DictReader(fh))


def test_simulate_writes_header_and_records(tmp_path):
    out = tmp_path / "obs.jsonl"
    assert main(["simulate", "--scenario", "ic", "--horizon", "3", "--seed", "1", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "# rfsmon observations v1.0"
    assert len(lines) == 4
    recs = [json.loads(line) for line in lines[1:]]
    assert [r["t"] for r in recs] == [1, 2, 3]
    assert all(r["batch"] == 0 for r in recs)


def test_simulate_is_byte_identical_on_rerun(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    argv = ["simulate", "--scenario", "s4", "--batches", "3", "--change-time", "7", "--seed", "9"]
    assert main(argv + ["--out", str(a)]) == 0
    assert main(argv + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize(
    "argv",
    [
        ["simulate", "--scenario", "ic", "--change-time", "5"],
        ["simulate", "--scenario", "s1"],
        ["simulate", "--scenario", "nope"],
        ["simulate", "--scenario", "s1", "--change-time", "40"],
        ["frobnicate"],
        ["calibrate-rf", "--samples", "10"],
    ],
)
def test_usage_errors_exit_1(tmp_path, argv):
    with pytest.raises(SystemExit) as exc:
        raise SystemExit(main(argv + ["--out", str(tmp_path / "x")]))
    assert exc.value.code == 1


def test_malformed_jsonl_exits_2_with_line(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('# rfsmon observations v1.0\n{"t": 1, "points": []}\n{"t": 2, "points": [[0, 1]\n')
    assert main(["monitor", "--input", str(bad), "--out", str(tmp_path / "m.csv")]) == 2
    assert "line 3" in capsys.readouterr().err


@pytest.mark.parametrize(
    "body",
    [
        '{"t": 2, "points": []}\n',
        '{"t": 1, "points": [[0, 1]]}\n{"t": 2, "points": [[0, 1, 2]]}\n',
        '{"t": 1}\n',
        "# rfsmon observations v2.0\n",
    ],
)
def test_invalid_streams_exit_2(tmp_path, body):
    bad = tmp_path / "bad.jsonl"
    bad.write_text(body)
    assert main(["monitor", "--input", str(bad), "--out", str(tmp_path / "m.csv")]) == 2


def test_monitor_output(tmp_path, capsys):
    obs, mon = tmp_path / "obs.jsonl", tmp_path / "mon.csv"
    main(["simulate", "--scenario", "s2", "--change-time", "10", "--horizon", "15", "--seed", "2", "--out", str(obs)])
    assert main(["monitor", "--input", str(obs), "--out", str(mon)]) == 0
    header, rows = read_csv(mon)
    assert header.strip() == "# rfsmon monitor v1.0"
    assert list(rows[0]) == ["batch", "t", "n", "pr_n", "pr_x", "P", "dof", "threshold", "alarm", "c", "d", "l", "nu"]
    assert len(rows) == 15
    first = rows[0]
    assert first["t"] == "1" and first["pr_n"] == "" and first["P"] == "" and first["alarm"] == "false"
    assert all(r["alarm"] in ("true", "false") for r in rows)
    assert "alarms:" in capsys.readouterr().err


def test_looser_alpha_alarms_on_superset(tmp_path):
    obs = tmp_path / "obs.jsonl"
    main(["simulate", "--scenario", "s1", "--change-time", "8", "--batches", "5", "--seed", "4", "--out", str(obs)])
    alarms = {}
    for alpha in ("0.01", "0.5"):
        out = tmp_path / f"m{alpha}.csv"
        main(["monitor", "--input", str(obs), "--alpha", alpha, "--policy", "always_update", "--out", str(out)])
        _, rows = read_csv(out)
        alarms[alpha] = {(r["batch"], r["t"]) for r in rows if r["alarm"] == "true"}
    assert alarms["0.01"] <= alarms["0.5"]
    assert len(alarms["0.5"]) > len(alarms["0.01"])


def test_monitor_prior_file(tmp_path):
    prior = tmp_path / "prior.json"
    prior.write_text(json.dumps({"c0": 50.5, "d0": 5, "m0": [0, 0], "l0": 50, "nu0": 48, "psi0": [[49, 0], [0, 49]]}))
    obs, mon = tmp_path / "obs.jsonl", tmp_path / "mon.csv"
    main(["simulate", "--horizon", "3", "--out", str(obs)])
    assert main(["monitor", "--input", str(obs), "--prior", str(prior), "--out", str(mon)]) == 0
    _, rows = read_csv(mon)
    # a proper prior tests the very first observation's feature as well
    assert rows[1]["dof"] == "4"
    prior.write_text(json.dumps({"c0": -1}))
    assert main(["monitor", "--input", str(obs), "--prior", str(prior), "--out", str(mon)]) == 2


def test_evaluate_row_count(tmp_path, capsys):
    out = tmp_path / "f1.csv"
    argv = ["evaluate", "--batches", "2", "--rf-samples", "10000", "--orderings", "--out", str(out)]
    assert main(argv) == 0
    header, rows = read_csv(out)
    assert header.startswith("# rfsmon f1-table v1.")
    assert len(rows) == 29 * 7 * 5
    verdicts = [line.split()[0] for line in capsys.readouterr().err.splitlines()]
    assert len(verdicts) == 4 and set(verdicts) <= {"PASS", "FAIL"}


def test_calibrate_rf_json(tmp_path):
    out = tmp_path / "rf.json"
    assert main(["calibrate-rf", "--samples", "20000", "--seed", "1", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["level"] == 0.01 and doc["n_samples"] == 20000 and doc["rate"] == 10.0
    assert doc["cutoff"] < 0


def test_fig1_command(tmp_path):
    out = tmp_path / "fig1.csv"
    assert main(["fig1", "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header.startswith("# rfsmon fig1") and len(rows) == 100
    assert main(["fig1", "--ramp-steps", "linear", "--out", str(tmp_path / "lin.csv")]) == 0
