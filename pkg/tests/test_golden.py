import json

import pytest

from rfsmon.cli import main
from rfsmon.golden import GoldenRun, load_goldens, verify_golden

GOLDENS = {run.name: run for run in load_goldens()}


def test_index_lists_the_reproduction_runs():
    assert set(GOLDENS) == {"fig1-tracking", "fig2-worked-example", "fig2-poisson-regime", "fig3-desk-scale"}
    for run in GOLDENS.values():
        assert run.expected, run.name


@pytest.mark.parametrize("name", ["fig1-tracking", "fig2-worked-example", "fig2-poisson-regime"])
def test_quick_goldens_replay(name):
    report = verify_golden(GOLDENS[name])
    assert report.passed, report.summary()


@pytest.mark.slow
def test_fig3_golden_within_bands():
    report = verify_golden(GOLDENS["fig3-desk-scale"])
    assert report.passed, report.summary()


def test_digest_mismatch_shows_diff():
    run = GOLDENS["fig1-tracking"]
    tampered = GoldenRun.from_dict({
        "name": run.name, "commands": [list(c) for c in run.commands], "output": run.output,
        "check": run.check, "expected": {"sha256": "0" * 64}, "seed": run.seed, "reference": run.reference,
    })
    report = verify_golden(tampered)
    assert not report.passed
    assert "digest mismatch" in report.messages[0]


def test_golden_command(capsys):
    assert main(["golden", "--name", "fig2-worked-example"]) == 0
    assert capsys.readouterr().out.startswith("PASS fig2-worked-example")


def test_stored_seeds_recorded():
    doc = {r.name: r.seed for r in GOLDENS.values()}
    assert doc["fig2-worked-example"] == 0 and doc["fig2-poisson-regime"] == 5
    assert json.dumps(GOLDENS["fig2-poisson-regime"].expected) == '{"alarm_times": [6]}'


def test_golden_command_rejects_unknown_name():
    assert main(["golden", "--name", "no-such-run"]) == 1


def test_golden_command_parallel(capsys):
    assert main(["golden", "--name", "fig1-tracking,fig2-poisson-regime", "--workers", "2"]) == 0
    out = capsys.readouterr().out
    assert "PASS fig1-tracking" in out and "PASS fig2-poisson-regime" in out
