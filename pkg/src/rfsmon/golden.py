"""Stored reproduction runs and their verification.

A golden run is a short sequence of CLI invocations plus an expectation on
the final output: an exact SHA-256 digest for deterministic files, a set of
alarm times for monitoring runs, or tolerance bands on F1 summaries for the
Monte-Carlo comparison.
"""

from __future__ import annotations

import csv
import difflib
import hashlib
import io
import json
import tempfile
from collections import defaultdict
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

GOLDEN_INDEX = "goldens.json"


@dataclass(frozen=True)
class GoldenRun:
    name: str
    commands: tuple[tuple[str, ...], ...]
    output: str
    check: str
    expected: dict
    seed: int
    notes: str = ""
    reference: str | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "GoldenRun":
        return cls(
            name=doc["name"],
            commands=tuple(tuple(c) for c in doc["commands"]),
            output=doc["output"],
            check=doc["check"],
            expected=doc["expected"],
            seed=int(doc["seed"]),
            notes=doc.get("notes", ""),
            reference=doc.get("reference"),
        )


@dataclass
class GoldenReport:
    name: str
    passed: bool
    messages: list[str] = field(default_factory=list)

    def summary(self) -> str:
        head = f"{'PASS' if self.passed else 'FAIL'} {self.name}"
        return "\n  ".join([head, *self.messages])


def _golden_dir():
    return resources.files("rfsmon") / "goldens"


def load_goldens() -> list[GoldenRun]:
    doc = json.loads((_golden_dir() / GOLDEN_INDEX).read_text(encoding="utf-8"))
    return [GoldenRun.from_dict(d) for d in doc["runs"]]


def run_commands(run: GoldenRun, workdir: Path) -> Path:
    from rfsmon.cli import main

    for argv in run.commands:
        argv = [a.replace("{tmp}", str(workdir)) for a in argv]
        code = main(argv)
        if code != 0:
            raise RuntimeError(f"golden {run.name}: command {' '.join(argv)} exited with {code}")
    return workdir / run.output


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _alarm_times(path: Path) -> list[int]:
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    return [int(r["t"]) for r in rows if r["alarm"] == "true"]


def f1_summary(path: Path) -> dict:
    """Mean F1 over t per (method, scenario), keyed ``"label|scenario"``."""
    from rfsmon.evaluation import read_f1_csv

    with open(path, encoding="utf-8") as fh:
        rows = read_f1_csv(fh)
    acc = defaultdict(list)
    for r in rows:
        label = "RF" if r["method"] == "RF" else f"PC({r['prior']},{r['alpha0']:g})"
        acc[f"{label}|{r['scenario']}"].append(r["f1"])
    return {k: sum(v) / len(v) for k, v in sorted(acc.items())}


def _check_digest(run: GoldenRun, out: Path, report: GoldenReport) -> None:
    got = _digest(out)
    if got == run.expected["sha256"]:
        report.messages.append(f"digest {got[:16]} matches")
        return
    report.passed = False
    report.messages.append(f"digest mismatch: expected {run.expected['sha256'][:16]}, got {got[:16]}")
    if run.reference:
        ref = (_golden_dir() / run.reference).read_text(encoding="utf-8").splitlines()
        new = out.read_text(encoding="utf-8").splitlines()
        diff = list(difflib.unified_diff(ref, new, "stored", "regenerated", lineterm="", n=1))
        report.messages.extend(diff[:12])


def _check_alarms(run: GoldenRun, out: Path, report: GoldenReport) -> None:
    got = _alarm_times(out)
    want = run.expected["alarm_times"]
    report.passed = got == want
    report.messages.append(f"alarm times {got} (expected {want})")


def _check_f1(run: GoldenRun, out: Path, report: GoldenReport) -> None:
    got = f1_summary(out)
    tol = float(run.expected["tolerance"])
    bad = []
    for key, want in run.expected["mean_f1"].items():
        if key not in got or abs(got[key] - want) > tol:
            bad.append(f"{key}: {got.get(key)} vs stored {want:.4f}")
    report.passed = not bad
    report.messages.append(f"{len(run.expected['mean_f1']) - len(bad)}/{len(run.expected['mean_f1'])} F1 means within +-{tol}")
    report.messages.extend(bad[:10])


_CHECKS = {"sha256": _check_digest, "alarm_times": _check_alarms, "f1_bands": _check_f1}


def verify_golden(run: GoldenRun) -> GoldenReport:
    report = GoldenReport(run.name, True)
    with tempfile.TemporaryDirectory() as tmp:
        out = run_commands(run, Path(tmp))
        _CHECKS[run.check](run, out, report)
    return report


def record_expected(run: GoldenRun) -> dict:
    """Compute the expectation a fresh run would store (for regenerating goldens)."""
    with tempfile.TemporaryDirectory() as tmp:
        out = run_commands(run, Path(tmp))
        if run.check == "sha256":
            return {"sha256": _digest(out), "_text": out.read_text(encoding="utf-8")}
        if run.check == "alarm_times":
            return {"alarm_times": _alarm_times(out)}
        return {"tolerance": run.expected.get("tolerance", 0.02), "mean_f1": f1_summary(out)}


def regenerate(path: Path | None = None) -> None:
    target = Path(path) if path else Path(str(_golden_dir()))
    doc = json.loads((target / GOLDEN_INDEX).read_text(encoding="utf-8"))
    for entry in doc["runs"]:
        run = GoldenRun.from_dict(entry)
        expected = record_expected(run)
        text = expected.pop("_text", None)
        if text is not None and run.reference:
            (target / run.reference).write_text(text, encoding="utf-8")
        entry["expected"] = expected
    buf = io.StringIO()
    json.dump(doc, buf, indent=2)
    (target / GOLDEN_INDEX).write_text(buf.getvalue() + "\n", encoding="utf-8")
