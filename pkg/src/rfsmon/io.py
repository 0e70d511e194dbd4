"""JSONL observation files and CSV result files."""

from __future__ import annotations

import json
from collections.abc import Iterable, Iterator

import numpy as np

from rfsmon.checks import CheckResult
from rfsmon.rfs_model import PointPattern

OBS_HEADER = "# rfsmon observations v"
OBS_VERSION = "1.0"
MONITOR_HEADER = "# rfsmon monitor v"
MONITOR_VERSION = "1.0"
MONITOR_COLUMNS = ("batch", "t", "n", "pr_n", "pr_x", "P", "dof", "threshold", "alarm", "c", "d", "l", "nu")


class DataError(ValueError):
    """Malformed input data; carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _check_version(header: str, prefix: str, supported: str, line: int) -> None:
    version = header[len(prefix):].strip()
    if version.split(".")[0] != supported.split(".")[0]:
        raise DataError(f"unsupported format version {version!r}", line)


def write_observations(records: Iterable[tuple[int, PointPattern]], fh) -> None:
    fh.write(f"{OBS_HEADER}{OBS_VERSION}\n")
    for batch, X in records:
        fh.write(json.dumps({"batch": batch, "t": X.t, "points": X.points.tolist()}) + "\n")


def read_observations(fh) -> Iterator[tuple[int, PointPattern]]:
    """Yield ``(batch, pattern)`` pairs, validating ordering and dimension.

    Records without a ``batch`` field belong to batch 0. Within a batch the
    time index must increase by exactly one.
    """
    last_t: dict[int, int] = {}
    dim = None
    for lineno, raw in enumerate(fh, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line.startswith(OBS_HEADER):
                _check_version(line, OBS_HEADER, OBS_VERSION, lineno)
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"invalid JSON ({exc.msg})", lineno) from None
        if not isinstance(rec, dict) or "t" not in rec or "points" not in rec:
            raise DataError("record needs 't' and 'points' fields", lineno)
        batch = rec.get("batch", 0)
        if not isinstance(batch, int) or not isinstance(rec["t"], int):
            raise DataError("'batch' and 't' must be integers", lineno)
        try:
            pts = np.asarray(rec["points"], dtype=float)
        except (TypeError, ValueError):
            raise DataError("'points' must be a list of numeric vectors", lineno) from None
        if pts.size == 0:
            pts = pts.reshape(0, dim or 0)
        if pts.ndim != 2:
            raise DataError("'points' must be a list of equal-length vectors", lineno)
        if pts.shape[0]:
            if dim is None:
                dim = pts.shape[1]
            elif pts.shape[1] != dim:
                raise DataError(f"point dimension {pts.shape[1]} differs from earlier dimension {dim}", lineno)
        expected = last_t.get(batch, 0) + 1
        if rec["t"] != expected:
            raise DataError(f"batch {batch}: expected t={expected}, got t={rec['t']}", lineno)
        last_t[batch] = rec["t"]
        try:
            yield batch, PointPattern(rec["t"], pts)
        except ValueError as exc:
            raise DataError(str(exc), lineno) from None


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def monitor_row(batch: int, result: CheckResult, c: float, d: float, l: float, nu: float) -> list[str]:
    vals = (
        batch, result.t, result.n, result.pr_n, result.pr_x, result.fisher_P,
        result.dof if result.tested else None, result.threshold, result.alarm, c, d, l, nu,
    )
    return [_fmt(v) for v in vals]
