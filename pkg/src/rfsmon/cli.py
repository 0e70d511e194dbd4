"""Command-line entry point: ``rfsmon <command> [flags]``.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import sys
from collections import defaultdict

from rfsmon.detector import Detector, DetectorConfig
from rfsmon.evaluation import (
    Method,
    calibrate_rf_threshold,
    default_grid,
    fig1_data,
    fig3_orderings,
    run_f1_experiment,
    write_f1_csv,
    write_fig1_csv,
)
from rfsmon.io import MONITOR_COLUMNS, MONITOR_HEADER, MONITOR_VERSION, DataError, monitor_row, read_observations, write_observations
from rfsmon.posterior import PriorSpec
from rfsmon.rfs_model import GaussParams, PoissonRfsParams
from rfsmon.simulate import ANOMALY_KINDS, KINDS, RngStream, ScenarioSpec, fig2_example, gen_batch

EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@contextlib.contextmanager
def _open_out(path: str):
    if path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _load_prior(value: str, dim: int) -> PriorSpec:
    if value == "jeffreys":
        return PriorSpec.jeffreys(dim)
    if value == "informative":
        return PriorSpec.informative(dim)
    try:
        with open(value, encoding="utf-8") as fh:
            doc = json.load(fh)
        doc.setdefault("kind", "explicit")
        return PriorSpec.from_dict(doc)
    except OSError as exc:
        raise UsageError(f"cannot read prior file {value!r}: {exc}") from None
    except (KeyError, ValueError, TypeError) as exc:
        raise DataError(f"invalid prior file {value!r}: {exc}") from None


def cmd_simulate(args) -> int:
    kind = args.scenario
    if kind == "fig2-example":
        records = [(0, X) for X in fig2_example(RngStream(args.seed))]
    else:
        if kind in ("ic", "fig1") and args.change_time is not None:
            raise UsageError(f"--change-time cannot be used with --scenario {kind}")
        if kind not in ("ic", "fig1") and args.change_time is None:
            raise UsageError(f"--scenario {kind} requires --change-time")
        try:
            spec = ScenarioSpec.make(kind, horizon=args.horizon, change_time=args.change_time, ramp_steps=args.ramp_steps)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        records = []
        for b in range(args.batches):
            records.extend((b, X) for X in gen_batch(spec, RngStream(args.seed, (b,))))
    with _open_out(args.out) as fh:
        write_observations(records, fh)
    return 0


def cmd_monitor(args) -> int:
    scale = {"derived": "derived", "paper": "paper_literal"}[args.scale]
    try:
        with open(args.input, encoding="utf-8") as fh:
            records = list(read_observations(fh))
    except OSError as exc:
        raise UsageError(f"cannot read {args.input!r}: {exc}") from None
    dim = next((X.points.shape[1] for _, X in records if X.n), args.dim)
    prior = _load_prior(args.prior, dim)
    try:
        config = DetectorConfig(alpha0=args.alpha0, alpha=args.alpha, prior=prior, dim=dim,
                                scale_variant=scale, update_policy=args.policy)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    detectors: dict[int, Detector] = defaultdict(lambda: Detector(config))
    tested = alarms = 0
    with _open_out(args.out) as fh:
        fh.write(f"{MONITOR_HEADER}{MONITOR_VERSION}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MONITOR_COLUMNS)
        for batch, X in records:
            det = detectors[batch]
            res = det.observe(X)
            tested += res.tested
            alarms += res.alarm
            writer.writerow(monitor_row(batch, res, det.gamma.c, det.gamma.d, det.niw.l, det.niw.nu))
    print(f"alarms: {alarms} of {tested} tested observations", file=sys.stderr)
    return 0


def _load_grid(value: str, alpha: float) -> list[Method]:
    if value == "default":
        return default_grid(alpha)
    try:
        with open(value, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read grid file {value!r}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid grid file {value!r}: {exc}") from None
    methods = []
    for entry in doc:
        prior = entry.get("prior", "jeffreys")
        if isinstance(prior, dict):
            spec = PriorSpec.from_dict({"kind": "explicit", **prior})
            label = entry.get("label", "custom")
        else:
            spec = PriorSpec.jeffreys(2) if prior == "jeffreys" else PriorSpec.informative(2)
            label = entry.get("label", "J" if prior == "jeffreys" else "inf")
        a0 = float(entry["alpha0"])
        cfg = DetectorConfig(alpha0=a0, alpha=float(entry.get("alpha", alpha)), prior=spec,
                             scale_variant=entry.get("scale_variant", "derived"))
        methods.append(Method("PC", label, a0, cfg))
    return methods


def cmd_evaluate(args) -> int:
    grid = _load_grid(args.grid, args.alpha)
    scenarios = args.scenarios.split(",") if args.scenarios else list(ANOMALY_KINDS)
    for s in scenarios:
        if s not in ANOMALY_KINDS:
            raise UsageError(f"unknown scenario {s!r}")
    exp = run_f1_experiment(grid, scenarios, batches=args.batches, seed=args.seed, horizon=args.horizon,
                            rf_samples=args.rf_samples, workers=args.workers)
    with _open_out(args.out) as fh:
        write_f1_csv(exp, fh)
    if args.orderings:
        for check in fig3_orderings(exp):
            print(f"{'PASS' if check.passed else 'FAIL'} {check.name}: {check.detail}", file=sys.stderr)
    return 0


def cmd_calibrate_rf(args) -> int:
    params = PoissonRfsParams(args.rate, GaussParams.standard(args.dim))
    try:
        thr = calibrate_rf_threshold(params, args.quantile, args.samples, RngStream(args.seed))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    with _open_out(args.out) as fh:
        fh.write(json.dumps(thr.to_dict(), indent=2) + "\n")
    return 0


def cmd_fig1(args) -> int:
    with _open_out(args.out) as fh:
        write_fig1_csv(fig1_data(args.seed, ramp_steps=args.ramp_steps), fh)
    return 0


def cmd_golden(args) -> int:
    from concurrent.futures import ProcessPoolExecutor

    from rfsmon.golden import load_goldens, verify_golden

    runs = load_goldens()
    names = {r.name for r in runs} if args.name == "all" else set(args.name.split(","))
    unknown = names - {r.name for r in runs}
    if unknown:
        raise UsageError(f"unknown golden run(s): {', '.join(sorted(unknown))}")
    selected = [r for r in runs if r.name in names]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            reports = list(pool.map(verify_golden, selected))
    else:
        reports = [verify_golden(r) for r in selected]
    for report in reports:
        print(report.summary())
    return 0 if all(r.passed for r in reports) else EXIT_DATA


def _ramp(value: str):
    return None if value == "linear" else int(value)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rfsmon", description="Online out-of-control detection for point-pattern streams.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate JSONL observation streams")
    p.add_argument("--scenario", choices=(*KINDS, "fig2-example"), default="ic")
    p.add_argument("--batches", type=int, default=1)
    p.add_argument("--horizon", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--change-time", type=int, default=None)
    p.add_argument("--ramp-steps", type=_ramp, default=3, help="fig1 transition length, or 'linear'")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("monitor", help="run the detector over a JSONL stream")
    p.add_argument("--input", required=True)
    p.add_argument("--alpha0", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--prior", default="jeffreys", help="jeffreys, informative or a JSON file")
    p.add_argument("--scale", choices=("derived", "paper"), default="derived")
    p.add_argument("--policy", choices=("skip_on_alarm", "always_update"), default="skip_on_alarm")
    p.add_argument("--dim", type=int, default=2, help="dimension when the input has no points")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("evaluate", help="F1(t) comparison of PC variants and RF")
    p.add_argument("--batches", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", default="default")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--horizon", type=int, default=30)
    p.add_argument("--scenarios", default=None, help="comma-separated subset of s1..s5")
    p.add_argument("--rf-samples", type=int, default=1_000_000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--orderings", action="store_true", help="print the ordering checks to stderr")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("calibrate-rf", help="calibrate the ranking-function cutoff")
    p.add_argument("--lambda", dest="rate", type=float, default=10.0)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--quantile", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_calibrate_rf)

    p = sub.add_parser("fig1", help="posterior rate tracking data for alpha0 in {0.8, 0.9, 1}")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ramp-steps", type=_ramp, default=3)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_fig1)

    p = sub.add_parser("golden", help="replay the stored reproduction runs")
    p.add_argument("--name", default="all", help="comma-separated run names, or 'all'")
    p.add_argument("--workers", type=int, default=1, help="replay runs in parallel processes")
    p.set_defaults(func=cmd_golden)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"rfsmon: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"rfsmon: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
