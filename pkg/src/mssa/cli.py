"""Command-line entry point wiring generation, calibration, evaluation,
scale sweeps and prediction into reproducible pipelines.

Every report carries a provenance block (seed, grid, kernel, delta, c,
version) sufficient to reproduce the run bit-exactly; reruns with the same
seed and flags produce byte-identical files regardless of --threads.
Outputs are written atomically: a failed run leaves nothing behind.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .aggregation import CriticalValues, predict_batch
from .calibration import CalibrationConfig, calibrate
from .data import DatasetSchema, LabeledDataset, emit_csv, ingest_csv, read_points
from .estimator import ScaleGrid, geometric_grid
from .evaluation import holdout_error, knn_sweep, loo_error
from .kernels import Kernel
from .synthetic import builtin_experiment, sample_mixture


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="mssa",
        description="Adaptive multiclass nearest-neighbor classifier with "
        "stagewise aggregation across neighbor-count scales.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_flags(p, test_data_help):
        p.add_argument("--data", required=True, help="training CSV path")
        p.add_argument("--test-data", help=test_data_help)
        p.add_argument("--label-col", default="label",
                       help="label column name, or 0-based index if --no-header")
        header = p.add_mutually_exclusive_group()
        header.add_argument("--has-header", dest="has_header", action="store_true",
                            default=True, help="first row is a header (default)")
        header.add_argument("--no-header", dest="has_header", action="store_false")
        p.add_argument("--delimiter", default=",")

    def add_model_flags(p):
        p.add_argument("--kernel", choices=[k.value for k in Kernel], default="rect")
        p.add_argument("--grid-base", type=int, default=3)
        p.add_argument("--grid-growth", type=float, default=1.25)
        p.add_argument("--grid-max", type=int, default=None,
                       help="largest neighbor count (default n/2)")
        p.add_argument("--delta", type=float, default=0.1)
        p.add_argument("--n-mc", type=int, default=1000)
        p.add_argument("--c-grid", default="0.25,0.5,1,2,4",
                       help="comma-separated candidate threshold multipliers")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)

    gen = sub.add_parser("generate", help="sample a built-in synthetic experiment")
    gen.add_argument("--experiment", type=int, choices=[1, 2, 3], required=True)
    gen.add_argument("--n", type=int, default=500)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output CSV path")

    cal = sub.add_parser("calibrate", help="compute critical values for a dataset")
    add_data_flags(cal, argparse.SUPPRESS)
    add_model_flags(cal)
    cal.add_argument("--out", required=True, help="output JSON path")

    ev = sub.add_parser("evaluate", help="calibrate then score by LOO or holdout")
    add_data_flags(ev, "held-out labeled CSV; omit for leave-one-out")
    add_model_flags(ev)
    ev.add_argument("--out", required=True, help="output JSON report path")

    sw = sub.add_parser("sweep", help="evaluate plus per-scale plain k-NN errors")
    add_data_flags(sw, "held-out labeled CSV; omit for leave-one-out")
    add_model_flags(sw)
    sw.add_argument("--out", required=True, help="output JSON report path")
    sw.add_argument("--sweep-out", required=True, help="output CSV (k, error, std_error)")

    pr = sub.add_parser("predict", help="label an unlabeled CSV")
    add_data_flags(pr, "unlabeled CSV of points to classify")
    add_model_flags(pr)
    pr.add_argument("--out", required=True, help="output CSV of predicted labels")
    pr.add_argument("--emit-traces", help="also write per-point aggregation traces (JSON)")

    args = parser.parse_args(argv)
    if hasattr(args, "c_grid"):
        try:
            args.c_values = tuple(float(c) for c in args.c_grid.split(","))
        except ValueError:
            parser.error(f"argument --c-grid: invalid value {args.c_grid!r}")
        if not 0.0 < args.delta < 1.0:
            parser.error(f"argument --delta: must lie in (0, 1), got {args.delta}")
        if args.grid_base < 1 or args.grid_growth <= 1.0:
            parser.error("arguments --grid-base/--grid-growth: base >= 1 and growth > 1 required")
        if args.threads < 1:
            parser.error("argument --threads: must be positive")
        if not args.has_header and not args.label_col.lstrip("-").isdigit():
            parser.error("argument --label-col: must be a 0-based index with --no-header")
    if args.command == "predict" and not args.test_data:
        parser.error("argument --test-data: required for predict")
    return args


def _schema(args) -> DatasetSchema:
    label_col: str | int = args.label_col
    if not args.has_header:
        label_col = int(args.label_col)
    return DatasetSchema(label_column=label_col, has_header=args.has_header,
                         delimiter=args.delimiter)


def _write_json(path: str, payload: dict, written: list[str]) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
    written.append(path)


def _provenance(args, grid: ScaleGrid, c: float | None) -> dict:
    return {
        "version": __version__,
        "seed": args.seed,
        "grid": list(grid.counts),
        "grid_ratio_ok": grid.ratio_ok,
        "kernel": args.kernel,
        "delta": args.delta,
        "c": c,
    }


def _calibrated(args, dataset: LabeledDataset, grid: ScaleGrid, kernel: Kernel):
    config = CalibrationConfig(
        delta=args.delta, n_mc=args.n_mc, c_grid=args.c_values, seed=args.seed
    )
    return calibrate(dataset, grid, kernel, config, workers=args.threads)


def run_pipeline(args) -> int:
    written: list[str] = []
    try:
        if args.command == "generate":
            experiment = builtin_experiment(args.experiment)
            dataset = sample_mixture(experiment.model, args.n, args.seed)
            emit_csv(dataset, args.out, DatasetSchema(label_column="label"))
            return 0

        dataset = ingest_csv(args.data, _schema(args))
        kernel = Kernel.from_name(args.kernel)
        grid = geometric_grid(dataset.n, args.grid_base, args.grid_growth, args.grid_max)

        if args.command == "calibrate":
            z_tilde, sel = _calibrated(args, dataset, grid, kernel)
            _write_json(args.out, {
                "provenance": _provenance(args, grid, sel.c),
                "z_tilde": z_tilde.z.tolist(),
                "c": sel.c,
                "z": sel.z.z.tolist(),
                "loo_error_at_c": sel.loo_report.error_rate,
            }, written)
            return 0

        if args.command in ("evaluate", "sweep"):
            z_tilde, sel = _calibrated(args, dataset, grid, kernel)
            if args.test_data:
                test = ingest_csv(args.test_data, _schema(args),
                                  class_names=dataset.class_names)
                report = holdout_error(dataset, test, grid, kernel, sel.z,
                                       workers=args.threads)
                protocol = "holdout"
            else:
                report = loo_error(dataset, grid, kernel, sel.z, workers=args.threads)
                protocol = "leave-one-out"
            payload = {
                "provenance": _provenance(args, grid, sel.c),
                "protocol": protocol,
                "z_tilde": z_tilde.z.tolist(),
                "z": sel.z.z.tolist(),
                "report": report.to_dict(),
            }
            if args.command == "sweep":
                reports = knn_sweep(dataset, grid, kernel, workers=args.threads)
                tmp = args.sweep_out + ".tmp"
                with open(tmp, "w", newline="", encoding="utf-8") as fh:
                    writer = csv.writer(fh)
                    writer.writerow(["k", "error_rate", "std_error"])
                    for k, rep in zip(grid.counts, reports):
                        writer.writerow([k, repr(rep.error_rate), repr(rep.std_error)])
                os.replace(tmp, args.sweep_out)
                written.append(args.sweep_out)
                payload["sweep_csv"] = args.sweep_out
            _write_json(args.out, payload, written)
            return 0

        if args.command == "predict":
            points = read_points(args.test_data, args.has_header, args.delimiter)
            _, sel = _calibrated(args, dataset, grid, kernel)
            labels, traces = predict_batch(
                points, dataset, grid, kernel, sel.z,
                collect_traces=bool(args.emit_traces), workers=args.threads,
            )
            tmp = args.out + ".tmp"
            with open(tmp, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["label"])
                for lab in labels:
                    writer.writerow([dataset.label_name(int(lab))])
            os.replace(tmp, args.out)
            written.append(args.out)
            if args.emit_traces:
                _write_json(args.emit_traces, {
                    "provenance": _provenance(args, grid, sel.c),
                    "traces": [t.to_dict() for t in traces],
                }, written)
            return 0

        raise ValueError(f"unknown command {args.command!r}")
    except Exception as exc:  # noqa: BLE001 - single structured exit path
        # a failed run leaves nothing behind: drop whatever this run wrote
        for path in written:
            if os.path.exists(path):
                os.remove(path)
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main(argv: list[str] | None = None) -> int:
    return run_pipeline(parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
