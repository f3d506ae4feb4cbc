"""Single executable driving the workflow: ingest, train, evaluate, forecast, serve.

Success output is one JSON document on stdout; prose goes to stderr. Exit
codes: 0 success, 1 runtime/data error, 2 usage error (argparse).
"""

from __future__ import annotations

import argparse
import csv
import glob
import json
import os
import sys
from datetime import datetime
from . import artifact as artifact_io
from . import pipeline, training
from .dataset import DEFAULT_FRACTIONS, build_dataset, synth_series
from .districts import DEFAULT_DISTRICTS
from .gbdt import BoostingConfig
from .metrics import DEFAULT_MAPE_FLOOR
from .neural.core import TrainingSchedule
from .service import ServiceConfig, run_service

TS_OUT = "%Y-%m-%dT%H:00:00"


class CliError(Exception):
    def __init__(self, code: str, message: str) -> None:
        super().__init__(message)
        self.code = code


def _emit(payload: dict) -> None:
    print(json.dumps(payload, indent=2))


def _info(message: str, verbose: bool) -> None:
    if verbose:
        print(message, file=sys.stderr)


def _expand(pattern: str, what: str) -> list[str]:
    paths = sorted(glob.glob(pattern))
    if not paths:
        raise CliError("missing_input", f"no {what} files match {pattern!r}")
    return paths


def cmd_ingest(args: argparse.Namespace) -> dict:
    traffic_paths = _expand(args.traffic, "traffic")
    weather_paths = _expand(args.weather, "weather")

    records = []
    traffic_skipped = 0
    for path in traffic_paths:
        result = pipeline.parse_traffic_csv(path)
        records.extend(result.records)
        traffic_skipped += result.skipped
        _info(f"parsed {result.count} traffic rows from {path} ({result.skipped} skipped)", args.verbose)

    weather = []
    weather_skipped = 0
    for path in weather_paths:
        result = pipeline.parse_weather_csv(path)
        weather.extend(result.records)
        weather_skipped += result.skipped
        _info(f"parsed {result.count} weather rows from {path} ({result.skipped} skipped)", args.verbose)

    assigned = pipeline.assign_records(records, DEFAULT_DISTRICTS)
    counts = pipeline.district_counts(assigned)
    periods = pipeline.period_summary(records)
    hourly = pipeline.aggregate_hourly(assigned)
    joined, dropped = pipeline.join_weather(hourly, weather)
    pipeline.write_prepared_csv(joined, args.out)

    summary = {
        "traffic_rows": len(records),
        "traffic_skipped": traffic_skipped,
        "weather_rows": len(weather),
        "weather_skipped": weather_skipped,
        "prepared_rows": len(joined),
        "dropped_unmatched_hours": dropped,
        "district_counts": dict(sorted(counts.items())),
        "period_summary": {
            name: {"total_vehicles": s.total_vehicles, "mean_avg_speed": s.mean_avg_speed}
            for name, s in periods.items()
        },
        "out": str(args.out),
    }
    if args.figures:
        from .figures import render_ingest_figures

        summary["figures"] = render_ingest_figures(joined, counts, periods, args.figures)
    return summary


def _load_district_dataset(prepared: str, district: str, window: int, fractions) -> tuple:
    rows = pipeline.read_prepared_csv(prepared)
    district_rows = pipeline.rows_for_district(rows, district)
    if not district_rows:
        raise CliError("unknown_district", f"no prepared rows for district {district!r}")
    return build_dataset(district_rows, window=window, fractions=tuple(fractions)), district_rows


def cmd_train(args: argparse.Namespace) -> dict:
    config = training.TrainConfig(
        model_type=args.model,
        district=args.district,
        seed=args.seed,
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        momentum=args.momentum,
        window=args.window,
        schedule=TrainingSchedule(max_epochs=args.epochs),
        boosting=BoostingConfig(num_rounds=args.rounds),
    )
    dataset, _rows = _load_district_dataset(args.prepared, args.district, args.window, DEFAULT_FRACTIONS)
    _info(f"training {args.model} for {args.district} on {len(dataset.samples)} samples", args.verbose)
    artifact = training.train_model(dataset, config)
    artifact_io.save_artifact(artifact, args.out)
    return {
        "model_type": artifact.model_type,
        "district": artifact.district,
        "artifact": str(args.out),
        "test_metrics": artifact.test_metrics.to_dict(),
    }


def cmd_evaluate(args: argparse.Namespace) -> dict:
    artifact = artifact_io.load_artifact(args.artifact)
    window = int(artifact.train_config.get("window", 24))
    fractions = artifact.train_config.get("fractions", DEFAULT_FRACTIONS)
    dataset, _rows = _load_district_dataset(args.prepared, artifact.district, window, fractions)
    report = training.evaluate(artifact, dataset)
    out = {
        "model_type": artifact.model_type,
        "district": artifact.district,
        "test_metrics": report.to_dict(),
    }

    needs_predictions = args.dump_predictions or args.figures
    if needs_predictions:
        model = artifact.build_model()
        samples = dataset.split_samples("test")
        preds_norm = training.predict_samples(model, samples)
        actual = [float(dataset.normalization.invert_target(s.target)) for s in samples]
        predicted = [float(v) for v in dataset.normalization.invert_target(preds_norm)]
        timestamps = [s.target_timestamp for s in samples]
        if args.dump_predictions:
            with open(args.dump_predictions, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["ts", "actual", "predicted"])
                for ts, a, p in zip(timestamps, actual, predicted):
                    writer.writerow([ts.strftime(TS_OUT), repr(a), repr(p)])
            out["predictions"] = str(args.dump_predictions)
        if args.figures:
            from .figures import render_evaluation_figure

            out["figures"] = render_evaluation_figure(timestamps, actual, predicted, args.figures)
    return out


def cmd_forecast(args: argparse.Namespace) -> dict:
    artifact = artifact_io.load_artifact(args.artifact)
    rows = pipeline.read_prepared_csv(args.prepared)
    district_rows = pipeline.rows_for_district(rows, artifact.district)
    if args.start:
        try:
            start = datetime.fromisoformat(args.start)
        except ValueError:
            raise CliError("invalid_timestamp", f"cannot parse --start {args.start!r}") from None
        district_rows = [r for r in district_rows if r.timestamp <= start]
    try:
        result = training.forecast(artifact, district_rows, horizon=args.horizon)
    except training.InsufficientHistoryError as exc:
        raise CliError("insufficient_history", str(exc)) from None

    out = {
        "district": result.district,
        "model": result.model_type,
        "generated_at": result.generated_at,
        "points": [
            {"ts": p.timestamp.strftime(TS_OUT), "vehicles": p.vehicles, "level": p.level}
            for p in result.points
        ],
    }
    if args.figures:
        from .figures import render_forecast_figure

        out["figures"] = render_forecast_figure(district_rows, result, args.figures)
    return out


def cmd_synth(args: argparse.Namespace) -> dict:
    rows = synth_series(
        seed=args.seed, days=args.days, base=args.base, district=args.district
    )
    pipeline.write_prepared_csv(rows, args.out)
    return {"rows": len(rows), "district": args.district, "out": str(args.out)}


def cmd_serve(args: argparse.Namespace) -> dict:
    port = args.port
    if port is None:
        port = int(os.environ.get("SMARTJOURNEY_PORT", "8000"))
    config = ServiceConfig(
        models_dir=args.models_dir,
        prepared_path=args.prepared,
        port=port,
        cors_origins=tuple(args.cors_origin) if args.cors_origin else ("*",),
    )
    _info(f"serving on port {port}", args.verbose)
    run_service(config)
    return {"status": "stopped"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smartjourney")
    parser.add_argument("--seed", type=int, default=0, help="global random seed")
    parser.add_argument("--verbose", action="store_true", help="progress prose on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="prepare raw traffic+weather CSVs")
    p_ingest.add_argument("--traffic", required=True, help="glob of traffic CSV files")
    p_ingest.add_argument("--weather", required=True, help="glob of weather CSV files")
    p_ingest.add_argument("--out", required=True, help="prepared CSV output path")
    p_ingest.add_argument("--figures", help="directory for report figures")
    p_ingest.set_defaults(func=cmd_ingest)

    p_train = sub.add_parser("train", help="train one model for one district")
    p_train.add_argument("--model", required=True, choices=training.MODEL_TYPES)
    p_train.add_argument("--district", required=True)
    p_train.add_argument("--prepared", required=True)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--epochs", type=int, default=500)
    p_train.add_argument("--rounds", type=int, default=500)
    p_train.add_argument("--batch-size", type=int, default=32)
    p_train.add_argument("--learning-rate", type=float, default=2.5e-5)
    p_train.add_argument("--momentum", type=float, default=0.90)
    p_train.add_argument("--window", type=int, default=24)
    p_train.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("evaluate", help="evaluate an artifact on its test split")
    p_eval.add_argument("--artifact", required=True)
    p_eval.add_argument("--prepared", required=True)
    p_eval.add_argument("--dump-predictions", help="CSV path for per-hour predictions")
    p_eval.add_argument("--figures", help="directory for report figures")
    p_eval.set_defaults(func=cmd_evaluate)

    p_fc = sub.add_parser("forecast", help="multi-hour forecast from an artifact")
    p_fc.add_argument("--artifact", required=True)
    p_fc.add_argument("--prepared", required=True)
    p_fc.add_argument("--start", help="last history hour to use (default: all history)")
    p_fc.add_argument("--horizon", type=int, default=training.DEFAULT_HORIZON)
    p_fc.add_argument("--figures", help="directory for report figures")
    p_fc.set_defaults(func=cmd_forecast)

    p_synth = sub.add_parser("synth", help="write a synthetic prepared CSV for testing")
    p_synth.add_argument("--days", type=int, default=120)
    p_synth.add_argument("--base", type=float, default=1000.0)
    p_synth.add_argument("--district", default="TUZLA")
    p_synth.add_argument("--out", required=True)
    p_synth.set_defaults(func=cmd_synth)

    p_serve = sub.add_parser("serve", help="run the prediction service")
    p_serve.add_argument("--models-dir", required=True)
    p_serve.add_argument("--prepared", required=True)
    p_serve.add_argument("--port", type=int, default=None, help="overrides SMARTJOURNEY_PORT")
    p_serve.add_argument("--cors-origin", action="append", help="allowed origin (repeatable)")
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        payload = args.func(args)
    except CliError as exc:
        _emit({"error": exc.code, "message": str(exc)})
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, pipeline.SchemaError, artifact_io.ArtifactError) as exc:
        _emit({"error": "runtime_error", "message": str(exc)})
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _emit(payload)
    return 0


if __name__ == "__main__":
    sys.exit(main())
