"""Command-line entry point: ``hesselm <command> [--config FILE] [--section.key VALUE ...]``.

Every command writes into ``data.output_dir`` and records the effective
configuration there as ``config.ini``. Outputs are byte-identical across
runs with the same configuration, whatever ``--threads`` is set to.
"""

from __future__ import annotations

import argparse
import csv
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import synth
from .config import PipelineConfig, dump_config, load_config
from .elm import load_model, predict, save_model, train
from .errors import HessElmError, ValidationError
from .evaluation import (
    ConfusionMatrix,
    Dataset,
    cross_validate,
    lambda_sweep_report,
    metrics,
    summary_text,
    write_fold_csv,
)
from .features import FeatureExtractor, read_feature_csv, write_feature_csv
from .signals import Segment, load_signal, notch_filter, read_manifest, remove_baseline, segment, write_signal

SEGMENT_COLUMNS = ["segment_id", "source_id", "label", "start_index", "length", "path"]


def _paths(cfg: PipelineConfig) -> dict:
    out = cfg.output_dir
    return {
        "data": out / "data",
        "segments_dir": out / "segments",
        "segments": out / "segments.csv",
        "features": out / "features.csv",
        "extractor": out / "extractor.json",
        "model": out / "model.json",
        "folds": out / "folds.csv",
        "summary": out / "summary.txt",
        "sweep": out / "sweep.csv",
        "chart": out / "sweep_chart.txt",
        "config": out / "config.ini",
    }


def _echo_config(cfg: PipelineConfig) -> None:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    _paths(cfg)["config"].write_text(dump_config(cfg), encoding="utf-8")


def cmd_synth(cfg: PipelineConfig) -> Path:
    records = synth.synth_dataset(
        cfg.synth.records_per_class,
        cfg.synth.segments_per_record,
        cfg.preprocess.segment_seconds,
        cfg.synth.sampling_rate_hz,
        cfg.synth.seed,
    )
    manifest = synth.write_dataset(_paths(cfg)["data"], records)
    print(f"wrote {len(records)} synthetic records; manifest {manifest}")
    return manifest


def cmd_preprocess(cfg: PipelineConfig) -> Path:
    if not cfg.data.manifest:
        raise ValidationError("no manifest given; set data.manifest")
    entries = read_manifest(cfg.data.manifest)
    if not entries:
        raise ValidationError(f"{cfg.data.manifest}: no records")
    missing = [str(e.path) for e in entries if not e.path.is_file()]
    if missing:
        raise ValidationError("missing record files:\n  " + "\n  ".join(missing))
    p = _paths(cfg)
    p["segments_dir"].mkdir(parents=True, exist_ok=True)
    pre = cfg.preprocess
    rows = []
    for entry in entries:
        rec = load_signal(entry.path, entry.sampling_rate_hz, entry.label)
        rec = remove_baseline(rec, pre.w1_ms, pre.w2_ms)
        if pre.notch:
            rec = notch_filter(rec, pre.f0_hz, pre.q)
        for i, seg in enumerate(segment(rec, pre.segment_seconds)):
            seg_id = f"{rec.source_id}_{i:04d}"
            path = p["segments_dir"] / f"{seg_id}.txt"
            write_signal(path, seg.samples)
            rows.append([seg_id, rec.source_id, rec.label, seg.start_index, seg.samples.size,
                         path.relative_to(cfg.output_dir).as_posix()])
    with p["segments"].open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SEGMENT_COLUMNS)
        writer.writerows(rows)
    print(f"wrote {len(rows)} segments from {len(entries)} records; manifest {p['segments']}")
    return p["segments"]


def load_segments(path) -> list[Segment]:
    """Read a segment manifest written by ``preprocess``."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"segment manifest {path} not found; run preprocess first")
    segments = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(SEGMENT_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValidationError(f"{path}: segment manifest is missing columns {sorted(missing)}")
        for row in reader:
            seg_path = path.parent / row["path"]
            # the rate only matters for filtering, which is already done
            rec = load_signal(seg_path, 1.0, row["label"], row["source_id"])
            segments.append(Segment(rec.samples, row["label"], row["source_id"], int(row["start_index"])))
    if not segments:
        raise ValidationError(f"{path}: no segments")
    return segments


def _dataset(cfg: PipelineConfig) -> Dataset:
    return Dataset.from_segments(load_segments(_paths(cfg)["segments"]))


def cmd_features(cfg: PipelineConfig) -> Path:
    ds = _dataset(cfg)
    p = _paths(cfg)
    extractor = FeatureExtractor.fit(
        ds.point_sets, cfg.features.kind, cfg.features.regions, cfg.features.normalize,
        metadata={"fit_scope": "full input (not cross-validated)"},
    )
    write_feature_csv(p["features"], extractor.transform(ds.point_sets), list(ds.labels))
    extractor.save(p["extractor"])
    print(f"wrote {len(ds)} x {extractor.feature_count} features to {p['features']} "
          "(extractor fitted on the full input; use evaluate for cross-validated scores)")
    return p["features"]


def _lambda_candidates(cfg: PipelineConfig):
    return cfg.model.lambda_grid() if cfg.model.variant in ("r-elm", "r-hesselm") else None


def cmd_train(cfg: PipelineConfig) -> Path:
    p = _paths(cfg)
    x, labels = read_feature_csv(p["features"])
    extractor = FeatureExtractor.load(p["extractor"]) if p["extractor"].is_file() else None
    mc = cfg.model
    model, sweep = train(
        x, labels, variant=mc.variant, m=mc.m, activation=mc.activation,
        lambda_candidates=_lambda_candidates(cfg), seed=mc.seed,
        extractor=extractor.to_dict() if extractor is not None else None,
    )
    save_model(model, p["model"])
    press = f", PRESS {sweep.best_press:.6g}" if sweep is not None else ""
    print(f"trained {mc.variant} (m={mc.m}) on {len(labels)} rows: lambda {model.lam:.6g}{press}; "
          f"model {p['model']}")
    return p["model"]


def _print_triple(m, positive) -> None:
    print(f"precision ({positive}) = {m.precision:.4f}")
    print(f"sensitivity ({positive}) = {m.sensitivity:.4f}")
    print(f"accuracy = {m.accuracy:.4f}")


def cmd_evaluate(cfg: PipelineConfig, threads: int = 1, model_path=None, features_path=None) -> Path:
    p = _paths(cfg)
    if model_path is not None:
        model = load_model(model_path)
        x, labels = read_feature_csv(features_path or p["features"])
        predicted, _ = predict(model, x)
        unknown = sorted(set(labels) - set(model.class_labels))
        if unknown:
            raise ValidationError(f"labels {unknown} are not classes of the model {list(model.class_labels)}")
        cm = ConfusionMatrix.from_predictions(labels, predicted, model.class_labels)
        m = metrics(cm, cfg.evaluation.positive_class)
        print(f"scored {model_path} on {len(labels)} rows (no cross-validation)")
        _print_triple(m, cfg.evaluation.positive_class)
        return Path(model_path)
    report = cross_validate(_dataset(cfg), cfg, threads=threads)
    write_fold_csv(p["folds"], report)
    p["summary"].write_text(summary_text(report, cfg), encoding="utf-8")
    print(f"{cfg.evaluation.k}-fold cross-validation, {cfg.model.variant} + {cfg.features.kind}")
    _print_triple(report.metrics, report.positive_class)
    return p["summary"]


def cmd_sweep(cfg: PipelineConfig, threads: int = 1) -> Path:
    p = _paths(cfg)
    report = lambda_sweep_report(_dataset(cfg), cfg, threads=threads)
    p["sweep"].write_text(report.to_csv(), encoding="utf-8")
    chart = report.chart()
    p["chart"].write_text(chart, encoding="utf-8")
    print(chart, end="")
    return p["sweep"]


def cmd_pipeline(cfg: PipelineConfig, threads: int = 1) -> Path:
    if not cfg.data.manifest:
        cfg = replace(cfg, data=replace(cfg.data, manifest=str(cmd_synth(cfg))))
        _echo_config(cfg)
    cmd_preprocess(cfg)
    cmd_features(cfg)
    cmd_train(cfg)
    summary = cmd_evaluate(cfg, threads)
    if cfg.model.variant in ("r-elm", "r-hesselm"):
        cmd_sweep(cfg, threads)
    return summary


COMMANDS = {
    "synth": "generate the synthetic two-class dataset",
    "preprocess": "filter and segment the records listed in data.manifest",
    "features": "fit the feature extractor on all segments and write the feature matrix",
    "train": "train a model on the feature matrix",
    "evaluate": "k-fold cross-validation, or score --model on --features",
    "sweep": "cross-validated accuracy and PRESS for every lambda in the grid",
    "pipeline": "synth (when no manifest is set), preprocess, features, train, evaluate, sweep",
}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hesselm",
        description="SODP features and Hessenberg-accelerated ELM classification of ECG segments.",
        epilog="Any configuration value can be set with --section.key VALUE, e.g. --model.m 80.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, help_text in COMMANDS.items():
        cmd = sub.add_parser(name, help=help_text, description=help_text)
        cmd.add_argument("--config", type=Path, help="INI configuration file")
        cmd.add_argument("--threads", type=int, help="worker threads for fold-level work (data.threads)")
        cmd.add_argument("--out", help="output directory (data.output_dir)")
        if name == "evaluate":
            cmd.add_argument("--model", type=Path, help="score this trained model instead of cross-validating")
            cmd.add_argument("--features", type=Path, help="feature CSV to score with --model")
    return parser


def _overrides(extra: list[str]) -> dict:
    overrides = {}
    i = 0
    while i < len(extra):
        flag = extra[i]
        if not flag.startswith("--") or "." not in flag:
            raise ValidationError(f"unrecognised argument {flag!r}")
        key, eq, value = flag[2:].partition("=")
        if not eq:
            if i + 1 >= len(extra):
                raise ValidationError(f"{flag} needs a value")
            value = extra[i + 1]
            i += 1
        overrides[key] = value
        i += 1
    return overrides


def main(argv=None) -> int:
    parser = _parser()
    args, extra = parser.parse_known_args(argv)
    try:
        overrides = _overrides(extra)
        if args.threads is not None:
            overrides["data.threads"] = str(args.threads)
        if args.out is not None:
            overrides["data.output_dir"] = args.out
        cfg = load_config(args.config, overrides)
        _echo_config(cfg)
        threads = cfg.data.threads
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            if args.command == "synth":
                cmd_synth(cfg)
            elif args.command == "preprocess":
                cmd_preprocess(cfg)
            elif args.command == "features":
                cmd_features(cfg)
            elif args.command == "train":
                cmd_train(cfg)
            elif args.command == "evaluate":
                if args.features is not None and args.model is None:
                    raise ValidationError("--features needs --model")
                cmd_evaluate(cfg, threads, args.model, args.features)
            elif args.command == "sweep":
                cmd_sweep(cfg, threads)
            else:
                cmd_pipeline(cfg, threads)
    except (HessElmError, OSError) as exc:
        print(f"hesselm {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
