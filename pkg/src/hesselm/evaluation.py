"""Stratified k-fold evaluation, confusion metrics and lambda sweeps.

Every fitted quantity (partition bound, normalizer, output weights) is fitted
inside the fold from training indices only; test rows are touched only by
``transform`` and ``predict``.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import EvalConfig, FeatureConfig, ModelConfig, PipelineConfig
from .elm import VARIANTS, predict, train
from .errors import ValidationError
from .features import FeatureExtractor, apply_normalizer, fit_normalizer, sodp

__all__ = [
    "ConfusionMatrix",
    "Metrics",
    "Dataset",
    "FoldReport",
    "CVReport",
    "SweepRow",
    "SweepReport",
    "metrics",
    "stratified_kfold",
    "cross_validate",
    "cross_validate_features",
    "lambda_sweep_report",
    "write_fold_csv",
    "summary_text",
]


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with rows = true class and columns = predicted class."""

    counts: np.ndarray
    class_labels: tuple

    @classmethod
    def from_predictions(cls, y_true, y_pred, class_labels) -> "ConfusionMatrix":
        class_labels = tuple(class_labels)
        index = {c: i for i, c in enumerate(class_labels)}
        counts = np.zeros((len(class_labels), len(class_labels)), dtype=np.int64)
        for t, p in zip(y_true, y_pred):
            counts[index[t], index[p]] += 1
        return cls(counts, class_labels)

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if self.class_labels != other.class_labels:
            raise ValidationError("cannot add confusion matrices over different classes")
        return ConfusionMatrix(self.counts + other.counts, self.class_labels)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def correct(self) -> int:
        return int(np.trace(self.counts))

    def binary(self, positive_class) -> tuple[int, int, int, int]:
        """``(tp, fp, fn, tn)`` treating every other class as negative."""
        try:
            p = self.class_labels.index(positive_class)
        except ValueError:
            raise ValidationError(
                f"positive class {positive_class!r} is not one of {list(self.class_labels)}"
            ) from None
        tp = int(self.counts[p, p])
        fp = int(self.counts[:, p].sum()) - tp
        fn = int(self.counts[p, :].sum()) - tp
        tn = self.total - tp - fp - fn
        return tp, fp, fn, tn


@dataclass(frozen=True)
class Metrics:
    """Precision, sensitivity and overall accuracy; NaN marks an undefined ratio."""

    precision: float
    sensitivity: float
    accuracy: float


def _ratio(num: int, den: int) -> float:
    return num / den if den else math.nan


def metrics(cm: ConfusionMatrix, positive_class) -> Metrics:
    if cm.total == 0:
        raise ValidationError("confusion matrix is empty")
    tp, fp, fn, _ = cm.binary(positive_class)
    return Metrics(_ratio(tp, tp + fp), _ratio(tp, tp + fn), cm.correct / cm.total)


def stratified_kfold(labels: Sequence, k: int = 5, seed=0, groups: Sequence | None = None):
    """Split indices into ``k`` folds with per-class round-robin assignment.

    Each class is shuffled with a generator seeded by ``seed`` and dealt onto
    the folds in turn, continuing from where the previous class stopped so
    fold sizes differ by at most one. With ``groups`` the unit of assignment
    is the group (every member of a group lands in the same fold).

    Returns
    -------
    list of (train_indices, test_indices)
    """
    if k < 2:
        raise ValidationError(f"k must be at least 2, got {k}")
    labels = list(labels)
    if groups is None:
        units = [[i] for i in range(len(labels))]
        unit_labels = labels
    else:
        groups = list(groups)
        if len(groups) != len(labels):
            raise ValidationError("groups and labels differ in length")
        members: dict = {}
        for i, g in enumerate(groups):
            members.setdefault(g, []).append(i)
        units, unit_labels = [], []
        for g, idx in members.items():
            kinds = {labels[i] for i in idx}
            if len(kinds) != 1:
                raise ValidationError(f"group {g!r} mixes classes {sorted(map(str, kinds))}")
            units.append(idx)
            unit_labels.append(labels[idx[0]])
    by_class: dict = {}
    for u, label in enumerate(unit_labels):
        by_class.setdefault(label, []).append(u)
    what = "samples" if groups is None else "groups"
    for label, members in by_class.items():
        if len(members) < k:
            raise ValidationError(f"class {label!r} has {len(members)} {what}, fewer than k={k}")

    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(labels), dtype=np.int64)
    offset = 0
    for label in sorted(by_class, key=str):
        members = np.array(by_class[label])
        members = members[rng.permutation(members.size)]
        for position, u in enumerate(members):
            fold_of[units[u]] = (offset + position) % k
        offset = (offset + members.size) % k
    everything = np.arange(len(labels))
    return [(everything[fold_of != f], everything[fold_of == f]) for f in range(k)]


@dataclass(frozen=True)
class Dataset:
    """SODP point sets with labels and subject ids, one entry per segment."""

    point_sets: tuple
    labels: tuple
    groups: tuple

    @classmethod
    def from_segments(cls, segments) -> "Dataset":
        segments = list(segments)
        return cls(
            tuple(sodp(s) for s in segments),
            tuple(s.label for s in segments),
            tuple(s.source_id for s in segments),
        )

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def class_labels(self) -> tuple:
        return tuple(sorted(set(self.labels), key=str))


@dataclass(frozen=True)
class FoldReport:
    fold: int
    confusion: ConfusionMatrix
    lam: float
    press: float
    n_train: int
    n_test: int


@dataclass(frozen=True)
class CVReport:
    folds: tuple
    confusion: ConfusionMatrix
    metrics: Metrics
    positive_class: str


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _lambdas(model_cfg: ModelConfig, forced: float | None):
    if forced is not None:
        return [forced]
    return model_cfg.lambda_grid()


def _score_fold(fold, x_train, y_train, x_test, y_test, class_labels, model_cfg: ModelConfig,
                forced_lambda=None) -> FoldReport:
    model, sweep = train(
        x_train, y_train,
        variant=model_cfg.variant,
        m=model_cfg.m,
        activation=model_cfg.activation,
        lambda_candidates=_lambdas(model_cfg, forced_lambda),
        seed=model_cfg.seed,
        class_labels=class_labels,
    )
    predicted, _ = predict(model, x_test)
    cm = ConfusionMatrix.from_predictions(y_test, predicted, class_labels)
    press = sweep.best_press if sweep is not None else math.nan
    return FoldReport(fold, cm, model.lam, press, len(y_train), len(y_test))


def _fold_features(dataset: Dataset, feature_cfg: FeatureConfig, train_idx, test_idx):
    extractor = FeatureExtractor.fit(
        [dataset.point_sets[i] for i in train_idx],
        feature_cfg.kind, feature_cfg.regions, feature_cfg.normalize,
    )
    x_train = extractor.transform([dataset.point_sets[i] for i in train_idx])
    x_test = extractor.transform([dataset.point_sets[i] for i in test_idx])
    return x_train, x_test


def _splits(dataset: Dataset, eval_cfg: EvalConfig):
    groups = dataset.groups if eval_cfg.grouping == "subject" else None
    return stratified_kfold(dataset.labels, eval_cfg.k, eval_cfg.seed, groups)


def _aggregate(reports, class_labels, positive_class) -> CVReport:
    total = ConfusionMatrix(np.zeros((len(class_labels),) * 2, dtype=np.int64), tuple(class_labels))
    for r in reports:
        total = total + r.confusion
    return CVReport(tuple(reports), total, metrics(total, positive_class), positive_class)


def _positive(class_labels, eval_cfg: EvalConfig):
    if eval_cfg.positive_class not in class_labels:
        raise ValidationError(
            f"positive class {eval_cfg.positive_class!r} is not one of {list(class_labels)}"
        )
    return eval_cfg.positive_class


def cross_validate(dataset: Dataset, config: PipelineConfig, threads: int = 1,
                   forced_lambda: float | None = None) -> CVReport:
    """k-fold evaluation of the full feature + model pipeline.

    Aggregate metrics come from the confusion matrices summed over folds.
    """
    class_labels = dataset.class_labels
    positive = _positive(class_labels, config.evaluation)
    splits = _splits(dataset, config.evaluation)
    labels = np.array(dataset.labels, dtype=object)

    def run(item):
        fold, (train_idx, test_idx) = item
        x_train, x_test = _fold_features(dataset, config.features, train_idx, test_idx)
        return _score_fold(fold, x_train, list(labels[train_idx]), x_test, list(labels[test_idx]),
                           class_labels, config.model, forced_lambda)

    return _aggregate(_map(run, list(enumerate(splits)), threads), class_labels, positive)


def cross_validate_features(x, labels, model_cfg: ModelConfig, eval_cfg: EvalConfig,
                            threads: int = 1, normalize: bool = True) -> CVReport:
    """k-fold evaluation on a precomputed feature matrix (normalizer fitted per fold)."""
    x = np.asarray(x, dtype=np.float64)
    labels = np.array(list(labels), dtype=object)
    class_labels = tuple(sorted(set(labels), key=str))
    positive = _positive(class_labels, eval_cfg)
    splits = stratified_kfold(list(labels), eval_cfg.k, eval_cfg.seed)

    def run(item):
        fold, (train_idx, test_idx) = item
        x_train, x_test = x[train_idx], x[test_idx]
        if normalize:
            norm = fit_normalizer(x_train)
            x_train, x_test = apply_normalizer(norm, x_train), apply_normalizer(norm, x_test)
        return _score_fold(fold, x_train, list(labels[train_idx]), x_test, list(labels[test_idx]),
                           class_labels, model_cfg)

    return _aggregate(_map(run, list(enumerate(splits)), threads), class_labels, positive)


@dataclass(frozen=True)
class SweepRow:
    exponent: float
    lam: float
    mean_press: float
    accuracy: float
    fold_press: tuple
    fold_accuracy: tuple


@dataclass(frozen=True)
class SweepReport:
    variant: str
    rows: tuple

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["lambda_exponent", "lambda", "mean_press", "mean_accuracy"])
        for r in self.rows:
            writer.writerow([_num(r.exponent), _num(r.lam), _num(r.mean_press), _num(r.accuracy)])
        return buf.getvalue()

    def chart(self, width: int = 40) -> str:
        """Plain-text bars of accuracy and PRESS per lambda."""
        press = np.array([r.mean_press for r in self.rows])
        top = press.max() if press.size and press.max() > 0 else 1.0
        lines = [f"{'ln(lambda)':>10}  {'accuracy':<{width + 8}}  PRESS"]
        for r in self.rows:
            acc_bar = "#" * int(round(r.accuracy * width))
            press_bar = "*" * int(round(r.mean_press / top * width))
            lines.append(f"{_num(r.exponent):>10}  {acc_bar:<{width}} {r.accuracy:6.4f}  {press_bar} {r.mean_press:.4g}")
        return "\n".join(lines) + "\n"


def _num(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return format(x, ".17g")


def lambda_sweep_report(dataset: Dataset, config: PipelineConfig, exponents=None,
                        threads: int = 1) -> SweepReport:
    """Cross-validate with each lambda forced in turn.

    Rows are ordered by exponent; ``mean_press`` is the mean training-fold
    PRESS and ``accuracy`` the micro-averaged test accuracy. Fold features
    are fitted once per fold and shared by every lambda.
    """
    variant = config.model.variant
    if variant not in VARIANTS[1::2]:
        raise ValidationError(f"a lambda sweep needs a regularized variant, got {variant!r}")
    if exponents is None:
        exponents = config.model.exponents
    exponents = sorted(float(e) for e in exponents)
    if not exponents:
        raise ValidationError("the lambda grid is empty")
    class_labels = dataset.class_labels
    _positive(class_labels, config.evaluation)
    splits = _splits(dataset, config.evaluation)
    labels = np.array(dataset.labels, dtype=object)

    def run(item):
        fold, (train_idx, test_idx) = item
        x_train, x_test = _fold_features(dataset, config.features, train_idx, test_idx)
        y_train, y_test = list(labels[train_idx]), list(labels[test_idx])
        return [
            _score_fold(fold, x_train, y_train, x_test, y_test, class_labels, config.model, math.exp(e))
            for e in exponents
        ]

    per_fold = _map(run, list(enumerate(splits)), threads)
    rows = []
    for j, e in enumerate(exponents):
        reports = [fold_reports[j] for fold_reports in per_fold]
        correct = sum(r.confusion.correct for r in reports)
        total = sum(r.confusion.total for r in reports)
        fold_press = tuple(r.press for r in reports)
        rows.append(SweepRow(
            exponent=e,
            lam=math.exp(e),
            mean_press=float(np.mean(fold_press)),
            accuracy=correct / total,
            fold_press=fold_press,
            fold_accuracy=tuple(r.confusion.correct / r.confusion.total for r in reports),
        ))
    return SweepReport(variant, tuple(rows))


def write_fold_csv(path, report: CVReport) -> None:
    """``fold,lambda,press,tp,fp,fn,tn,precision,sensitivity,accuracy``; last row is ``all``."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["fold", "lambda", "press", "tp", "fp", "fn", "tn",
                         "precision", "sensitivity", "accuracy"])
        for r in report.folds:
            m = metrics(r.confusion, report.positive_class)
            writer.writerow([r.fold, _num(r.lam), _num(r.press), *r.confusion.binary(report.positive_class),
                             _num(m.precision), _num(m.sensitivity), _num(m.accuracy)])
        m = report.metrics
        writer.writerow(["all", "", "", *report.confusion.binary(report.positive_class),
                         _num(m.precision), _num(m.sensitivity), _num(m.accuracy)])


def summary_text(report: CVReport, config: PipelineConfig) -> str:
    tp, fp, fn, tn = report.confusion.binary(report.positive_class)
    m = report.metrics
    lines = [
        "[summary]",
        f"variant = {config.model.variant}",
        f"features = {config.features.kind}",
        f"folds = {len(report.folds)}",
        f"positive_class = {report.positive_class}",
        f"samples = {report.confusion.total}",
        f"tp = {tp}",
        f"fp = {fp}",
        f"fn = {fn}",
        f"tn = {tn}",
        f"precision = {_num(m.precision)}",
        f"sensitivity = {_num(m.sensitivity)}",
        f"accuracy = {_num(m.accuracy)}",
        "",
        "[lambda]",
    ]
    lines += [f"fold{r.fold} = {_num(r.lam)}" for r in report.folds]
    return "\n".join(lines) + "\n"
