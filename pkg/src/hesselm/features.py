"""Second-order difference plots and region-occupancy features.

A segment ``x`` maps to points ``(x[i+1] - x[i], x[i+2] - x[i+1])``. The plane
is cut into regions by one of four partitions and each region's occupancy is
one feature:

``circled``   K concentric annuli of equal radial width
``squared``   K nested square bands (Chebyshev distance)
``inclined``  a central disc plus K - 1 equal-angle sectors
``grid``      a g x g lattice of cells over ``[-bound, bound]^2``

The outer ``bound`` is fitted on training data and persisted with the model.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatVersionError, ModelFormatError, ValidationError

__all__ = [
    "KINDS",
    "DEFAULT_REGION_COUNTS",
    "PartitionSpec",
    "Normalizer",
    "FeatureExtractor",
    "sodp",
    "extent",
    "fit_bound",
    "assign_regions",
    "extract",
    "extract_many",
    "fit_normalizer",
    "apply_normalizer",
    "write_feature_csv",
    "read_feature_csv",
]

KINDS = ("circled", "squared", "inclined", "grid")
AGGREGATIONS = ("count", "probability", "shannon")
DEFAULT_REGION_COUNTS = {"circled": 15, "squared": 15, "inclined": 17, "grid": 8}
BOUND_PERCENTILE = 99.0
EXTRACTOR_FORMAT_VERSION = 1


@dataclass(frozen=True)
class PartitionSpec:
    kind: str
    region_count: int | None = None
    bound: float | None = None
    normalize: str = "probability"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown partition kind {self.kind!r}; expected one of {KINDS}")
        if self.region_count is None:
            object.__setattr__(self, "region_count", DEFAULT_REGION_COUNTS[self.kind])
        if int(self.region_count) != self.region_count or self.region_count < 2:
            raise ValidationError(f"region_count must be an integer >= 2, got {self.region_count}")
        object.__setattr__(self, "region_count", int(self.region_count))
        if self.normalize not in AGGREGATIONS:
            raise ValidationError(f"unknown aggregation {self.normalize!r}; expected one of {AGGREGATIONS}")
        if self.bound is not None and not (math.isfinite(self.bound) and self.bound > 0):
            raise ValidationError(f"bound must be positive and finite, got {self.bound}")

    @property
    def feature_count(self) -> int:
        if self.kind == "grid":
            return self.region_count ** 2
        return self.region_count

    @property
    def fitted(self) -> bool:
        return self.bound is not None


def sodp(segment) -> np.ndarray:
    """Second-order difference plot of a segment as an ``(n - 2, 2)`` array."""
    x = np.asarray(getattr(segment, "samples", segment), dtype=np.float64)
    if x.ndim != 1 or x.size < 3:
        raise ValidationError(f"SODP needs a 1-D segment of at least 3 samples, got shape {x.shape}")
    d = np.diff(x)
    return np.column_stack((d[:-1], d[1:]))


def extent(points: np.ndarray, kind: str) -> np.ndarray:
    """Per-point distance used by a partition kind (radial or Chebyshev)."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if kind in ("circled", "inclined"):
        return np.hypot(points[:, 0], points[:, 1])
    if kind in ("squared", "grid"):
        return np.max(np.abs(points), axis=1)
    raise ValidationError(f"unknown partition kind {kind!r}")


def fit_bound(training_points, kind: str) -> float:
    """99th percentile (nearest rank) of the kind's extent over all training points.

    Falls back to the maximum extent when the percentile itself is zero.
    """
    sets = [np.asarray(p, dtype=np.float64).reshape(-1, 2) for p in training_points]
    if not sets or all(s.shape[0] == 0 for s in sets):
        raise ValidationError("fit_bound needs at least one non-empty point set")
    distances = np.concatenate([extent(s, kind) for s in sets])
    top = float(np.max(distances))
    if top == 0.0:
        raise ValidationError("every training point is at the origin; the partition bound is degenerate")
    bound = float(np.percentile(distances, BOUND_PERCENTILE, method="inverted_cdf"))
    return bound if bound > 0.0 else top


def _radial_edges(spec: PartitionSpec) -> np.ndarray:
    k = spec.region_count
    return np.arange(1, k + 1) * (spec.bound / k)


def _sector_edges(spec: PartitionSpec) -> np.ndarray:
    sectors = spec.region_count - 1
    return -math.pi + np.arange(sectors + 1) * (2.0 * math.pi / sectors)


def _grid_edges(spec: PartitionSpec) -> np.ndarray:
    g = spec.region_count
    return -spec.bound + np.arange(g + 1) * (2.0 * spec.bound / g)


def assign_regions(points, spec: PartitionSpec) -> np.ndarray:
    """Region index of every point under a fitted partition.

    Bands (circled, squared) are ``(r_{k-1}, r_k]`` with the origin in the
    first band and everything past ``bound`` in the last. Inclined puts
    ``r <= bound / K`` in region 0 and the rest in sector ``1 + j`` where
    sector ``j`` covers angles ``[-pi + j w, -pi + (j + 1) w)``, the last one
    closed at ``pi``. Grid cells are half-open ``[lo, hi)`` per axis, the last
    cell closed, and points outside the box are clamped to the border cells;
    the index is ``row * g + col`` with ``row`` from ``b`` and ``col`` from ``a``.
    """
    if not spec.fitted:
        raise ValidationError("partition bound has not been fitted")
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    k = spec.region_count
    if spec.kind in ("circled", "squared"):
        edges = _radial_edges(spec)
        idx = np.searchsorted(edges, extent(points, spec.kind), side="left")
        return np.minimum(idx, k - 1)
    if spec.kind == "inclined":
        radius = extent(points, "inclined")
        angle = np.arctan2(points[:, 1], points[:, 0])
        edges = _sector_edges(spec)
        sector = np.clip(np.searchsorted(edges, angle, side="right") - 1, 0, k - 2)
        return np.where(radius <= spec.bound / k, 0, sector + 1)
    edges = _grid_edges(spec)
    col = np.clip(np.searchsorted(edges, points[:, 0], side="right") - 1, 0, k - 1)
    row = np.clip(np.searchsorted(edges, points[:, 1], side="right") - 1, 0, k - 1)
    return row * k + col


def _aggregate(tally: np.ndarray, mode: str) -> np.ndarray:
    if mode == "count":
        return tally.astype(np.float64)
    total = tally.sum()
    if total == 0:
        return np.zeros(tally.size)
    p = tally / total
    if mode == "probability":
        return p
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(p > 0, -p * np.log(p), 0.0)


def extract(points, spec: PartitionSpec) -> np.ndarray:
    """Region occupancy features of one SODP point set."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if points.shape[0] == 0:
        warnings.warn("empty SODP point set; returning all-zero features", stacklevel=2)
        return np.zeros(spec.feature_count)
    tally = np.bincount(assign_regions(points, spec), minlength=spec.feature_count)
    return _aggregate(tally, spec.normalize)


def extract_many(point_sets, spec: PartitionSpec) -> np.ndarray:
    return np.array([extract(p, spec) for p in point_sets]).reshape(-1, spec.feature_count)


@dataclass(frozen=True)
class Normalizer:
    """Per-feature training min/max for linear scaling onto [-1, 1]."""

    minimum: np.ndarray
    maximum: np.ndarray

    @property
    def dimension(self) -> int:
        return self.minimum.size


def fit_normalizer(train_features) -> Normalizer:
    rows = np.asarray(train_features, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows[None, :]
    if rows.shape[0] == 0:
        raise ValidationError("cannot fit a normalizer on an empty training set")
    return Normalizer(minimum=rows.min(axis=0), maximum=rows.max(axis=0))


def apply_normalizer(n: Normalizer, features) -> np.ndarray:
    """``2 (x - min) / (max - min) - 1``; constant features map to 0, no clipping."""
    x = np.asarray(features, dtype=np.float64)
    if x.shape[-1] != n.dimension:
        raise DimensionError(f"normalizer was fitted on {n.dimension} features, got {x.shape[-1]}")
    span = n.maximum - n.minimum
    constant = span == 0
    scaled = 2.0 * (x - n.minimum) / np.where(constant, 1.0, span) - 1.0
    return np.where(constant, 0.0, scaled)


@dataclass(frozen=True)
class FeatureExtractor:
    """Fitted partition geometry plus optional normalizer."""

    spec: PartitionSpec
    normalizer: Normalizer | None = None
    metadata: dict = field(default_factory=dict)

    @classmethod
    def fit(cls, point_sets, kind: str, region_count: int | None = None,
            normalize: str = "probability", metadata: dict | None = None) -> "FeatureExtractor":
        point_sets = list(point_sets)
        spec = PartitionSpec(kind, region_count, normalize=normalize)
        spec = replace(spec, bound=fit_bound(point_sets, kind))
        raw = extract_many(point_sets, spec)
        return cls(spec, fit_normalizer(raw), dict(metadata or {}))

    @property
    def feature_count(self) -> int:
        return self.spec.feature_count

    def raw_features(self, point_sets) -> np.ndarray:
        return extract_many(point_sets, self.spec)

    def transform(self, point_sets) -> np.ndarray:
        raw = self.raw_features(point_sets)
        return raw if self.normalizer is None else apply_normalizer(self.normalizer, raw)

    def to_dict(self) -> dict:
        doc = {
            "format_version": EXTRACTOR_FORMAT_VERSION,
            "kind": self.spec.kind,
            "region_count": self.spec.region_count,
            "bound": self.spec.bound,
            "normalize": self.spec.normalize,
            "normalizer": None,
            "metadata": dict(self.metadata),
        }
        if self.normalizer is not None:
            doc["normalizer"] = {
                "minimum": self.normalizer.minimum.tolist(),
                "maximum": self.normalizer.maximum.tolist(),
            }
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "FeatureExtractor":
        try:
            version = doc["format_version"]
            if version > EXTRACTOR_FORMAT_VERSION:
                raise FormatVersionError(
                    f"feature extractor format version {version} is newer than supported "
                    f"version {EXTRACTOR_FORMAT_VERSION}"
                )
            spec = PartitionSpec(doc["kind"], doc["region_count"], doc["bound"], doc["normalize"])
            norm = doc["normalizer"]
            normalizer = None
            if norm is not None:
                normalizer = Normalizer(
                    np.array(norm["minimum"], dtype=np.float64),
                    np.array(norm["maximum"], dtype=np.float64),
                )
            return cls(spec, normalizer, dict(doc.get("metadata", {})))
        except (KeyError, TypeError) as exc:
            raise ModelFormatError(f"malformed feature extractor document: {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "FeatureExtractor":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: not a valid extractor document: {exc}") from exc
        return cls.from_dict(doc)


def write_feature_csv(path, features, labels) -> None:
    """One row per segment: ``f0..f{d-1}`` then ``label``."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape[0] != len(labels):
        raise DimensionError(f"{features.shape[0]} feature rows but {len(labels)} labels")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"f{i}" for i in range(features.shape[1])] + ["label"])
        for row, label in zip(features, labels):
            writer.writerow([f"{x:.17g}" for x in row] + [label])


def read_feature_csv(path) -> tuple[np.ndarray, list[str]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[-1] != "label":
            raise ValidationError(f"{path}: feature CSV must end with a 'label' column")
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValidationError(f"{path}: line {lineno}: expected {len(header)} columns, got {len(row)}")
            rows.append([float(x) for x in row[:-1]])
            labels.append(row[-1])
    return np.array(rows, dtype=np.float64).reshape(-1, len(header) - 1), labels
