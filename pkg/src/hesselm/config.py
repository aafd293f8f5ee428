"""Pipeline configuration: INI sections with defaults, overridable per key."""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .elm import ACTIVATIONS, VARIANTS
from .errors import ValidationError
from .features import AGGREGATIONS, DEFAULT_REGION_COUNTS, KINDS

__all__ = [
    "PreprocessConfig",
    "FeatureConfig",
    "ModelConfig",
    "EvalConfig",
    "SynthConfig",
    "DataConfig",
    "PipelineConfig",
    "load_config",
    "dump_config",
]


@dataclass(frozen=True)
class PreprocessConfig:
    w1_ms: float = 200.0
    w2_ms: float = 600.0
    notch: bool = True
    f0_hz: float = 60.0
    q: float = 30.0
    segment_seconds: float = 10.0

    def validate(self):
        if not (self.w1_ms > 0 and self.w2_ms > self.w1_ms):
            raise ValidationError("preprocess: need 0 < w1_ms < w2_ms")
        if not (self.f0_hz > 0 and self.q > 0):
            raise ValidationError("preprocess: f0_hz and q must be positive")
        if not self.segment_seconds > 0:
            raise ValidationError("preprocess: segment_seconds must be positive")


@dataclass(frozen=True)
class FeatureConfig:
    kind: str = "inclined"
    region_count: int = 0
    normalize: str = "probability"

    def validate(self):
        if self.kind not in KINDS:
            raise ValidationError(f"features: kind must be one of {KINDS}")
        if self.normalize not in AGGREGATIONS:
            raise ValidationError(f"features: normalize must be one of {AGGREGATIONS}")
        if self.region_count != 0 and self.region_count < 2:
            raise ValidationError("features: region_count must be >= 2 (0 selects the default)")

    @property
    def regions(self) -> int:
        return self.region_count or DEFAULT_REGION_COUNTS[self.kind]


@dataclass(frozen=True)
class ModelConfig:
    variant: str = "r-hesselm"
    m: int = 50
    activation: str = "sigmoid"
    lambda_min_exp: int = -20
    lambda_max_exp: int = -1
    lambda_fixed: float = math.nan
    seed: int = 0

    def validate(self):
        if self.variant not in VARIANTS:
            raise ValidationError(f"model: variant must be one of {VARIANTS}")
        if self.activation not in ACTIVATIONS:
            raise ValidationError(f"model: activation must be one of {tuple(ACTIVATIONS)}")
        if self.m < 1:
            raise ValidationError("model: m must be >= 1")
        if self.lambda_min_exp > self.lambda_max_exp:
            raise ValidationError("model: lambda_min_exp must not exceed lambda_max_exp")
        if not math.isnan(self.lambda_fixed) and self.lambda_fixed < 0:
            raise ValidationError("model: lambda_fixed must be nonnegative")

    @property
    def exponents(self) -> np.ndarray:
        return np.arange(self.lambda_min_exp, self.lambda_max_exp + 1)

    def lambda_grid(self) -> np.ndarray:
        if not math.isnan(self.lambda_fixed):
            return np.array([self.lambda_fixed])
        return np.exp(self.exponents.astype(np.float64))


@dataclass(frozen=True)
class EvalConfig:
    k: int = 5
    positive_class: str = "CHF"
    grouping: str = "segment"
    seed: int = 0

    def validate(self):
        if self.k < 2:
            raise ValidationError("evaluation: k must be >= 2")
        if self.grouping not in ("segment", "subject"):
            raise ValidationError("evaluation: grouping must be 'segment' or 'subject'")


@dataclass(frozen=True)
class SynthConfig:
    records_per_class: int = 10
    segments_per_record: int = 20
    sampling_rate_hz: float = 250.0
    seed: int = 7

    def validate(self):
        if self.records_per_class < 1 or self.segments_per_record < 1:
            raise ValidationError("synth: counts must be positive")
        if not self.sampling_rate_hz > 0:
            raise ValidationError("synth: sampling_rate_hz must be positive")


@dataclass(frozen=True)
class DataConfig:
    manifest: str = ""
    output_dir: str = "out"
    threads: int = 1

    def validate(self):
        if self.threads < 1:
            raise ValidationError("data: threads must be >= 1")


@dataclass(frozen=True)
class PipelineConfig:
    data: DataConfig = field(default_factory=DataConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    evaluation: EvalConfig = field(default_factory=EvalConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    def validate(self) -> "PipelineConfig":
        for f in fields(self):
            getattr(self, f.name).validate()
        return self

    @property
    def output_dir(self) -> Path:
        return Path(self.data.output_dir)


def _coerce(section: str, key: str, raw: str, template):
    try:
        if isinstance(template, bool):
            lowered = raw.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(template, int):
            return int(raw)
        if isinstance(template, float):
            return float(raw) if raw.strip() else math.nan
        return raw.strip()
    except ValueError:
        raise ValidationError(f"[{section}] {key}: cannot parse {raw!r}") from None


def _apply(cfg: PipelineConfig, section: str, key: str, raw: str) -> PipelineConfig:
    names = {f.name for f in fields(cfg)}
    if section not in names:
        raise ValidationError(f"unknown config section [{section}]")
    sub = getattr(cfg, section)
    keys = {f.name for f in fields(sub)}
    if key not in keys:
        raise ValidationError(f"unknown key {key!r} in [{section}]; expected one of {sorted(keys)}")
    value = _coerce(section, key, raw, getattr(sub, key))
    return replace(cfg, **{section: replace(sub, **{key: value})})


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Defaults, then the INI file at ``path``, then ``{"section.key": value}`` overrides."""
    cfg = PipelineConfig()
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise ValidationError(f"{path}: {exc}") from exc
        for section in parser.sections():
            for key, raw in parser.items(section):
                cfg = _apply(cfg, section, key, raw)
    for dotted, raw in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if not key:
            raise ValidationError(f"override {dotted!r} must look like section.key")
        cfg = _apply(cfg, section, key, str(raw))
    return cfg.validate()


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


def dump_config(cfg: PipelineConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    for name, section in asdict(cfg).items():
        parser[name] = {k: _format(v) for k, v in section.items()}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
