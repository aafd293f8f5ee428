"""Waveform ingestion, baseline-wander removal, notch filtering and segmentation."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy import signal as sps

from .errors import ValidationError

__all__ = [
    "SignalRecord",
    "Segment",
    "ManifestEntry",
    "load_signal",
    "write_signal",
    "read_manifest",
    "write_manifest",
    "median_filter",
    "remove_baseline",
    "notch_filter",
    "segment",
]


@dataclass(frozen=True)
class SignalRecord:
    """A uniformly sampled waveform with its class label."""

    samples: np.ndarray
    sampling_rate_hz: float
    label: str
    source_id: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ValidationError("samples must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(samples)):
            raise ValidationError(f"record {self.source_id!r} has non-finite samples")
        if not self.sampling_rate_hz > 0:
            raise ValidationError(f"sampling rate must be positive, got {self.sampling_rate_hz}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class Segment:
    samples: np.ndarray
    label: str
    source_id: str
    start_index: int


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    label: str
    sampling_rate_hz: float


def load_signal(path, sampling_rate_hz: float, label: str, source_id: str | None = None) -> SignalRecord:
    """Read a plain-text or single-column CSV waveform, one sample per line.

    A single non-numeric first line is treated as a header. Blank lines are
    ignored. Any other unparsable line raises :class:`ValidationError` naming
    its 1-based line number.
    """
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    values = []
    for lineno, raw in enumerate(lines, start=1):
        text = raw.strip().rstrip(",").strip()
        if not text:
            continue
        try:
            values.append(float(text))
        except ValueError:
            if lineno == 1:
                continue
            raise ValidationError(f"{path}: line {lineno}: not a number: {raw!r}") from None
    if not values:
        raise ValidationError(f"{path}: no samples")
    return SignalRecord(
        samples=np.array(values),
        sampling_rate_hz=float(sampling_rate_hz),
        label=str(label),
        source_id=source_id if source_id is not None else path.stem,
    )


def write_signal(path, samples) -> None:
    """Write samples one per line with 17 significant digits (exact round trip)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("value\n")
        fh.writelines(f"{x:.17g}\n" for x in np.asarray(samples, dtype=np.float64))


def read_manifest(path) -> list[ManifestEntry]:
    """Parse a ``path,label,sampling_rate_hz`` manifest; paths resolve against its folder."""
    path = Path(path)
    entries = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"path", "label", "sampling_rate_hz"} - set(reader.fieldnames or ())
        if missing:
            raise ValidationError(f"{path}: manifest is missing columns {sorted(missing)}")
        for row in reader:
            entry_path = Path(row["path"])
            if not entry_path.is_absolute():
                entry_path = path.parent / entry_path
            entries.append(ManifestEntry(entry_path, row["label"], float(row["sampling_rate_hz"])))
    return entries


def write_manifest(path, entries) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["path", "label", "sampling_rate_hz"])
        for e in entries:
            entry_path = Path(e.path)
            try:
                entry_path = entry_path.relative_to(path.parent)
            except ValueError:
                pass
            writer.writerow([entry_path.as_posix(), e.label, repr(float(e.sampling_rate_hz))])


def _odd_window(ms: float, rate: float) -> int:
    size = int(round(ms * rate / 1000.0))
    return size + 1 if size % 2 == 0 else size


def median_filter(x, size: int) -> np.ndarray:
    """Running median with an odd window that shrinks symmetrically at the edges.

    Sample ``i`` uses the window ``x[i-h : i+h+1]`` with
    ``h = min(size // 2, i, n - 1 - i)``, so the first and last samples are
    returned unchanged.
    """
    x = np.asarray(x, dtype=np.float64)
    if size < 1 or size % 2 == 0:
        raise ValidationError(f"median window must be a positive odd integer, got {size}")
    n = x.size
    if size > n:
        raise ValidationError(f"median window of {size} samples exceeds signal length {n}")
    half = size // 2
    out = ndimage.median_filter(x, size=size, mode="nearest")
    for i in range(min(half, n)):
        for j in (i, n - 1 - i):
            h = min(j, n - 1 - j)
            out[j] = np.median(x[j - h:j + h + 1])
    return out


def remove_baseline(s: SignalRecord, w1_ms: float = 200.0, w2_ms: float = 600.0) -> SignalRecord:
    """Subtract a two-stage median baseline estimate.

    Window lengths are converted to samples and forced odd. The second,
    longer window is applied to the output of the first.
    """
    if not (w1_ms > 0 and w2_ms > 0):
        raise ValidationError("median window lengths must be positive")
    if not w1_ms < w2_ms:
        raise ValidationError(f"first window ({w1_ms} ms) must be shorter than the second ({w2_ms} ms)")
    n1 = _odd_window(w1_ms, s.sampling_rate_hz)
    n2 = _odd_window(w2_ms, s.sampling_rate_hz)
    baseline = median_filter(median_filter(s.samples, n1), n2)
    return replace(s, samples=s.samples - baseline)


def notch_filter(s: SignalRecord, f0_hz: float = 60.0, q: float = 30.0) -> SignalRecord:
    """Zero-phase second-order IIR notch at ``f0_hz`` with quality factor ``q``."""
    nyquist = s.sampling_rate_hz / 2.0
    if not 0 < f0_hz < nyquist:
        raise ValidationError(f"notch frequency {f0_hz} Hz must lie in (0, {nyquist}) Hz")
    if not q > 0:
        raise ValidationError(f"quality factor must be positive, got {q}")
    b, a = sps.iirnotch(f0_hz, q, fs=s.sampling_rate_hz)
    # pad by ~6 time constants of the pole pair so start-up transients stay outside
    radius = np.sqrt(a[2])
    padlen = min(int(np.ceil(6.0 / (1.0 - radius))), s.samples.size - 1)
    out = sps.filtfilt(b, a, s.samples, padlen=padlen)
    return replace(s, samples=np.ascontiguousarray(out))


def segment(s: SignalRecord, segment_seconds: float = 10.0) -> list[Segment]:
    """Cut non-overlapping windows of ``round(segment_seconds * rate)`` samples.

    The trailing partial window is dropped; a record shorter than one window
    yields an empty list and a warning.
    """
    length = int(round(segment_seconds * s.sampling_rate_hz))
    if length < 3:
        raise ValidationError(f"segments of {length} samples are too short (need at least 3)")
    count = s.samples.size // length
    if count == 0:
        warnings.warn(
            f"record {s.source_id!r} ({s.samples.size} samples) is shorter than one "
            f"{length}-sample segment",
            stacklevel=2,
        )
    return [
        Segment(
            samples=s.samples[i * length:(i + 1) * length],
            label=s.label,
            source_id=s.source_id,
            start_index=i * length,
        )
        for i in range(count)
    ]
