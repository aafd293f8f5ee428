"""Synthetic two-class ECG-like records for self-contained experiments.

Each beat is a sum of Gaussian bumps (P, Q, R, S, T). The ``NORMAL`` class
beats regularly with a tall, narrow R wave; the ``CHF`` class has a lower,
wider QRS complex and a more irregular rhythm. Baseline wander, 60 Hz
interference and white noise are added on top.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .signals import ManifestEntry, SignalRecord, write_manifest, write_signal

__all__ = ["ClassProfile", "PROFILES", "synth_record", "synth_dataset", "write_dataset"]


@dataclass(frozen=True)
class ClassProfile:
    """Beat morphology and rhythm parameters for one class."""

    r_amplitude: float
    qrs_width_s: float
    rr_mean_s: float
    rr_jitter: float
    t_amplitude: float


# log of the largest per-record amplitude gain; electrode placement varies between subjects
GAIN_SPREAD = 0.7
NOISE_STD = 0.005

# (centre offset from R in s, relative width, amplitude scale)
_WAVES = {
    "P": (-0.20, 2.5, 0.12),
    "Q": (-0.03, 0.6, -0.12),
    "S": (0.03, 0.6, -0.20),
}

PROFILES = {
    "NORMAL": ClassProfile(r_amplitude=1.2, qrs_width_s=0.008, rr_mean_s=0.80, rr_jitter=0.02, t_amplitude=0.30),
    "CHF": ClassProfile(r_amplitude=0.7, qrs_width_s=0.030, rr_mean_s=0.75, rr_jitter=0.15, t_amplitude=0.18),
}


def _beat_times(duration: float, profile: ClassProfile, rng) -> np.ndarray:
    times = []
    t = rng.uniform(0.0, profile.rr_mean_s)
    while t < duration + 1.0:
        times.append(t)
        t += profile.rr_mean_s * max(0.3, 1.0 + profile.rr_jitter * rng.standard_normal())
    return np.array(times)


def synth_record(label: str, seconds: float, sampling_rate_hz: float = 250.0, seed=None,
                 source_id: str = "") -> SignalRecord:
    """One noisy record of ``seconds`` duration for class ``label``."""
    if label not in PROFILES:
        raise ValidationError(f"unknown synthetic class {label!r}; expected one of {sorted(PROFILES)}")
    if not seconds > 0:
        raise ValidationError("duration must be positive")
    profile = PROFILES[label]
    rng = np.random.default_rng(seed)
    n = int(round(seconds * sampling_rate_hz))
    t = np.arange(n) / sampling_rate_hz
    x = np.zeros(n)
    # per-record morphology drift so records are not clones
    gain = np.exp(rng.uniform(-1.0, 1.0) * GAIN_SPREAD)
    r_amp = profile.r_amplitude * gain
    width = profile.qrs_width_s * rng.uniform(0.9, 1.1)
    reach = int(0.5 * sampling_rate_hz)
    for beat in _beat_times(seconds, profile, rng):
        centre = int(round(beat * sampling_rate_hz))
        lo, hi = max(0, centre - reach), min(n, centre + reach)
        if lo >= hi:
            continue
        tt = t[lo:hi] - beat
        amp = r_amp * (1.0 + 0.05 * rng.standard_normal())
        wave = amp * np.exp(-0.5 * (tt / width) ** 2)
        for offset, rel_width, scale in _WAVES.values():
            wave += scale * r_amp * np.exp(-0.5 * ((tt - offset) / (rel_width * width * 4)) ** 2)
        wave += gain * profile.t_amplitude * np.exp(-0.5 * ((tt - 0.28) / 0.05) ** 2)
        x[lo:hi] += wave
    wander = 0.3 * np.sin(2 * np.pi * rng.uniform(0.15, 0.35) * t + rng.uniform(0, 2 * np.pi))
    mains = 0.05 * np.sin(2 * np.pi * 60.0 * t + rng.uniform(0, 2 * np.pi))
    noise = NOISE_STD * rng.standard_normal(n)
    return SignalRecord(x + wander + mains + noise, sampling_rate_hz, label, source_id)


def synth_dataset(records_per_class: int = 10, segments_per_record: int = 20,
                  segment_seconds: float = 10.0, sampling_rate_hz: float = 250.0, seed=7) -> list[SignalRecord]:
    """Records for every class, each long enough for ``segments_per_record`` segments."""
    seeds = np.random.SeedSequence(seed).spawn(records_per_class * len(PROFILES))
    records = []
    for c, label in enumerate(sorted(PROFILES)):
        for r in range(records_per_class):
            records.append(synth_record(
                label,
                segments_per_record * segment_seconds,
                sampling_rate_hz,
                seed=seeds[c * records_per_class + r],
                source_id=f"{label.lower()}{r:03d}",
            ))
    return records


def write_dataset(directory, records) -> Path:
    """Write one text file per record plus ``manifest.csv``; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for rec in records:
        path = directory / f"{rec.source_id}.txt"
        write_signal(path, rec.samples)
        entries.append(ManifestEntry(path, rec.label, rec.sampling_rate_hz))
    manifest = directory / "manifest.csv"
    write_manifest(manifest, entries)
    return manifest
