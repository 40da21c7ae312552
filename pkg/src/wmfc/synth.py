"""Seeded synthetic multichannel recordings with controllable phase coupling.

Channels mix a small set of shared sinusoidal sources through fixed per-channel
lags, so the coupling strength is observable with phase-lag measures (zero-lag
mixing would be invisible to PLI). The remainder is independent 1/f-shaped
Gaussian noise.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .signal_io import (
    GroupLabel,
    Marker,
    Recording,
    StageTag,
    render_markers,
    write_edf,
)

DEFAULT_TRIALS = {
    StageTag.ENCODING: 100,
    StageTag.RETRO_CUE: 50,
    StageTag.RECALL: 50,
    StageTag.RETRIEVAL: 200,
}

# Acceptance-scale group profiles; tuning knobs, not physiological claims.
DEFAULT_PROFILES_KAPPA = {GroupLabel.HC: 0.2, GroupLabel.MCI: 0.5, GroupLabel.AD: 0.8}


@dataclass
class GroupProfile:
    kappa: float  # coupling strength in [0, 1]
    source_freqs: tuple[float, ...] = (6.0, 10.0, 20.0)
    noise_sigma: float = 1.0
    lag_spread: float = math.pi / 2  # radians

    def __post_init__(self):
        if not 0.0 <= self.kappa <= 1.0:
            raise ValueError("kappa must lie in [0, 1]")


@dataclass
class SynthConfig:
    channels: int = 63
    fs: float = 1000.0
    trials: dict[StageTag, int] = field(default_factory=lambda: dict(DEFAULT_TRIALS))
    subjects_per_group: int = 8
    epoch_len: int = 1000
    gap: int = 100  # inter-trial gap, samples
    amplitude: float = 20.0  # microvolts
    seed: int = 0
    structure_seed: int = 101  # coupling structure shared by all subjects

    def __post_init__(self):
        if self.channels < 2 or self.fs <= 0 or self.subjects_per_group < 1:
            raise ValueError("invalid synthesis configuration")
        if self.epoch_len < 1 or self.gap < 0:
            raise ValueError("invalid trial layout")
        if any(n < 1 for n in self.trials.values()):
            raise ValueError("trial counts must be positive")


def _pink_noise(rng: np.random.Generator, n_channels: int, n_samples: int, fs: float) -> np.ndarray:
    """Gaussian noise with ~1/f power shaping above 1 Hz (amplitude ~ f^-0.5)."""
    white = rng.standard_normal((n_channels, n_samples))
    spectrum = np.fft.rfft(white, axis=1)
    freqs = np.fft.rfftfreq(n_samples, d=1.0 / fs)
    shape = np.ones_like(freqs)
    nonzero = freqs > 0
    shape[nonzero] = np.maximum(freqs[nonzero], 1.0) ** -0.5
    shape[0] = 0.0  # no DC
    noise = np.fft.irfft(spectrum * shape, n=n_samples, axis=1)
    std = noise.std(axis=1, keepdims=True)
    std[std == 0] = 1.0
    return noise / std


def _layout_markers(cfg: SynthConfig) -> tuple[list[Marker], int]:
    markers = []
    cursor = cfg.gap
    for stage in StageTag:
        for _ in range(cfg.trials.get(stage, 0)):
            markers.append(Marker(cursor, stage, cfg.epoch_len))
            cursor += cfg.epoch_len + cfg.gap
    return markers, cursor


def generate_subject(
    profile: GroupProfile, cfg: SynthConfig, subject_seed: int
) -> tuple[Recording, list[Marker]]:
    """One subject: coupled-oscillator recording plus its stage markers.

    Channel i is kappa * sum_k a_ik s_k(t - delta_ik) + (1 - kappa) * eta_i(t),
    with shared slowly drifting sinusoid sources s_k, fixed per-channel lags
    delta_ik inside lag_spread / omega_k, and independent 1/f noise eta_i.

    The coupling structure (mixing weights a_ik and lags delta_ik) is a fixed
    property of the montage geometry, drawn once from cfg.structure_seed and
    shared by every subject; only the noise, source drift, and coupling
    strength kappa vary across subjects and groups. This keeps subjects within
    an equal-kappa cohort statistically exchangeable, so a classifier cannot
    key on per-subject connectivity fingerprints.
    """
    rng = np.random.default_rng(subject_seed)
    markers, n_samples = _layout_markers(cfg)
    t = np.arange(n_samples) / cfg.fs

    structure_rng = np.random.default_rng(cfg.structure_seed)
    mixing = structure_rng.uniform(0.5, 1.5, size=(cfg.channels, len(profile.source_freqs)))
    mixing /= mixing.sum(axis=1, keepdims=True)
    lag_phase = np.empty((cfg.channels, len(profile.source_freqs)))
    for k in range(len(profile.source_freqs)):
        lag_phase[:, k] = structure_rng.uniform(0.0, profile.lag_spread, size=cfg.channels)

    signal = np.zeros((cfg.channels, n_samples))
    for k, freq in enumerate(profile.source_freqs):
        if freq >= cfg.fs / 2:
            raise ValueError(f"source frequency {freq} Hz is not below Nyquist")
        drift = np.cumsum(rng.normal(0.0, 2e-3, size=n_samples))
        base_phase = 2 * math.pi * freq * t + drift
        signal += mixing[:, k, None] * np.sin(base_phase[None, :] - lag_phase[:, k, None])
    # match the unit variance of the noise term so kappa mixes like against like
    std = signal.std(axis=1, keepdims=True)
    std[std == 0] = 1.0
    signal /= std

    noise = profile.noise_sigma * _pink_noise(rng, cfg.channels, n_samples, cfg.fs)
    data = cfg.amplitude * (profile.kappa * signal + (1.0 - profile.kappa) * noise)
    labels = [f"CH{i:02d}" for i in range(cfg.channels)]
    return Recording(sample_rate=cfg.fs, data=data, labels=labels), markers


def subject_seed_for(master_seed: int, subject_index: int) -> int:
    return master_seed ^ (subject_index + 1)


def cohort_members(
    profiles: dict[GroupLabel, GroupProfile], cfg: SynthConfig
) -> list[tuple[str, GroupLabel, int]]:
    """(subject_id, group, seed) triples for the cohort, in manifest order."""
    missing = [g for g in GroupLabel if g not in profiles]
    if missing:
        raise ValueError(f"profiles missing for groups: {[g.value for g in missing]}")
    members = []
    index = 0
    for group in GroupLabel:
        for k in range(cfg.subjects_per_group):
            members.append((f"{group.value}{k:02d}", group, subject_seed_for(cfg.seed, index)))
            index += 1
    return members


def generate_cohort(
    profiles: dict[GroupLabel, GroupProfile], cfg: SynthConfig, out_dir: str | Path
) -> Path:
    """Write one EDF + marker CSV per subject plus a manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.csv"
    if manifest_path.exists():
        raise FileExistsError(f"manifest already exists: {manifest_path}")
    rows = []
    for subject_id, group, seed in cohort_members(profiles, cfg):
        rec, markers = generate_subject(profiles[group], cfg, seed)
        edf_name = f"{subject_id}.edf"
        marker_name = f"{subject_id}_markers.csv"
        (out / edf_name).write_bytes(write_edf(rec))
        (out / marker_name).write_text(render_markers(markers))
        rows.append([subject_id, group.value, edf_name, marker_name])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["subject_id", "group", "file", "markers"])
    writer.writerows(rows)
    manifest_path.write_text(buf.getvalue())
    return manifest_path


def parse_manifest(path: str | Path) -> list[tuple[str, GroupLabel, Path, Path]]:
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["subject_id", "group", "file", "markers"]:
            raise ValueError(f"unexpected manifest header: {header}")
        for row in reader:
            if not row:
                continue
            rows.append(
                (row[0], GroupLabel.parse(row[1]), path.parent / row[2], path.parent / row[3])
            )
    return rows
