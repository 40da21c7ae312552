"""Bandpass filtering, average re-referencing, and sliding-window segmentation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .signal_io import Epoch, GroupLabel, Recording, StageTag


class FilterDesignError(ValueError):
    pass


@dataclass
class BandpassSpec:
    low_cut: float = 0.5
    high_cut: float = 40.0
    order: int = 4  # pole pairs per band edge, MATLAB butter(N, [lo hi]) convention

    def __post_init__(self):
        if self.low_cut <= 0 or self.high_cut <= self.low_cut:
            raise FilterDesignError("need 0 < low_cut < high_cut")
        if self.order < 2 or self.order % 2:
            raise FilterDesignError("filter order must be even and >= 2")


@dataclass
class FilterSections:
    """Cascade of second-order sections (scipy layout, gain folded in)."""

    sos: np.ndarray  # (n_sections, 6)

    def __post_init__(self):
        self.sos = np.atleast_2d(np.asarray(self.sos, dtype=float))
        if self.sos.shape[1] != 6:
            raise FilterDesignError("each section needs 6 coefficients")
        for k, section in enumerate(self.sos):
            poles = np.roots(section[3:])
            if np.any(np.abs(poles) >= 1.0):
                raise FilterDesignError(f"section {k} is unstable")

    @property
    def n_poles(self) -> int:
        return 2 * self.sos.shape[0]

    def gain_at(self, freq_hz: float, fs: float) -> float:
        """Single-pass magnitude response at a frequency, from the coefficients."""
        z = np.exp(1j * 2 * np.pi * freq_hz / fs)
        h = 1.0 + 0.0j
        for b0, b1, b2, a0, a1, a2 in self.sos:
            h *= (b0 + b1 / z + b2 / z**2) / (a0 + a1 / z + a2 / z**2)
        return float(np.abs(h))


@dataclass
class WindowPlan:
    width: int = 500
    step: int = 250

    def __post_init__(self):
        if not 0 < self.step <= self.width:
            raise ValueError("need 0 < step <= width")


@dataclass
class Window:
    data: np.ndarray  # channels x width
    stage: StageTag
    group: GroupLabel
    offset: int


def design_bandpass(spec: BandpassSpec, fs: float) -> FilterSections:
    """Digital Butterworth bandpass as stable second-order sections.

    Realized from the analog prototype via the bilinear transform with
    frequency pre-warping (scipy.signal.butter).
    """
    if spec.high_cut >= fs / 2:
        raise FilterDesignError(f"high cut {spec.high_cut} Hz is not below Nyquist ({fs / 2} Hz)")
    sos = sps.butter(spec.order, [spec.low_cut, spec.high_cut], btype="bandpass", fs=fs, output="sos")
    sections = FilterSections(sos=sos)
    center = float(np.sqrt(spec.low_cut * spec.high_cut))
    gain = sections.gain_at(center, fs)
    if abs(gain - 1.0) > 0.01:
        raise FilterDesignError(f"center-frequency gain {gain:.4f} deviates from unity by more than 1%")
    return sections


def apply_zero_phase(sections: FilterSections, series: np.ndarray) -> np.ndarray:
    """Forward-backward filtering with reflection padding.

    Net phase response is zero and the magnitude response is the squared
    single-pass response. Output length equals input length.
    """
    x = np.asarray(series, dtype=float)
    pad = 3 * sections.n_poles
    if x.ndim != 1 or len(x) <= pad:
        raise ValueError(f"series must be 1-D and longer than {pad} samples")
    padded = np.concatenate([x[pad:0:-1], x, x[-2 : -pad - 2 : -1]])
    forward = sps.sosfilt(sections.sos, padded)
    backward = sps.sosfilt(sections.sos, forward[::-1])[::-1]
    return backward[pad : pad + len(x)]


def filter_recording(sections: FilterSections, rec: Recording) -> Recording:
    """Zero-phase filter every channel of a recording."""
    out = np.empty_like(rec.data)
    for ch in range(rec.n_channels):
        out[ch] = apply_zero_phase(sections, rec.data[ch])
    return Recording(sample_rate=rec.sample_rate, data=out, labels=list(rec.labels))


def average_reference(epoch: Epoch) -> Epoch:
    """Subtract the mean across channels at every sample index."""
    if epoch.data.shape[0] < 2:
        raise ValueError("average reference needs at least 2 channels")
    data = epoch.data - epoch.data.mean(axis=0, keepdims=True)
    return Epoch(stage=epoch.stage, group=epoch.group, data=data, sample_rate=epoch.sample_rate)


def slide_windows(epoch: Epoch, plan: WindowPlan) -> list[Window]:
    """Overlapping fixed-width windows at offsets 0, step, 2*step, ..."""
    length = epoch.data.shape[1]
    if length < plan.width:
        raise ValueError(f"epoch of {length} samples is shorter than window width {plan.width}")
    windows = []
    for offset in range(0, length - plan.width + 1, plan.step):
        windows.append(
            Window(
                data=epoch.data[:, offset : offset + plan.width],
                stage=epoch.stage,
                group=epoch.group,
                offset=offset,
            )
        )
    return windows
