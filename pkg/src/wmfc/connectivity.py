"""Pairwise synchronization measures: phase lag index and cross-plot transition entropy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .preprocess import Window
from .signal_io import GroupLabel, StageTag

PLI = "pli"
CPTE = "cpte"


@dataclass
class FixedCountGrid:
    """Polar grid with a fixed number of radial bands and angular sectors.

    Scale-free: the outermost band edge tracks the largest radius in the data.
    """

    n_radial: int = 5
    n_angular: int = 5

    def __post_init__(self):
        if self.n_radial < 1 or self.n_angular < 1:
            raise ValueError("grid needs at least one band and one sector")


@dataclass
class FixedRulerGrid:
    """Polar grid with fixed radial/angular rulers in raw data units."""

    dr: float = 2.0
    dtheta_deg: float = 10.0

    def __post_init__(self):
        if self.dr <= 0 or self.dtheta_deg <= 0:
            raise ValueError("rulers must be positive")


CrossPlotGrid = FixedCountGrid | FixedRulerGrid


@dataclass
class StateSequence:
    bands: np.ndarray  # 0-based radial band per sample
    sectors: np.ndarray  # 0-based angular sector per sample
    n_angular: int

    def codes(self) -> np.ndarray:
        return self.bands.astype(np.int64) * self.n_angular + self.sectors.astype(np.int64)


@dataclass
class ConnectivityMatrix:
    values: np.ndarray  # p x p, symmetric, zero diagonal
    method: str
    stage: StageTag | None = None
    group: GroupLabel | None = None
    offset: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise ValueError("connectivity matrix must be square")


def analytic_phase(series: np.ndarray) -> np.ndarray:
    """Instantaneous phase of the analytic signal, in (-pi, pi].

    The analytic signal is built in the Fourier domain: positive-frequency
    bins doubled, bins 0 and N/2 kept, negative bins zeroed.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or len(x) < 4:
        raise ValueError("series must be 1-D with at least 4 samples")
    if not np.any(x):
        raise ValueError("phase is undefined for an all-zero series")
    return analytic_phase_rows(x[None, :])[0]


def analytic_phase_rows(rows: np.ndarray) -> np.ndarray:
    """Row-wise analytic_phase without the all-zero check (vector form)."""
    rows = np.asarray(rows, dtype=float)
    n = rows.shape[-1]
    spectrum = np.fft.fft(rows, axis=-1)
    gate = np.zeros(n)
    gate[0] = 1.0
    if n % 2 == 0:
        gate[n // 2] = 1.0
        gate[1 : n // 2] = 2.0
    else:
        gate[1 : (n + 1) // 2] = 2.0
    analytic = np.fft.ifft(spectrum * gate, axis=-1)
    return np.arctan2(analytic.imag, analytic.real)


def pli(px: np.ndarray, py: np.ndarray) -> float:
    """Phase lag index: |mean sign(sin(px - py))|, in [0, 1]."""
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    if px.shape != py.shape or px.ndim != 1 or len(px) < 2:
        raise ValueError("phase series must be 1-D, equal length, length >= 2")
    return float(np.abs(np.mean(np.sign(np.sin(px - py)))))


def pli_matrix_from_phases(phases: np.ndarray) -> np.ndarray:
    """All-pair PLI from a channels x T phase matrix.

    Element-for-element identical to calling pli() per pair: the same
    subtraction, sin, sign, and mean are applied along the time axis.
    """
    p = phases.shape[0]
    iu, ju = np.triu_indices(p, k=1)
    signs = np.sign(np.sin(phases[iu] - phases[ju]))
    vals = np.abs(np.mean(signs, axis=1))
    out = np.zeros((p, p))
    out[iu, ju] = vals
    out[ju, iu] = vals
    return out


def crossplot_states(u: np.ndarray, v: np.ndarray, grid: CrossPlotGrid) -> StateSequence:
    """Map a pair of series to polar-grid cell states of their cross plot."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.ndim != 1 or len(u) < 2:
        raise ValueError("series must be 1-D, equal length, length >= 2")
    r = np.hypot(u, v)
    theta_deg = np.degrees(np.arctan2(v, u)) % 360.0
    if isinstance(grid, FixedCountGrid):
        r_max = r.max()
        if r_max == 0.0:
            bands = np.zeros(len(u), dtype=np.int64)
        else:
            bands = np.minimum(np.floor(r * grid.n_radial / r_max), grid.n_radial - 1).astype(np.int64)
        sectors = np.minimum(
            np.floor(theta_deg * grid.n_angular / 360.0), grid.n_angular - 1
        ).astype(np.int64)
        return StateSequence(bands=bands, sectors=sectors, n_angular=grid.n_angular)
    bands = np.floor(r / grid.dr).astype(np.int64)
    sectors = np.floor(theta_deg / grid.dtheta_deg).astype(np.int64)
    n_angular = int(np.ceil(360.0 / grid.dtheta_deg))
    sectors = np.minimum(sectors, n_angular - 1)
    return StateSequence(bands=bands, sectors=sectors, n_angular=n_angular)


def cpte(states: StateSequence) -> float:
    """Shannon entropy (bits) of the state-transition distribution.

    Transitions are consecutive state pairs, self-transitions included;
    0 log 0 is taken as 0.
    """
    codes = states.codes()
    if len(codes) < 2:
        raise ValueError("need at least 2 states for a transition")
    pairs = codes[:-1] * (codes.max() + 1) + codes[1:]
    _, counts = np.unique(pairs, return_counts=True)
    probs = counts / counts.sum()
    return float(-np.sum(probs * np.log2(probs)))


def connectivity_matrix(
    window: Window | np.ndarray,
    method: str = PLI,
    grid: CrossPlotGrid | None = None,
) -> ConnectivityMatrix:
    """Symmetric zero-diagonal synchronization matrix over all row pairs."""
    if isinstance(window, Window):
        data = window.data
        meta = {"stage": window.stage, "group": window.group, "offset": window.offset}
    else:
        data = np.asarray(window, dtype=float)
        meta = {}
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValueError("window must have at least 2 rows")
    p = data.shape[0]
    if method == PLI:
        phases = analytic_phase_rows(data)
        values = pli_matrix_from_phases(phases)
    elif method == CPTE:
        grid = grid or FixedCountGrid()
        values = np.zeros((p, p))
        for i in range(p):
            for j in range(i + 1, p):
                h = cpte(crossplot_states(data[i], data[j], grid))
                values[i, j] = values[j, i] = h
    else:
        raise ValueError(f"unknown connectivity method {method!r}")
    return ConnectivityMatrix(values=values, method=method, **meta)
