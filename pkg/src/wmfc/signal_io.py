"""Reading and writing of EEG recordings, montages, and epoch markers.

Supports EDF (16-bit integer data records) and plain CSV matrices for the
recordings themselves, a small CSV dialect for electrode montages and epoch
markers, and stage-tagged epoch extraction.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import NamedTuple

import numpy as np

EDF_HEADER_BYTES = 256
EDF_SIGNAL_HEADER_BYTES = 256
DEFAULT_HEAD_RADIUS = 0.10


class EdfError(ValueError):
    """Malformed or unsupported EDF content."""


class MontageError(ValueError):
    """Malformed montage description."""


class MarkerError(ValueError):
    """Malformed marker table or marker outside the recording."""


class StageTag(enum.Enum):
    ENCODING = "encoding"
    RETRO_CUE = "retro_cue"
    RECALL = "recall"
    RETRIEVAL = "retrieval"

    @classmethod
    def parse(cls, text: str) -> "StageTag":
        key = text.strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {"retrocue": "retro_cue"}
        key = aliases.get(key, key)
        for member in cls:
            if member.value == key:
                return member
        raise MarkerError(f"unknown stage name: {text!r}")


class GroupLabel(enum.Enum):
    # Order matters: it is the tie-breaking order for classifier votes.
    AD = "AD"
    MCI = "MCI"
    HC = "HC"

    @classmethod
    def parse(cls, text: str) -> "GroupLabel":
        key = text.strip().upper()
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(f"unknown group label: {text!r}")


class ElectrodePosition(NamedTuple):
    elevation: float  # radians from the vertex axis (colatitude)
    azimuth: float  # radians counterclockwise from the nasion axis
    radius: float  # meters


@dataclass
class Montage:
    entries: dict[str, ElectrodePosition]
    head_radius: float = DEFAULT_HEAD_RADIUS

    def __post_init__(self):
        if not self.entries:
            raise MontageError("montage must contain at least one electrode")
        if self.head_radius <= 0:
            raise MontageError("head radius must be positive")
        for name, pos in self.entries.items():
            if not 0.0 <= pos.elevation <= math.pi:
                raise MontageError(f"electrode {name}: elevation outside [0, pi]")
            if not 0.0 <= pos.azimuth < 2 * math.pi:
                raise MontageError(f"electrode {name}: azimuth outside [0, 2*pi)")
            if pos.radius <= 0:
                raise MontageError(f"electrode {name}: radius must be positive")

    @property
    def labels(self) -> list[str]:
        return list(self.entries)

    def angles(self) -> tuple[np.ndarray, np.ndarray]:
        """Colatitude and azimuth arrays in montage order."""
        theta = np.array([p.elevation for p in self.entries.values()])
        phi = np.array([p.azimuth for p in self.entries.values()])
        return theta, phi


@dataclass
class Recording:
    sample_rate: float
    data: np.ndarray  # channels x samples, microvolts
    labels: list[str]

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.sample_rate <= 0:
            raise ValueError("sample rate must be positive")
        if self.data.ndim != 2:
            raise ValueError("data must be a channels x samples matrix")
        if self.data.shape[0] != len(self.labels):
            raise ValueError(
                f"row count {self.data.shape[0]} does not match "
                f"label count {len(self.labels)}"
            )
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("channel labels must be unique")
        if self.data.size and not np.all(np.isfinite(self.data)):
            raise ValueError("recording contains non-finite samples")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


class Marker(NamedTuple):
    onset_sample: int
    stage: StageTag
    epoch_len: int


@dataclass
class Epoch:
    stage: StageTag
    group: GroupLabel
    data: np.ndarray  # channels x W
    sample_rate: float

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2 or self.data.shape[1] <= 0:
            raise ValueError("epoch data must be a channels x W matrix with W > 0")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("epoch contains non-finite samples")


# ---------------------------------------------------------------------------
# EDF


def _ascii_field(raw: bytes, name: str) -> str:
    try:
        return raw.decode("ascii").strip()
    except UnicodeDecodeError as exc:
        raise EdfError(f"field {name!r} is not ASCII") from exc


def _numeric_field(raw: bytes, name: str, kind=float):
    text = _ascii_field(raw, name)
    try:
        return kind(text)
    except ValueError as exc:
        raise EdfError(f"field {name!r} is not numeric: {text!r}") from exc


def parse_edf(data: bytes) -> Recording:
    """Parse an EDF byte stream into a Recording in physical units."""
    if len(data) < EDF_HEADER_BYTES:
        raise EdfError(f"truncated EDF header at offset {len(data)}")
    head = data[:EDF_HEADER_BYTES]
    n_records = _numeric_field(head[236:244], "number of data records", int)
    record_duration = _numeric_field(head[244:252], "data record duration")
    n_signals = _numeric_field(head[252:256], "number of signals", int)
    if n_signals < 1:
        raise EdfError("EDF declares no signals")
    if record_duration <= 0:
        raise EdfError("data record duration must be positive")

    sig_head_len = n_signals * EDF_SIGNAL_HEADER_BYTES
    data_offset = EDF_HEADER_BYTES + sig_head_len
    if len(data) < data_offset:
        raise EdfError(f"truncated signal headers at offset {len(data)}")

    labels, phys_min, phys_max, dig_min, dig_max, spr = [], [], [], [], [], []
    for i in range(n_signals):
        labels.append(_ascii_field(data[EDF_HEADER_BYTES + 16 * i : EDF_HEADER_BYTES + 16 * (i + 1)], "label"))
        # Field layout: labels(16) transducer(80) dimension(8) phys_min(8)
        # phys_max(8) dig_min(8) dig_max(8) prefilter(80) samples(8) reserved(32),
        # each stored contiguously for all signals.
        off = EDF_HEADER_BYTES + n_signals * 16
        off += n_signals * 80  # transducer
        off += n_signals * 8  # dimension
        phys_min.append(_numeric_field(data[off + 8 * i : off + 8 * (i + 1)], "physical minimum"))
        off += n_signals * 8
        phys_max.append(_numeric_field(data[off + 8 * i : off + 8 * (i + 1)], "physical maximum"))
        off += n_signals * 8
        dig_min.append(_numeric_field(data[off + 8 * i : off + 8 * (i + 1)], "digital minimum", int))
        off += n_signals * 8
        dig_max.append(_numeric_field(data[off + 8 * i : off + 8 * (i + 1)], "digital maximum", int))
        off += n_signals * 8
        off += n_signals * 80  # prefiltering
        spr.append(_numeric_field(data[off + 8 * i : off + 8 * (i + 1)], "samples per record", int))

    keep = [i for i in range(n_signals) if not labels[i].startswith("EDF Annotations")]
    if not keep:
        raise EdfError("EDF contains only annotation signals")
    rates = {spr[i] for i in keep}
    if len(rates) != 1:
        raise EdfError("signals with differing samples per record are not supported")
    for i in keep:
        if dig_min[i] == dig_max[i]:
            raise EdfError(f"signal {labels[i]!r}: digital minimum equals digital maximum")

    record_words = sum(spr)
    record_bytes = 2 * record_words
    expected = data_offset + n_records * record_bytes
    if len(data) < expected:
        raise EdfError(f"truncated data records at offset {len(data)}")

    raw = np.frombuffer(data, dtype="<i2", offset=data_offset, count=n_records * record_words)
    raw = raw.reshape(n_records, record_words)

    out = np.empty((len(keep), n_records * spr[keep[0]]))
    bounds = np.cumsum([0] + spr)
    for row, i in enumerate(keep):
        digital = raw[:, bounds[i] : bounds[i + 1]].reshape(-1).astype(float)
        scale = (phys_max[i] - phys_min[i]) / (dig_max[i] - dig_min[i])
        out[row] = (digital - dig_min[i]) * scale + phys_min[i]

    sample_rate = spr[keep[0]] / record_duration
    return Recording(sample_rate=sample_rate, data=out, labels=[labels[i] for i in keep])


def _fit8(value: float, roundup: bool) -> str:
    """Render a float into <= 8 ASCII chars, rounding outward."""
    for prec in range(7, 0, -1):
        text = f"{value:.{prec}g}"
        if len(text) > 8:
            continue
        parsed = float(text)
        if (roundup and parsed < value) or (not roundup and parsed > value):
            step = 10.0 ** (math.floor(math.log10(abs(parsed))) - prec + 1) if parsed else 1.0
            adjusted = parsed + step if roundup else parsed - step
            text = f"{adjusted:.{prec}g}"
            if len(text) > 8:
                continue  # nudge overflowed the field; drop a digit and retry
            parsed = float(text)
            if (roundup and parsed < value) or (not roundup and parsed > value):
                continue
        return text
    raise EdfError(f"value {value!r} not representable in an 8-char EDF field")


def write_edf(rec: Recording) -> bytes:
    """Serialize a Recording as a standard-conformant EDF byte stream."""
    if rec.n_channels < 1:
        raise EdfError("cannot write an EDF with zero channels")
    fs = rec.sample_rate
    # One-second records when the rate is integral, else a single record.
    if abs(fs - round(fs)) < 1e-9 and rec.n_samples % int(round(fs)) == 0 and rec.n_samples:
        spr = int(round(fs))
        record_duration = 1.0
    else:
        spr = rec.n_samples if rec.n_samples else 1
        record_duration = spr / fs
    n_records = max(1, rec.n_samples // spr) if rec.n_samples else 0
    if rec.n_samples and rec.n_samples % spr:
        raise EdfError("sample count is not divisible into whole data records")

    dig_min, dig_max = -32768, 32767
    pmins, pmaxs, pmin_s, pmax_s = [], [], [], []
    for ch in range(rec.n_channels):
        x = rec.data[ch]
        lo = float(x.min()) if x.size else 0.0
        hi = float(x.max()) if x.size else 0.0
        if lo == hi:
            lo, hi = lo - 1.0, hi + 1.0
        lo_s, hi_s = _fit8(lo, roundup=False), _fit8(hi, roundup=True)
        lo_eff, hi_eff = float(lo_s), float(hi_s)
        if hi_eff <= lo_eff:
            raise EdfError(f"channel {rec.labels[ch]!r}: physical range collapses after autoscaling")
        if x.size and (x.min() < lo_eff or x.max() > hi_eff):
            raise EdfError(f"channel {rec.labels[ch]!r}: sample exceeds representable physical range")
        pmins.append(lo_eff)
        pmaxs.append(hi_eff)
        pmin_s.append(lo_s)
        pmax_s.append(hi_s)

    def pad(text: str, width: int) -> bytes:
        raw = text.encode("ascii")
        if len(raw) > width:
            raise EdfError(f"field value {text!r} exceeds {width} bytes")
        return raw.ljust(width)

    n = rec.n_channels
    head = b"".join(
        [
            pad("0", 8),
            pad("X X X X", 80),
            pad("Startdate X", 80),
            pad("01.01.00", 8),
            pad("00.00.00", 8),
            pad(str(EDF_HEADER_BYTES + n * EDF_SIGNAL_HEADER_BYTES), 8),
            pad("", 44),
            pad(str(n_records), 8),
            pad(f"{record_duration:g}", 8),
            pad(str(n), 4),
        ]
    )
    sig = b"".join(
        [
            b"".join(pad(lbl, 16) for lbl in rec.labels),
            b"".join(pad("", 80) for _ in range(n)),
            b"".join(pad("uV", 8) for _ in range(n)),
            b"".join(pad(s, 8) for s in pmin_s),
            b"".join(pad(s, 8) for s in pmax_s),
            b"".join(pad(str(dig_min), 8) for _ in range(n)),
            b"".join(pad(str(dig_max), 8) for _ in range(n)),
            b"".join(pad("", 80) for _ in range(n)),
            b"".join(pad(str(spr), 8) for _ in range(n)),
            b"".join(pad("", 32) for _ in range(n)),
        ]
    )

    body = np.empty((n_records, n, spr), dtype="<i2")
    for ch in range(n):
        scale = (dig_max - dig_min) / (pmaxs[ch] - pmins[ch])
        digital = np.rint((rec.data[ch] - pmins[ch]) * scale + dig_min)
        body[:, ch, :] = np.clip(digital, dig_min, dig_max).astype("<i2").reshape(n_records, spr)
    return head + sig + body.tobytes()


# ---------------------------------------------------------------------------
# CSV matrices


def parse_csv_matrix(text: str, sample_rate: float) -> Recording:
    """Parse a label-headed CSV of sample rows into a Recording."""
    reader = csv.reader(io.StringIO(text))
    try:
        labels = next(reader)
    except StopIteration:
        raise ValueError("CSV matrix is empty") from None
    labels = [lbl.strip() for lbl in labels]
    if len(set(labels)) != len(labels):
        raise ValueError("duplicate channel label in CSV header")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(labels):
            raise ValueError(f"row {lineno}: expected {len(labels)} cells, got {len(row)}")
        try:
            rows.append([float(cell) for cell in row])
        except ValueError:
            bad = next(i for i, cell in enumerate(row) if not _is_float(cell))
            raise ValueError(f"row {lineno}, column {bad + 1}: non-numeric cell {row[bad]!r}") from None
    data = np.array(rows, dtype=float).T if rows else np.empty((len(labels), 0))
    return Recording(sample_rate=sample_rate, data=data, labels=labels)


def _is_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def render_csv(rec: Recording) -> str:
    """Inverse of parse_csv_matrix; values printed with 17 significant digits."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(rec.labels)
    for t in range(rec.n_samples):
        writer.writerow([f"{v:.17g}" for v in rec.data[:, t]])
    return out.getvalue()


# ---------------------------------------------------------------------------
# Montages


def load_montage(text: str, head_radius: float = DEFAULT_HEAD_RADIUS) -> Montage:
    """Parse `label,elevation_deg,azimuth_deg` lines into a Montage."""
    entries: dict[str, ElectrodePosition] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise MontageError(f"line {lineno}: expected label,elevation_deg,azimuth_deg")
        name = parts[0]
        if name in entries:
            raise MontageError(f"line {lineno}: duplicate electrode label {name!r}")
        try:
            elev_deg, azim_deg = float(parts[1]), float(parts[2])
        except ValueError:
            raise MontageError(f"line {lineno}: non-numeric angle") from None
        if not 0.0 <= elev_deg <= 180.0:
            raise MontageError(f"line {lineno}: elevation {elev_deg} outside [0, 180]")
        entries[name] = ElectrodePosition(
            elevation=math.radians(elev_deg),
            azimuth=math.radians(azim_deg % 360.0),
            radius=head_radius,
        )
    return Montage(entries=entries, head_radius=head_radius)


def default_montage() -> Montage:
    """The bundled 63-channel 10-10 montage."""
    text = resources.files("wmfc").joinpath("assets/montage_1010_63.csv").read_text()
    return load_montage(text)


# ---------------------------------------------------------------------------
# Markers and epochs


def parse_markers(text: str) -> list[Marker]:
    """Parse a `onset_sample,stage,epoch_len` CSV into a sorted MarkerList."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip().lower() for h in next(reader)]
    except StopIteration:
        raise MarkerError("marker file is empty") from None
    if header != ["onset_sample", "stage", "epoch_len"]:
        raise MarkerError(f"unexpected marker header: {header}")
    markers = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise MarkerError(f"row {lineno}: expected 3 cells")
        try:
            onset, length = int(row[0]), int(row[2])
        except ValueError:
            raise MarkerError(f"row {lineno}: non-integer onset or length") from None
        if onset < 0 or length <= 0:
            raise MarkerError(f"row {lineno}: onset must be >= 0 and epoch_len > 0")
        markers.append(Marker(onset, StageTag.parse(row[1]), length))
    markers.sort(key=lambda m: m.onset_sample)
    return markers


def render_markers(markers: list[Marker]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["onset_sample", "stage", "epoch_len"])
    for m in markers:
        writer.writerow([m.onset_sample, m.stage.value, m.epoch_len])
    return out.getvalue()


def extract_epochs(
    rec: Recording,
    markers: list[Marker],
    group: GroupLabel,
    fixed_len: int | None = None,
) -> list[Epoch]:
    """Cut stage-tagged epochs out of a recording.

    With ``fixed_len`` set (the pipeline uses 1000 samples), markers longer
    than the fixed length are truncated to its first ``fixed_len`` samples.
    """
    epochs = []
    for row, marker in enumerate(markers):
        length = marker.epoch_len
        if fixed_len is not None and length > fixed_len:
            length = fixed_len
        stop = marker.onset_sample + length
        if stop > rec.n_samples:
            raise MarkerError(
                f"marker row {row}: window [{marker.onset_sample}, {stop}) "
                f"exceeds recording length {rec.n_samples}"
            )
        epochs.append(
            Epoch(
                stage=marker.stage,
                group=group,
                data=rec.data[:, marker.onset_sample : stop].copy(),
                sample_rate=rec.sample_rate,
            )
        )
    return epochs
