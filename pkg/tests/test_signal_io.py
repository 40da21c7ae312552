import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wmfc import signal_io as sio


def make_recording(rng, n_channels, n_samples, fs=256.0, scale=100.0):
    data = rng.uniform(-scale, scale, (n_channels, n_samples))
    labels = [f"CH{i:02d}" for i in range(n_channels)]
    return sio.Recording(sample_rate=fs, data=data, labels=labels)


# ---------------------------------------------------------------------------
# EDF


class TestEdfRoundTrip:
    def test_minimal_two_signal_file(self):
        rec = sio.Recording(
            sample_rate=4.0,
            data=np.array([[0.0, 1.0, -1.0, 0.5], [2.0, 2.0, 2.0, 2.0]]),
            labels=["a", "b"],
        )
        blob = sio.write_edf(rec)
        back = sio.parse_edf(blob)
        assert back.labels == rec.labels
        assert back.sample_rate == rec.sample_rate
        quantum = (back.data.max() - back.data.min() + 1e-9) / 65535 + 1e-9
        assert np.max(np.abs(back.data - rec.data)) <= 3.0 / 65535 * 4

    def test_version_field_padded_zero(self):
        rng = np.random.default_rng(0)
        blob = sio.write_edf(make_recording(rng, 1, 8))
        assert blob[:8] == b"0" + b" " * 7
        assert sio.parse_edf(blob) is not None

    def test_truncated_file_rejected(self):
        rng = np.random.default_rng(1)
        blob = sio.write_edf(make_recording(rng, 2, 16))
        with pytest.raises(sio.EdfError):
            sio.parse_edf(blob[:200])

    def test_constant_zero_signal_encodes_midpoint(self):
        rec = sio.Recording(
            sample_rate=8.0,
            data=np.zeros((1, 8)),
            labels=["z"],
        )
        blob = sio.write_edf(rec)
        records = blob[sio.EDF_HEADER_BYTES + sio.EDF_SIGNAL_HEADER_BYTES :]
        samples = np.frombuffer(records, dtype="<i2")
        # symmetric calibration around 0 puts the zero signal at digital 0
        assert np.all(np.abs(samples.astype(int)) <= 1)

    def test_ramp_quantization_bound(self):
        rec = sio.Recording(
            sample_rate=16.0,
            data=np.vstack([np.linspace(-50, 50, 64), np.linspace(0, 10, 64)]),
            labels=["r1", "r2"],
        )
        back = sio.parse_edf(sio.write_edf(rec))
        for ch in range(2):
            span = rec.data[ch].max() - rec.data[ch].min()
            assert np.max(np.abs(back.data[ch] - rec.data[ch])) <= span / 65535 + 1e-12

    def test_zero_channels_rejected(self):
        with pytest.raises(ValueError):
            sio.write_edf(
                sio.Recording(sample_rate=4.0, data=np.empty((0, 4)), labels=[])
            )

    @given(
        st.integers(min_value=1, max_value=8),
        st.integers(min_value=1, max_value=64),
        st.integers(min_value=0, max_value=2**31),
    )
    @settings(max_examples=30, deadline=None)
    def test_round_trip_within_one_quantum(self, n_ch, n_samp, seed):
        rng = np.random.default_rng(seed)
        scale = float(rng.uniform(0.5, 500.0))
        rec = make_recording(rng, n_ch, n_samp, fs=float(n_samp), scale=scale)
        blob = sio.write_edf(rec)
        back = sio.parse_edf(blob)
        assert back.data.shape == rec.data.shape
        # the honest quantum is the one declared inside the file itself
        for ch in range(n_ch):
            pmin = float(blob[256 + n_ch * 104 + ch * 8 : 256 + n_ch * 104 + (ch + 1) * 8])
            pmax = float(blob[256 + n_ch * 112 + ch * 8 : 256 + n_ch * 112 + (ch + 1) * 8])
            quantum = (pmax - pmin) / 65535
            assert np.max(np.abs(back.data[ch] - rec.data[ch])) <= quantum * 1.000001


# ---------------------------------------------------------------------------
# CSV matrices


class TestCsvMatrix:
    def test_transpose_layout(self):
        rec = sio.parse_csv_matrix("A,B\n1,2\n3,4\n", sample_rate=10.0)
        np.testing.assert_array_equal(rec.data, [[1.0, 3.0], [2.0, 4.0]])

    def test_duplicate_label_rejected(self):
        with pytest.raises(ValueError):
            sio.parse_csv_matrix("A,A\n1,2\n", sample_rate=10.0)

    def test_empty_body(self):
        rec = sio.parse_csv_matrix("A,B\n", sample_rate=10.0)
        assert rec.n_samples == 0

    def test_scientific_notation_accepted(self):
        rec = sio.parse_csv_matrix("A\n1.5e-3\n", sample_rate=1.0)
        assert rec.data[0, 0] == 1.5e-3

    def test_non_numeric_cell_reported(self):
        with pytest.raises(ValueError, match="row 3"):
            sio.parse_csv_matrix("A,B\n1,2\n1,x\n", sample_rate=1.0)

    @given(
        st.integers(min_value=1, max_value=6),
        st.integers(min_value=0, max_value=40),
        st.integers(min_value=0, max_value=2**31),
    )
    @settings(max_examples=30, deadline=None)
    def test_round_trip_exact(self, n_ch, n_samp, seed):
        rng = np.random.default_rng(seed)
        data = rng.standard_normal((n_ch, n_samp)) * 10.0 ** int(rng.integers(-6, 7))
        rec = sio.Recording(
            sample_rate=100.0,
            data=data,
            labels=[f"c{i}" for i in range(n_ch)],
        )
        back = sio.parse_csv_matrix(sio.render_csv(rec), sample_rate=100.0)
        np.testing.assert_array_equal(back.data, rec.data)
        assert back.labels == rec.labels


# ---------------------------------------------------------------------------
# montages


class TestMontage:
    def test_vertex_entry(self):
        m = sio.load_montage("Cz,0,0\n")
        assert m.entries["Cz"].elevation == 0.0

    def test_elevation_range_checked(self):
        with pytest.raises(sio.MontageError):
            sio.load_montage("X,200,0\n")

    def test_comments_and_blanks_ignored(self):
        m = sio.load_montage("# comment\n\nFp1,72,18\n")
        assert set(m.entries) == {"Fp1"}
        assert m.entries["Fp1"].elevation == pytest.approx(math.radians(72.0))

    def test_duplicate_label_rejected(self):
        with pytest.raises(sio.MontageError):
            sio.load_montage("A,10,0\nA,20,0\n")

    def test_bundled_montage_has_63_channels(self):
        m = sio.default_montage()
        assert len(m.entries) == 63
        for pos in m.entries.values():
            assert 0.0 <= pos.elevation <= math.pi
            assert 0.0 <= pos.azimuth < 2 * math.pi


# ---------------------------------------------------------------------------
# markers and epochs


class TestMarkers:
    def test_round_trip(self):
        markers = [
            sio.Marker(0, sio.StageTag.ENCODING, 1000),
            sio.Marker(1500, sio.StageTag.RETRIEVAL, 1000),
        ]
        assert sio.parse_markers(sio.render_markers(markers)) == markers

    def test_case_insensitive_stage_names(self):
        text = "onset_sample,stage,epoch_len\n0,Retro-Cue,100\n"
        assert sio.parse_markers(text)[0].stage == sio.StageTag.RETRO_CUE

    def test_sorted_by_onset(self):
        text = "onset_sample,stage,epoch_len\n500,recall,100\n0,encoding,100\n"
        onsets = [m.onset_sample for m in sio.parse_markers(text)]
        assert onsets == [0, 500]

    def test_bad_header_rejected(self):
        with pytest.raises(sio.MarkerError):
            sio.parse_markers("onset,stage,len\n0,encoding,100\n")


class TestExtractEpochs:
    def _rec(self, n_samples=4000):
        rng = np.random.default_rng(2)
        return make_recording(rng, 3, n_samples, fs=1000.0)

    def test_index_arithmetic(self):
        rec = self._rec()
        markers = [sio.Marker(1000, sio.StageTag.ENCODING, 1000)]
        epochs = sio.extract_epochs(rec, markers, sio.GroupLabel.HC)
        assert len(epochs) == 1
        np.testing.assert_array_equal(epochs[0].data, rec.data[:, 1000:2000])
        assert epochs[0].stage == sio.StageTag.ENCODING
        assert epochs[0].group == sio.GroupLabel.HC

    def test_empty_marker_list(self):
        assert sio.extract_epochs(self._rec(), [], sio.GroupLabel.AD) == []

    def test_overrun_rejected(self):
        rec = self._rec(1200)
        markers = [sio.Marker(1000, sio.StageTag.RECALL, 999)]
        with pytest.raises(sio.MarkerError):
            sio.extract_epochs(rec, markers, sio.GroupLabel.HC)

    def test_long_marker_truncated_to_fixed_len(self):
        rec = self._rec(12000)
        markers = [sio.Marker(0, sio.StageTag.RECALL, 9500)]
        epochs = sio.extract_epochs(rec, markers, sio.GroupLabel.HC, fixed_len=1000)
        assert epochs[0].data.shape[1] == 1000

    def test_count_matches_markers(self):
        rec = self._rec(4000)
        markers = [
            sio.Marker(i * 1000, sio.StageTag.RETRIEVAL, 1000) for i in range(4)
        ]
        assert len(sio.extract_epochs(rec, markers, sio.GroupLabel.MCI)) == 4


# ---------------------------------------------------------------------------
# enums


def test_group_label_order_is_tiebreak_order():
    assert [g.value for g in sio.GroupLabel] == ["AD", "MCI", "HC"]


def test_stage_parse_aliases():
    assert sio.StageTag.parse("RetroCue") == sio.StageTag.RETRO_CUE
    assert sio.StageTag.parse("retrieval") == sio.StageTag.RETRIEVAL
    with pytest.raises(sio.MarkerError):
        sio.StageTag.parse("nap")
