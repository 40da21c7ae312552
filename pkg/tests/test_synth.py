import numpy as np
import pytest

from wmfc import connectivity as conn
from wmfc import synth
from wmfc.signal_io import GroupLabel, StageTag, parse_edf, parse_markers


SMALL = dict(channels=6, fs=250.0, epoch_len=250, gap=25)


def small_cfg(trials=None, **kw):
    trials = trials or {StageTag.RETRIEVAL: 4}
    return synth.SynthConfig(trials=trials, subjects_per_group=2, **SMALL, **kw)


def mean_offdiag_pli(rec, n_samples=2000):
    phases = conn.analytic_phase_rows(rec.data[:, :n_samples])
    m = conn.pli_matrix_from_phases(phases)
    iu = np.triu_indices(m.shape[0], 1)
    return float(m[iu].mean())


class TestGenerateSubject:
    def test_marker_layout_and_counts(self):
        cfg = synth.SynthConfig(
            trials={StageTag.ENCODING: 3, StageTag.RETRIEVAL: 2},
            subjects_per_group=1,
            **SMALL,
        )
        rec, markers = synth.generate_subject(synth.GroupProfile(kappa=0.5), cfg, 1)
        assert len(markers) == 5
        stages = [m.stage for m in markers]
        assert stages == [StageTag.ENCODING] * 3 + [StageTag.RETRIEVAL] * 2
        # no overlap, all inside the recording
        for a, b in zip(markers, markers[1:]):
            assert a.onset_sample + a.epoch_len <= b.onset_sample
        last = markers[-1]
        assert last.onset_sample + last.epoch_len <= rec.n_samples

    def test_recording_invariants(self):
        rec, _ = synth.generate_subject(synth.GroupProfile(kappa=0.3), small_cfg(), 7)
        assert rec.n_channels == 6
        assert np.all(np.isfinite(rec.data))
        assert len(set(rec.labels)) == 6

    def test_same_seed_identical(self):
        cfg = small_cfg()
        p = synth.GroupProfile(kappa=0.4)
        a, _ = synth.generate_subject(p, cfg, 99)
        b, _ = synth.generate_subject(p, cfg, 99)
        np.testing.assert_array_equal(a.data, b.data)

    def test_distinct_seeds_differ(self):
        cfg = small_cfg()
        p = synth.GroupProfile(kappa=0.4)
        a, _ = synth.generate_subject(p, cfg, 1)
        b, _ = synth.generate_subject(p, cfg, 2)
        assert np.any(a.data[:, :100] != b.data[:, :100])

    def test_full_coupling_lagged_pair_pli_one(self):
        # kappa=1, no noise, a single shared source with distinct lags:
        # the pair keeps a constant nonzero phase difference
        profile = synth.GroupProfile(
            kappa=1.0, source_freqs=(10.0,), noise_sigma=0.0, lag_spread=np.pi / 2
        )
        cfg = synth.SynthConfig(
            channels=2,
            fs=1000.0,
            trials={StageTag.RETRIEVAL: 2},
            subjects_per_group=1,
            epoch_len=1000,
            gap=100,
        )
        rec, _ = synth.generate_subject(profile, cfg, 5)
        phases = conn.analytic_phase_rows(rec.data[:, 500:1500])
        assert conn.pli(phases[0], phases[1]) == pytest.approx(1.0, abs=1e-9)

    def test_zero_coupling_low_pli(self):
        # independent noise channels: the index stays near zero
        vals = []
        profile = synth.GroupProfile(kappa=0.0)
        cfg = small_cfg()
        for seed in range(200):
            rec, _ = synth.generate_subject(profile, cfg, seed)
            vals.append(mean_offdiag_pli(rec, 500))
        assert np.mean(vals) < 0.15

    def test_noise_spectral_slope(self):
        # 1/f power shaping: log-log slope of -1 +/- 0.3 over 1..40 Hz
        rng = np.random.default_rng(0)
        x = synth._pink_noise(rng, 4, 2**16, 1000.0)
        freqs = np.fft.rfftfreq(2**16, 1e-3)
        power = np.abs(np.fft.rfft(x, axis=1)) ** 2
        band = (freqs >= 1.0) & (freqs <= 40.0)
        slope = np.polyfit(np.log(freqs[band]), np.log(power[:, band].mean(axis=0)), 1)[0]
        assert -1.3 < slope < -0.7

    def test_kappa_monotone_in_pipeline_pli(self):
        # long windows push the finite-sample index floor below the weakest
        # coupling level, so the Monte-Carlo means order strictly
        kappas = [0.0, 0.25, 0.5, 0.75, 1.0]
        means = []
        cfg = small_cfg(trials={StageTag.RETRIEVAL: 5})
        for kappa in kappas:
            profile = synth.GroupProfile(kappa=kappa)
            vals = [
                mean_offdiag_pli(synth.generate_subject(profile, cfg, seed)[0], 4000)
                for seed in range(20)
            ]
            means.append(np.mean(vals))
        assert all(a < b for a, b in zip(means, means[1:]))


class TestCohort:
    def test_member_listing_balanced(self):
        profiles = {g: synth.GroupProfile(kappa=0.5) for g in GroupLabel}
        members = synth.cohort_members(profiles, small_cfg())
        assert len(members) == 6
        per_group = {g: sum(1 for _, grp, _ in members if grp == g) for g in GroupLabel}
        assert set(per_group.values()) == {2}
        seeds = [s for _, _, s in members]
        assert len(set(seeds)) == len(seeds)

    def test_missing_profile_rejected(self):
        with pytest.raises(ValueError):
            synth.cohort_members({GroupLabel.HC: synth.GroupProfile(kappa=0.2)}, small_cfg())

    def test_generate_cohort_round_trip(self, tmp_path):
        profiles = {
            g: synth.GroupProfile(kappa=k)
            for g, k in synth.DEFAULT_PROFILES_KAPPA.items()
        }
        cfg = small_cfg()
        manifest = synth.generate_cohort(profiles, cfg, tmp_path)
        entries = synth.parse_manifest(manifest)
        assert len(entries) == 6
        sid, group, edf_path, marker_path = entries[0]
        rec = parse_edf(edf_path.read_bytes())
        markers = parse_markers(marker_path.read_text())
        assert rec.n_channels == cfg.channels
        assert len(markers) == sum(cfg.trials.values())
        # EDF quantization keeps the signal close to the regenerated original
        regen, _ = synth.generate_subject(profiles[group], cfg, synth.subject_seed_for(cfg.seed, 0))
        span = regen.data.max() - regen.data.min()
        assert np.max(np.abs(rec.data - regen.data)) <= span / 65535 * 2

    def test_existing_manifest_not_clobbered(self, tmp_path):
        profiles = {g: synth.GroupProfile(kappa=0.5) for g in GroupLabel}
        (tmp_path / "manifest.csv").write_text("sentinel")
        with pytest.raises(FileExistsError):
            synth.generate_cohort(profiles, small_cfg(), tmp_path)
        assert (tmp_path / "manifest.csv").read_text() == "sentinel"


class TestConfigValidation:
    def test_bad_kappa(self):
        with pytest.raises(ValueError):
            synth.GroupProfile(kappa=1.5)

    def test_bad_channels(self):
        with pytest.raises(ValueError):
            synth.SynthConfig(channels=1)

    def test_bad_trials(self):
        with pytest.raises(ValueError):
            synth.SynthConfig(trials={StageTag.RECALL: 0})

    def test_source_frequency_above_nyquist(self):
        profile = synth.GroupProfile(kappa=0.5, source_freqs=(200.0,))
        with pytest.raises(ValueError):
            synth.generate_subject(profile, small_cfg(), 0)
