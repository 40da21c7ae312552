import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wmfc import harmonics
from wmfc.signal_io import default_montage

import oracles


class TestFlatIndex:
    def test_known_values(self):
        assert harmonics.flat_index(0, 0) == 0
        assert harmonics.flat_index(1, -1) == 1
        assert harmonics.flat_index(1, 0) == 2
        assert harmonics.flat_index(1, 1) == 3
        assert harmonics.flat_index(6, 6) == 48

    def test_bijection_up_to_6(self):
        seen = set()
        for n in range(7):
            for m in range(-n, n + 1):
                k = harmonics.flat_index(n, m)
                assert harmonics.unflatten_index(k) == (n, m)
                seen.add(k)
        assert seen == set(range(49))

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            harmonics.flat_index(2, 3)


class TestEvalRealSh:
    def test_constant_harmonic(self):
        v = harmonics.eval_real_sh(0, 0, 1.234, 2.345)
        assert v == pytest.approx(1 / math.sqrt(4 * math.pi), abs=1e-12)
        assert v == pytest.approx(0.28209479, abs=1e-8)

    def test_polar_value_n1(self):
        v = harmonics.eval_real_sh(1, 0, 0.0, 0.0)
        assert v == pytest.approx(math.sqrt(3 / (4 * math.pi)), abs=1e-12)
        assert v == pytest.approx(0.48860251, abs=1e-8)

    def test_high_order_sectoral_matches_polynomial_oracle(self):
        v = harmonics.eval_real_sh(6, -6, math.pi / 3, 0.7)
        assert v == pytest.approx(
            oracles.real_sh_oracle(6, -6, math.pi / 3, 0.7), rel=1e-10
        )

    @given(
        st.integers(min_value=0, max_value=6),
        st.floats(min_value=0.01, max_value=3.13),
        st.floats(min_value=0.0, max_value=6.28),
    )
    @settings(max_examples=60, deadline=None)
    def test_all_orders_match_polynomial_oracle(self, n, theta, phi):
        for m in range(-n, n + 1):
            assert harmonics.eval_real_sh(n, m, theta, phi) == pytest.approx(
                oracles.real_sh_oracle(n, m, theta, phi), rel=1e-9, abs=1e-12
            )

    def test_continuous_orthonormality_fine_quadrature(self):
        # product Gauss-Legendre x trapezoid grid, ~10^4 nodes
        n_theta, n_phi = 60, 180
        x, w = np.polynomial.legendre.leggauss(n_theta)
        thetas = np.arccos(x)
        phis = np.arange(n_phi) * 2 * np.pi / n_phi
        design = np.zeros((n_theta * n_phi, 49))
        weights = np.repeat(w, n_phi) * (2 * np.pi / n_phi)
        for k in range(49):
            n, m = harmonics.unflatten_index(k)
            col = [
                harmonics.eval_real_sh(n, m, th, ph)
                for th in thetas
                for ph in phis
            ]
            design[:, k] = col
        gram = design.T @ (weights[:, None] * design)
        assert np.max(np.abs(gram - np.eye(49))) < 1e-6


class TestBases:
    def test_order0_constant_column(self):
        m = default_montage()
        basis = harmonics.build_sh_basis(m, 0)
        assert basis.matrix.shape == (63, 1)
        np.testing.assert_allclose(basis.matrix[:, 0], 0.28209479, atol=1e-8)

    def test_order_too_high_rejected(self):
        m = default_montage()
        with pytest.raises(ValueError):
            harmonics.build_sh_basis(m, 7)  # 64 columns > 63 electrodes

    def test_sh_design_matrix_shape(self):
        basis = harmonics.build_sh_basis(default_montage(), 6)
        assert basis.matrix.shape == (63, 49)

    def test_head_basis_discrete_orthonormality(self):
        m = default_montage()
        basis = harmonics.build_head_basis(m, 6)
        # identity sampling weights by default
        gram = basis.matrix.T @ basis.matrix
        assert np.max(np.abs(gram - np.eye(49))) < 1e-10

    def test_head_basis_weighted_orthonormality(self):
        m = default_montage()
        rng = np.random.default_rng(17)
        w = harmonics.SamplingWeights(diag=rng.uniform(0.5, 2.0, 63))
        basis = harmonics.build_head_basis(m, 6, weights=w)
        gram = basis.matrix.T @ (w.diag[:, None] * basis.matrix)
        assert np.max(np.abs(gram - np.eye(49))) < 1e-10

    def test_head_basis_first_column_constant_positive(self):
        basis = harmonics.build_head_basis(default_montage(), 6)
        col = basis.matrix[:, 0]
        assert np.all(col > 0)
        np.testing.assert_allclose(col, col[0], rtol=1e-12)

    def test_head_equals_sh_on_uniform_design(self):
        # a spherical 2-design style layout where the SH columns are already
        # discretely orthogonal: use a fine Gauss grid as fake "electrodes"
        from wmfc.signal_io import ElectrodePosition, Montage

        x, w = np.polynomial.legendre.leggauss(12)
        entries = {}
        gammas = []
        i = 0
        for xi, wi in zip(x, w):
            for j in range(24):
                entries[f"G{i:03d}"] = ElectrodePosition(
                    elevation=math.acos(xi),
                    azimuth=j * 2 * np.pi / 24,
                    radius=0.09,
                )
                gammas.append(wi * 2 * np.pi / 24)
                i += 1
        montage = Montage(entries=entries)
        weights = harmonics.SamplingWeights(diag=np.array(gammas))
        sh = harmonics.build_sh_basis(montage, 4)
        hh = harmonics.build_head_basis(montage, 4, weights=weights)
        # columns should agree up to a positive scale factor
        for k in range(sh.matrix.shape[1]):
            a = sh.matrix[:, k]
            b = hh.matrix[:, k]
            scale = np.dot(a, b) / np.dot(b, b)
            np.testing.assert_allclose(a, scale * b, atol=1e-8)


class TestDecompose:
    def test_constant_field_sh_coefficient(self):
        m = default_montage()
        basis = harmonics.build_sh_basis(m, 6)
        v = np.ones((63, 1))
        series = harmonics.decompose(basis, None, v)
        assert series.coeffs.shape == (49, 1)
        assert series.coeffs[0, 0] == pytest.approx(63 * 0.28209479, abs=1e-4)

    def test_zero_field(self):
        basis = harmonics.build_sh_basis(default_montage(), 6)
        series = harmonics.decompose(basis, None, np.zeros((63, 5)))
        np.testing.assert_array_equal(series.coeffs, np.zeros((49, 5)))

    def test_output_dimensions(self):
        basis = harmonics.build_head_basis(default_montage(), 6)
        series = harmonics.decompose(basis, None, np.ones((63, 17)))
        assert series.coeffs.shape == (49, 17)

    def test_linearity(self):
        rng = np.random.default_rng(13)
        basis = harmonics.build_head_basis(default_montage(), 6)
        u = rng.standard_normal((63, 4))
        w = rng.standard_normal((63, 4))
        lhs = harmonics.decompose(basis, None, 2.0 * u + 0.5 * w).coeffs
        rhs = (
            2.0 * harmonics.decompose(basis, None, u).coeffs
            + 0.5 * harmonics.decompose(basis, None, w).coeffs
        )
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    def test_span_reconstruction_head_basis(self):
        # any vector in the SH column span must be reproduced by the
        # orthonormal head projection
        rng = np.random.default_rng(14)
        m = default_montage()
        sh = harmonics.build_sh_basis(m, 6)
        hh = harmonics.build_head_basis(m, 6)
        v = sh.matrix @ rng.standard_normal((49, 3))
        coeffs = harmonics.decompose(hh, None, v).coeffs
        recon = hh.matrix @ coeffs
        np.testing.assert_allclose(recon, v, atol=1e-8)

    def test_sampled_y32_least_squares(self):
        m = default_montage()
        hh = harmonics.build_head_basis(m, 6)
        v = np.array(
            [
                oracles.real_sh_oracle(3, 2, e.elevation, e.azimuth)
                for e in m.entries.values()
            ]
        )[:, None]
        coeffs = harmonics.decompose(hh, None, v).coeffs
        np.testing.assert_allclose(hh.matrix @ coeffs, v, atol=1e-8)
