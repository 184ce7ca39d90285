import math

import numpy as np
import pytest

from tvrates import (
    CharGrid,
    DecayError,
    ExpEnvelopeTable,
    GaussianMixture,
    PolyEnvelopeTable,
    PreconditionError,
    ResolutionError,
    char_fn_grid,
    char_grid_analytic,
    delta_p_char,
    discretize,
    gaussian,
    inverse_char_grid,
    poly_envelope,
    sigma_box,
    weighted_diff_reconstruct,
)
from tvrates.spectral import exp_envelope, forward_transform, multiindices


def grid_of(dist, n=4096, k_sigma=10.0):
    return discretize(dist, sigma_box(dist, k_sigma), n)


class TestAnalyticCharFn:
    def test_standard_normal_at_one(self, std_normal):
        np.testing.assert_allclose(std_normal.char_fn(1.0), math.exp(-0.5))

    def test_normalization_at_zero(self, bimodal):
        np.testing.assert_allclose(bimodal.char_fn(0.0), 1.0)

    def test_shifted_normal_at_pi(self):
        g = gaussian(1.0, 1.0)
        val = g.char_fn(math.pi)
        expected = np.exp(1j * math.pi - math.pi**2 / 2.0)
        np.testing.assert_allclose(val, expected, atol=1e-15)
        np.testing.assert_allclose(abs(val), math.exp(-math.pi**2 / 2.0))


class TestCharGrid:
    def test_matches_analytic_near_one(self, std_normal):
        cg = char_fn_grid(grid_of(std_normal, 1024))
        u = cg.freq_axes()[0]
        node = u[np.abs(u - 1.0).argmin()]
        assert abs(cg.value_at(1.0) - std_normal.char_fn(node)) < 1e-6

    def test_matches_analytic_on_half_band(self, bimodal):
        f = grid_of(bimodal, 1024)
        cg = char_fn_grid(f)
        u = cg.freq_axes()[0]
        half = np.abs(u) <= np.abs(u).max() / 2
        exact = bimodal.char_fn(u[half])
        np.testing.assert_allclose(cg.values[half], exact, atol=1e-6)

    def test_unit_value_at_zero(self, bimodal):
        cg = char_fn_grid(grid_of(bimodal, 512))
        assert abs(cg.value_at(0.0) - 1.0) < 1e-8

    def test_translation_changes_phase_only(self):
        n = 1024
        f0 = discretize(gaussian(0.0, 1.0), [[-10, 10]], n)
        f3 = discretize(gaussian(3.0, 1.0), [[-7, 13]], n)
        m0 = np.abs(char_fn_grid(f0).values)
        m3 = np.abs(char_fn_grid(f3).values)
        np.testing.assert_allclose(m0, m3, atol=1e-9)

    def test_round_trip_recovers_density(self, bimodal):
        f = grid_of(bimodal, 2048)
        back = inverse_char_grid(char_fn_grid(f))
        assert np.abs(back.real - f.values).max() <= 1e-8
        assert np.abs(back.imag).max() <= 1e-10

    def test_plancherel(self, bimodal):
        f = grid_of(bimodal, 2048)
        cg = char_fn_grid(f)
        space = np.sum(f.values**2) * f.grid.cell_volume
        freq = np.sum(np.abs(cg.values) ** 2) * f.grid.freq_cell_volume() / (2 * math.pi)
        np.testing.assert_allclose(space, freq, rtol=1e-6)

    def test_modulus_bound_and_conjugate_symmetry(self, bimodal):
        cg = char_fn_grid(grid_of(bimodal, 1024))
        assert np.abs(cg.values).max() <= 1.0 + 1e-8
        v = cg.values
        # node -u_m is node n-m for m >= 1 on the shifted grid
        np.testing.assert_allclose(v[1:], np.conj(v[1:][::-1]), atol=1e-10)

    def test_characteristic_invariants_enforced(self, std_normal):
        f = grid_of(std_normal, 256)
        with pytest.raises(PreconditionError):
            CharGrid(f.grid, np.full(f.grid.shape, 2.0 + 0j))

    def test_analytic_grid_agrees_with_fft(self, bimodal):
        f = grid_of(bimodal, 1024)
        ca = char_grid_analytic(bimodal, f.grid)
        cf = char_fn_grid(f)
        u = np.abs(f.grid.freq_axes()[0])
        half = u <= u.max() / 2
        np.testing.assert_allclose(ca.values[half], cf.values[half], atol=1e-6)


class TestDeltaP:
    def test_second_derivative_at_zero(self, std_normal):
        dp = delta_p_char(std_normal, 2)
        np.testing.assert_allclose(dp.value_at(0.0), -1.0, atol=1e-12)

    def test_second_derivative_near_one(self, std_normal):
        f = grid_of(std_normal)
        dp = delta_p_char(std_normal, 2, f.grid)
        u = f.grid.freq_axes()[0]
        node = u[np.abs(u - 1.0).argmin()]
        expected = (node**2 - 1.0) * math.exp(-(node**2) / 2.0)
        np.testing.assert_allclose(dp.value_at(1.0), expected, atol=1e-12)

    def test_fourth_derivative_at_zero(self, std_normal):
        dp = delta_p_char(std_normal, 4)
        np.testing.assert_allclose(dp.value_at(0.0), 3.0, atol=1e-12)

    def test_odd_order_rejected(self, std_normal):
        with pytest.raises(PreconditionError):
            delta_p_char(std_normal, 3)

    def test_grid_and_analytic_paths_agree(self, bimodal):
        f = grid_of(bimodal)
        da = delta_p_char(bimodal, 2, f.grid)
        dg = delta_p_char(f, 2)
        u = np.abs(f.grid.freq_axes()[0])
        band = u <= u.max() / 2
        np.testing.assert_allclose(dg.values[band], da.values[band], atol=1e-8)

    @pytest.mark.parametrize("p", [2, 4])
    def test_value_at_zero_is_signed_moment_sum(self, p):
        mix = GaussianMixture(
            [0.6, 0.4], [[0.5, -1.0], [-0.25, 2.0]],
            [np.eye(2).tolist(), [[2.0, 0.3], [0.3, 0.5]]],
        )
        grid = __import__("tvrates").common_grid(mix, mix, resolution=256)
        dp = delta_p_char(mix, p, grid)
        # i^p sum_j E x_j^p, from per-component Gaussian moment recursion
        total = 0.0
        for w, m, c in zip(mix.weights, mix.means, mix.covs):
            for j in range(2):
                mu, var = m[j], c[j, j]
                mom = {0: 1.0, 1: mu}
                for k in range(2, p + 1):
                    mom[k] = mu * mom[k - 1] + (k - 1) * var * mom[k - 2]
                total += w * mom[p]
        expected = (1j) ** p * total
        np.testing.assert_allclose(dp.value_at([0.0, 0.0]), expected, atol=1e-6)


class TestWeightedDiffReconstruct:
    def test_identical_inputs_give_zero(self, std_normal):
        _, vals = weighted_diff_reconstruct(std_normal, std_normal, 2)
        assert np.abs(vals).max() < 1e-12

    def test_matches_direct_product_translate(self):
        a, b = gaussian(0.0, 1.0), gaussian(0.5, 1.0)
        grid, vals = weighted_diff_reconstruct(a, b, 2)
        x = grid.mesh()[0]
        direct = (a.pdf(x) - b.pdf(x)) * x**2
        assert np.abs(vals - direct).max() <= 1e-3

    def test_sign_pattern_variance_pair(self):
        a, b = gaussian(0.0, 1.0), gaussian(0.0, 1.21)
        grid, vals = weighted_diff_reconstruct(a, b, 2)
        x = grid.mesh()[0]
        direct = (a.pdf(x) - b.pdf(x)) * x**2
        strong = np.abs(direct) > 1e-6
        assert np.all(np.sign(vals[strong]) == np.sign(direct[strong]))

    def test_grid_inputs_must_match(self):
        fa = discretize(gaussian(0.0, 1.0), [[-10, 10]], 512)
        fb = discretize(gaussian(0.0, 1.0), [[-12, 12]], 512)
        with pytest.raises(PreconditionError):
            weighted_diff_reconstruct(fa, fb, 2)


class TestPolyEnvelope:
    def test_density_peak_entry(self, std_normal):
        tab = poly_envelope(grid_of(std_normal), 0, 0)
        np.testing.assert_allclose(
            tab.get(0, 0), 1.0 / math.sqrt(2 * math.pi), rtol=1e-4
        )

    def test_density_weighted_entry(self, std_normal):
        # maximize (1+|x|)^2 e^{-x^2/2}/sqrt(2 pi): stationarity 2/(1+x) = x
        # gives x = 1, value 4 e^{-1/2}/sqrt(2 pi) = 0.9678828...
        tab = poly_envelope(grid_of(std_normal), 0, 2)
        expected = 4.0 * math.exp(-0.5) / math.sqrt(2 * math.pi)
        np.testing.assert_allclose(tab.get(0, 2), expected, atol=1e-4)

    def test_frequency_unit_entry(self, std_normal):
        tab = poly_envelope(char_fn_grid(grid_of(std_normal)), 0, 0)
        np.testing.assert_allclose(tab.get(0, 0), 1.0, atol=1e-10)

    def test_refinement_stability(self, bimodal):
        f1 = grid_of(bimodal, 4096)
        f2 = grid_of(bimodal, 8192)
        for obj1, obj2 in ((f1, f2), (char_fn_grid(f1), char_fn_grid(f2))):
            t1 = poly_envelope(obj1, 4, 6)
            t2 = poly_envelope(obj2, 4, 6)
            rel = np.abs(t2.table - t1.table) / t1.table
            assert rel.max() < 0.05

    def test_coarse_grid_rejected_for_high_order(self):
        # a spike this narrow still has resolved spectral content at the
        # 64-point band edge: differentiation of that grid is not certified
        f = discretize(gaussian(0.0, 0.0009), [[-1, 1]], 64)
        with pytest.raises(ResolutionError):
            poly_envelope(f, 4, 2)

    def test_json_round_trip(self, std_normal):
        tab = poly_envelope(grid_of(std_normal), 2, 3)
        doc = tab.to_json()
        assert set(doc) == {"side", "entries"}
        assert set(doc["entries"][0]) == {"k", "l", "c"}
        back = PolyEnvelopeTable.from_json(doc)
        np.testing.assert_array_equal(back.table, tab.table)
        assert back.side == tab.side

    def test_pair_combination_is_entrywise_max(self, std_normal, bimodal):
        ta = poly_envelope(grid_of(std_normal), 2, 2)
        tb = poly_envelope(grid_of(bimodal), 2, 2)
        comb = ta.combine_max(tb)
        np.testing.assert_array_equal(comb.table, np.maximum(ta.table, tb.table))


class TestExpEnvelope:
    def test_gaussian_fit_is_positive_and_self_consistent(self, std_normal):
        cg = char_fn_grid(grid_of(std_normal))
        tab = exp_envelope(cg, 0)
        r0, c0 = tab.get(0)
        assert r0 > 0 and math.isfinite(c0)
        cg2 = char_fn_grid(grid_of(std_normal, 8192))
        tab2 = exp_envelope(cg2, 0)
        assert abs(tab2.integrals[0] - c0) / c0 < 0.01

    def test_point_mass_tail_rejected(self, std_normal):
        # |phi| = 1 everywhere (a pure phase) has a flat tail: no certificate
        grid = grid_of(std_normal, 512).grid
        u = grid.freq_mesh()[0]
        flat = CharGrid(grid, np.exp(1j * 0.3 * u))
        with pytest.raises(DecayError):
            exp_envelope(flat, 0)

    def test_rate_scales_with_width(self):
        # phi_sigma(u) = phi_1(sigma u), so the fitted tail rate doubles
        # when sigma does
        f1 = discretize(gaussian(0.0, 1.0), [[-10, 10]], 4096)
        f2 = discretize(gaussian(0.0, 4.0), [[-20, 20]], 4096)
        r1 = exp_envelope(char_fn_grid(f1), 0).rates[0]
        r2 = exp_envelope(char_fn_grid(f2), 0).rates[0]
        np.testing.assert_allclose(r2, 2.0 * r1, rtol=0.05)
        assert r2 >= r1

    def test_pair_combination_bounds_both(self, std_normal, bimodal):
        ea = exp_envelope(char_fn_grid(grid_of(std_normal)), 2)
        eb = exp_envelope(char_fn_grid(grid_of(bimodal)), 2)
        comb = ea.combine(eb)
        for k in range(3):
            assert comb.rates[k] == min(ea.rates[k], eb.rates[k])
            assert comb.integrals[k] >= max(ea.integrals[k], eb.integrals[k])

    def test_json_matches_declared_schema(self, std_normal):
        tab = exp_envelope(char_fn_grid(grid_of(std_normal)), 1)
        doc = tab.to_json()
        assert set(doc) == {"entries"}
        assert set(doc["entries"][0]) == {"k", "r", "c"}
        back = ExpEnvelopeTable.from_json(doc)
        assert back.rates == tab.rates


class TestMultiindices:
    def test_counts(self):
        assert len(multiindices(1, 4)) == 1
        assert len(multiindices(2, 3)) == 4
        assert len(multiindices(3, 2)) == 6

    def test_orders(self):
        assert all(sum(a) == 3 for a in multiindices(2, 3))


class Test2D:
    def test_char_grid_matches_analytic(self):
        mix = gaussian([0.0, 0.5], [[1.0, 0.3], [0.3, 2.0]])
        f = discretize(mix, sigma_box(mix, 10.0), 256)
        cg = char_fn_grid(f)
        u = np.stack(f.grid.freq_mesh(), axis=-1)
        r = f.grid.freq_radii()
        band = r <= r.max() / 4
        np.testing.assert_allclose(
            cg.values[band], mix.char_fn(u)[band], atol=1e-6
        )

    def test_envelopes_finite(self):
        mix = gaussian([0.0, 0.0], [[1.0, 0.2], [0.2, 1.0]])
        f = discretize(mix, sigma_box(mix, 10.0), 256)
        tab = poly_envelope(char_fn_grid(f), 3, 4)
        assert np.all(np.isfinite(tab.table))
        et = exp_envelope(char_fn_grid(f), 2)
        assert all(r > 0 for r in et.rates.values())

    def test_forward_transform_matches_direct_sum(self):
        # tiny grid, direct O(n^2) evaluation of the discrete transform
        mix = gaussian([0.0, 0.0], np.eye(2))
        f = discretize(mix, [[-8, 8], [-8, 8]], 16)
        got = forward_transform(f.grid, f.values)
        xs = np.stack(f.grid.mesh(), axis=-1).reshape(-1, 2)
        vals = f.values.reshape(-1)
        us = np.stack(f.grid.freq_mesh(), axis=-1).reshape(-1, 2)
        direct = (
            vals[None, :] * np.exp(1j * us @ xs.T)
        ).sum(axis=1) * f.grid.cell_volume
        np.testing.assert_allclose(got.reshape(-1), direct, atol=1e-10)
