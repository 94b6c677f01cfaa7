from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from brownian_average.conditioning import (
    SQRT3,
    SQRT12,
    ConditioningSpec,
    FiniteSignedMeasure,
    Piece,
    bridge_kernel,
    brownian_kernel,
    excursion_measures,
    excursion_spec,
    meander_measures,
    meander_spec,
    pair_path,
    q_apply,
    q_pair,
    rho_weight,
    transform_Y,
    transform_Z,
)
from brownian_average.oracle import (
    bm_split_density,
    bm_split_transform,
    bridge_split_density,
    bridge_split_transform,
)
from brownian_average.paths import Path, make_grid, sample_bm, sample_bridge, time_average

GRID = make_grid(240, [1 / 3, 0.5, 2 / 3])


def _segment_integral(values, lo, hi):
    sl = slice(GRID.index(lo), GRID.index(hi) + 1)
    return np.trapezoid(values[..., sl], GRID.times[sl], axis=-1)


class TestQApply:
    def test_meander_lambda_first_half(self):
        lam, _ = meander_measures()
        assert q_apply(brownian_kernel, lam, 0.25) == pytest.approx(SQRT3 * 0.25 * (1 - 0.125), abs=1e-14)

    def test_meander_lambda_second_half(self):
        lam, _ = meander_measures()
        assert q_apply(brownian_kernel, lam, 0.75) == pytest.approx(3 * SQRT3 / 8, abs=1e-14)

    def test_zero_measure(self):
        t = np.linspace(0, 1, 11)
        assert np.all(q_apply(brownian_kernel, FiniteSignedMeasure(), t) == 0)

    def test_lebesgue_against_known_covariance(self):
        t = np.linspace(0, 1, 21)
        got = q_apply(brownian_kernel, FiniteSignedMeasure.lebesgue(), t)
        np.testing.assert_allclose(got, t * (2 - t) / 2, atol=1e-14)

    def test_atom(self):
        t = np.linspace(0, 1, 21)
        got = q_apply(brownian_kernel, FiniteSignedMeasure.dirac(0.5, 0.5), t)
        np.testing.assert_allclose(got, np.minimum(t, 0.5) / 2, atol=1e-15)

    def test_curved_density(self):
        # Q of cos(2 pi s) ds under min(s, t): (cos(2 pi t) - 1) / (4 pi^2)
        h = FiniteSignedMeasure((Piece(0.0, 1.0, lambda s: np.cos(2 * np.pi * s)),))
        t = np.linspace(0, 1, 17)
        np.testing.assert_allclose(q_apply(brownian_kernel, h, t, n_nodes=512), (np.cos(2 * np.pi * t) - 1) / (4 * np.pi**2), atol=1e-9)


class TestQPair:
    def test_meander_I(self):
        lam, _ = meander_measures()
        assert q_pair(brownian_kernel, lam, lam) == pytest.approx(7 / 8, abs=1e-12)

    def test_excursion_I(self):
        lam, _ = excursion_measures()
        assert q_pair(bridge_kernel, lam, lam) == pytest.approx(26 / 27, abs=1e-12)

    def test_orthogonality(self):
        lam, mu = meander_measures()
        assert abs(q_pair(brownian_kernel, lam, mu)) <= 1e-10
        lam, mu = excursion_measures()
        assert abs(q_pair(bridge_kernel, lam, mu)) <= 1e-10

    def test_variance_of_integral(self):
        one = FiniteSignedMeasure.lebesgue()
        assert q_pair(brownian_kernel, one, one) == pytest.approx(1 / 3, abs=1e-14)
        assert q_pair(bridge_kernel, one, one) == pytest.approx(1 / 12, abs=1e-14)

    @given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.05, 0.95))
    def test_symmetric_and_bilinear(self, a, b, x):
        m1 = FiniteSignedMeasure((Piece(0.0, x, a),), ((x, b),))
        m2 = FiniteSignedMeasure((Piece(x, 1.0, b),), ((0.5, a),)) if abs(x - 0.5) > 1e-6 else FiniteSignedMeasure.lebesgue(0, 1, b)
        assert q_pair(brownian_kernel, m1, m2) == pytest.approx(q_pair(brownian_kernel, m2, m1), abs=1e-12)
        assert q_pair(brownian_kernel, m1 * 2.0, m2) == pytest.approx(2 * q_pair(brownian_kernel, m1, m2), abs=1e-12)


class TestPairPath:
    def test_meander_lambda(self, rng):
        w = sample_bm(GRID, rng, 5)
        lam, _ = meander_measures()
        expected = SQRT3 * (_segment_integral(w.values, 0, 0.5) + 0.5 * w.at(0.5))
        np.testing.assert_allclose(pair_path(w, lam), expected, atol=1e-13)

    def test_excursion_mu(self, rng):
        w = sample_bridge(GRID, 0, 0, (0, 1), rng, 5)
        _, mu = excursion_measures()
        expected = SQRT12 * (_segment_integral(w.values, 1 / 3, 2 / 3) - (w.at(1 / 3) + w.at(2 / 3)) / 6)
        np.testing.assert_allclose(pair_path(w, mu), expected, atol=1e-13)

    def test_zero_path(self):
        lam, _ = excursion_measures()
        assert pair_path(Path(GRID, np.zeros(len(GRID))), lam) == 0.0

    def test_atom_off_grid(self):
        with pytest.raises(ValueError):
            pair_path(Path(make_grid(4), np.zeros(5)), FiniteSignedMeasure.dirac(0.3))


def _identity_spec(spec: ConditioningSpec, path: Path) -> ConditioningSpec:
    kappa = pair_path(path, spec.lam) + pair_path(path, spec.mu)
    return ConditioningSpec(spec.kernel, spec.lam, spec.mu, kappa, spec.Lambda, spec.M, spec.I, spec.name)


class TestTransforms:
    def test_Y_identity_when_consistent(self, rng):
        w = sample_bm(GRID, rng)
        spec = _identity_spec(meander_spec(0.3), w)
        np.testing.assert_allclose(transform_Y(w, spec).values, w.values, atol=1e-15)
        np.testing.assert_allclose(transform_Z(w, spec).values, w.values, atol=1e-15)

    def test_Y_is_bm_conditioned_on_average(self, rng):
        c = 0.7
        w = sample_bm(GRID, rng, 20)
        t = GRID.times
        expected = w.values + 1.5 * t * (2 - t) * (c - time_average(w))[:, None]
        np.testing.assert_allclose(transform_Y(w, meander_spec(c)).values, expected, atol=1e-12)

    def test_Y_zero_path(self):
        c = 1.3
        t = GRID.times
        y = transform_Y(Path(GRID, np.zeros(len(GRID))), meander_spec(c))
        np.testing.assert_allclose(y.values, 1.5 * t * (2 - t) * c, atol=1e-12)

    def test_Y_bridge_conditioned_on_average(self, rng):
        c = 0.4
        w = sample_bridge(GRID, 0, 0, (0, 1), rng, 20)
        t = GRID.times
        expected = w.values + 6 * t * (1 - t) * (c - time_average(w))[:, None]
        np.testing.assert_allclose(transform_Y(w, excursion_spec(c)).values, expected, atol=1e-12)

    @pytest.mark.parametrize("c", [0.0, 0.5, 2.0])
    def test_Z_meander_closed_form(self, rng, c):
        w = sample_bm(GRID, rng, 100)
        z = transform_Z(w, meander_spec(c))
        np.testing.assert_allclose(z.values, bm_split_transform(w, c).values, rtol=0, atol=1e-12)

    @pytest.mark.parametrize("c", [0.0, 0.5, 2.0])
    def test_Z_excursion_closed_form(self, rng, c):
        w = sample_bridge(GRID, 0, 0, (0, 1), rng, 100)
        z = transform_Z(w, excursion_spec(c))
        np.testing.assert_allclose(z.values, bridge_split_transform(w, c).values, rtol=0, atol=1e-12)

    def test_Z_requires_I_below_one(self):
        spec = meander_spec(0.5)
        bad = ConditioningSpec(spec.kernel, spec.lam, spec.mu, spec.kappa, spec.Lambda, spec.M, 1.0)
        with pytest.raises(ValueError):
            transform_Z(Path(GRID, np.zeros(len(GRID))), bad)
        with pytest.raises(ValueError):
            rho_weight(Path(GRID, np.zeros(len(GRID))), bad)

    @given(st.floats(-2, 2), st.integers(0, 2**32 - 1))
    def test_Z_preserves_gamma(self, c, seed):
        # gamma(Z) = gamma(X) because M is Q-orthogonal to lambda; on the grid
        # the trapezoid rule applied to the quadratic M leaves an O(h^2) residue
        for spec, sampler in (
            (meander_spec(c), lambda g: sample_bm(GRID, g)),
            (excursion_spec(c), lambda g: sample_bridge(GRID, 0, 0, (0, 1), g)),
        ):
            w = sampler(np.random.default_rng(seed))
            z = transform_Z(w, spec)
            assert pair_path(z, spec.lam) == pytest.approx(pair_path(w, spec.lam), abs=1e-4)
            assert time_average(z) == pytest.approx(c, abs=5e-4 * (1 + abs(c)))


class TestRho:
    def test_at_gamma_equal_kappa(self):
        spec = meander_spec(0.8)
        lam = spec.lam
        # constant path w = k has gamma = k * lam(total) = k * sqrt(3)
        k = spec.kappa / SQRT3
        got = rho_weight(Path(GRID, np.full(len(GRID), k)), spec)
        assert got == pytest.approx(math.exp(spec.kappa**2 / 2) / math.sqrt(1 - spec.I), rel=1e-13)
        assert pair_path(Path(GRID, np.full(len(GRID), k)), lam) == pytest.approx(spec.kappa, rel=1e-13)

    @pytest.mark.parametrize("c", [0.2, 1.0])
    def test_meander_closed_form(self, rng, c):
        spec = meander_spec(c)
        z = transform_Z(sample_bm(GRID, rng, 100), spec)
        np.testing.assert_allclose(rho_weight(z, spec), bm_split_density(z, c), rtol=1e-12)

    @pytest.mark.parametrize("c", [0.2, 1.0])
    def test_excursion_closed_form(self, rng, c):
        spec = excursion_spec(c)
        z = transform_Z(sample_bridge(GRID, 0, 0, (0, 1), rng, 100), spec)
        np.testing.assert_allclose(rho_weight(z, spec), bridge_split_density(z, c), rtol=1e-12)


class TestSpecs:
    def test_meander_constants(self):
        spec = meander_spec(1.0)
        assert spec.I == 7 / 8
        assert spec.kappa == pytest.approx(SQRT3)
        assert np.all(spec.M(np.linspace(0, 0.5, 11)) == 0)
        assert spec.M(0.75) == pytest.approx(SQRT3 * 0.75 * (1 - 0.375) - 3 * SQRT3 / 8, abs=1e-15)

    def test_excursion_constants(self):
        spec = excursion_spec(1.0)
        assert spec.I == 26 / 27
        assert spec.kappa == pytest.approx(SQRT12)
        assert np.allclose(spec.Lambda(np.linspace(0.34, 0.66, 9)), 2 * SQRT3 / 9, atol=1e-15)
        assert spec.M(0.5) == pytest.approx(SQRT3 / 4 - 2 * SQRT3 / 9, abs=1e-15)

    @pytest.mark.parametrize("factory", [meander_spec, excursion_spec])
    def test_closed_forms_match_quadrature(self, factory):
        spec = factory(0.0)
        t = np.random.default_rng(0).uniform(0, 1, 50)
        np.testing.assert_allclose(spec.Lambda(t), q_apply(spec.kernel, spec.lam, t), atol=1e-12)
        np.testing.assert_allclose(spec.M(t), q_apply(spec.kernel, spec.mu, t), atol=1e-12)

    @pytest.mark.parametrize("factory", [meander_spec, excursion_spec])
    def test_Lambda_plus_M_is_covariance_with_average(self, factory):
        # Lambda + M = Q(lambda + mu) = k * Cov(X_t, int X)
        spec = factory(0.0)
        t = np.linspace(0, 1, 31)
        if spec.kernel is brownian_kernel:
            expected = SQRT3 * t * (2 - t) / 2
        else:
            expected = SQRT12 * t * (1 - t) / 2
        np.testing.assert_allclose(spec.Lambda(t) + spec.M(t), expected, atol=1e-14)

    @pytest.mark.parametrize("factory", [meander_spec, excursion_spec])
    def test_residuals(self, factory):
        res = factory(0.3).residuals()
        assert all(abs(v) <= 1e-10 for v in res.values())
