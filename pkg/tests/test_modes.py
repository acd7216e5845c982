import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bogofock.modes import (
    BogoliubovMap,
    ModeOperator,
    RelationError,
    bogoliubov_residuals,
    conjugation_J,
    operator_norm,
    pair_operator,
    pair_operator_spectral,
    pair_residual,
    shale_stinespring_probe,
)
from bogofock.quadratic import generate_bogoliubov

maps = st.builds(
    generate_bogoliubov,
    modes=st.integers(1, 5),
    seed=st.integers(0, 10_000),
    strength=st.floats(0.0, 1.2),
)


class TestModeOperator:
    def test_antilinear_application(self):
        J = conjugation_J(2)
        assert np.allclose(J([1j, 2]), [-1j, 2])

    def test_composition_with_conjugation(self, rng):
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        A = ModeOperator(a)
        J = conjugation_J(3)
        phi = rng.normal(size=3) + 1j * rng.normal(size=3)
        assert (J @ A).antilinear
        assert np.allclose((J @ A)(phi), np.conj(a @ phi))
        assert np.allclose((A @ J)(phi), a @ np.conj(phi))
        # J A J is the entrywise conjugate
        assert np.allclose((J @ A @ J).entries, A.bar.entries)
        assert not (J @ A @ J).antilinear

    def test_antilinear_adjoint(self, rng):
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        B = ModeOperator(a, antilinear=True)
        x = rng.normal(size=3) + 1j * rng.normal(size=3)
        y = rng.normal(size=3) + 1j * rng.normal(size=3)
        # <x, B y> = conj(<B^* x, y>) for antilinear B
        assert np.isclose(np.vdot(x, B(y)), np.conj(np.vdot(B.H(x), y)))

    def test_mixed_sum_rejected(self):
        with pytest.raises(ValueError):
            ModeOperator(np.eye(2)) + conjugation_J(2)

    def test_non_square_rejected(self):
        with pytest.raises(ValueError):
            ModeOperator(np.ones((2, 3)))

    def test_norm_ignores_antilinearity(self):
        assert operator_norm(ModeOperator(2 * np.eye(2), True)) == pytest.approx(2.0)


class TestRelations:
    def test_identity(self):
        assert bogoliubov_residuals(BogoliubovMap.identity(4)) == (0.0, 0.0, 0.0, 0.0)

    @pytest.mark.parametrize("r", [0.1, 0.7, 2.0])
    def test_squeeze(self, squeeze, r):
        assert max(bogoliubov_residuals(squeeze(r, 0.3))) < 1e-12

    def test_broken_map_detected(self):
        bad = BogoliubovMap([[1.0]], [[0.5]])
        assert bogoliubov_residuals(bad)[0] == pytest.approx(0.25)
        with pytest.raises(RelationError):
            pair_operator(bad)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            BogoliubovMap(np.eye(2), np.zeros((3, 3)))

    @given(maps)
    def test_generated_maps_valid(self, bmap):
        assert max(bogoliubov_residuals(bmap)) < 1e-10


class TestPairOperator:
    @pytest.mark.parametrize("r", [0.1, 0.7, 2.0])
    def test_single_mode_closed_form(self, squeeze, r):
        o, kernel = pair_operator(squeeze(r))
        assert abs(o.entries[0, 0] - (-0.5 * math.tanh(r))) < 1e-12

    def test_phase(self, squeeze):
        o, _ = pair_operator(squeeze(0.7, 1.1))
        assert np.isclose(o.entries[0, 0], -0.5 * np.exp(1.1j) * math.tanh(0.7))

    def test_frozen_value(self, squeeze):
        # -tanh(1)/2
        assert pair_operator(squeeze(1.0))[0].entries[0, 0].real == pytest.approx(-0.38079707797788244, abs=1e-15)

    def test_identity_gives_zero(self):
        o, k = pair_operator(BogoliubovMap.identity(3))
        assert np.all(o.entries == 0)

    @given(maps)
    def test_properties(self, bmap):
        o, kernel = pair_operator(bmap)
        assert np.max(np.abs(o.entries - pair_operator_spectral(bmap))) < 1e-9
        assert kernel.symmetry_residual() < 1e-10
        assert operator_norm(o) < 0.5
        assert pair_residual(bmap, o) < 1e-10

    def test_tiny_squeezing_dual_path(self, squeeze):
        # v ~ 1e-9: the spectral path must not discard the sub-threshold spectrum
        bmap = squeeze(1e-9, 1.3)
        o, _ = pair_operator(bmap)
        assert np.max(np.abs(o.entries - pair_operator_spectral(bmap))) < 1e-20

    def test_cached_on_map(self, squeeze):
        bmap = squeeze(0.3)
        assert bmap.pair() is bmap.pair()


class TestProbe:
    def test_convergent(self):
        p = shale_stinespring_probe(lambda m: np.diag(1.0 / np.arange(1, m + 1)), [64, 128, 256, 512])
        assert p.verdict == "convergent"
        assert abs(p.partial_traces[-1] - math.pi**2 / 6) < 0.02

    def test_divergent(self):
        p = shale_stinespring_probe(lambda m: np.diag(np.arange(1, m + 1) ** -0.5), [8, 16, 32, 64])
        assert p.verdict == "divergent"

    def test_zero_family(self):
        p = shale_stinespring_probe(lambda m: np.zeros((m, m)), [2, 4])
        assert p.verdict == "convergent" and p.rate_estimate == float("inf")

    def test_deterministic(self):
        fam = lambda m: np.diag(1.0 / np.arange(1, m + 1))
        assert shale_stinespring_probe(fam, [8, 16, 32]) == shale_stinespring_probe(fam, [8, 16, 32])

    @pytest.mark.parametrize("sizes", [[8], [16, 8], [0, 4]])
    def test_bad_sizes(self, sizes):
        with pytest.raises(ValueError):
            shale_stinespring_probe(lambda m: np.eye(m), sizes)

    def test_shape_checked(self):
        with pytest.raises(ValueError):
            shale_stinespring_probe(lambda m: np.eye(m + 1), [2, 4])
