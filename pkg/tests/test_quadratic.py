import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bogofock.fock import FockVector, number_operator, vacuum
from bogofock.modes import bogoliubov_residuals, operator_norm, pair_operator
from bogofock.quadratic import (
    PositivityError,
    QuadraticSpec,
    assemble_quadratic,
    conjugation_check,
    diagonalize,
    generate_bogoliubov,
    random_gated_spec,
    second_quantize,
    vacuum_energy_shift,
)

from oracles import dense_quadratic


def unit_lists(modes, degree):
    eye = np.eye(modes)
    out = [[]]
    for d in range(1, degree + 1):
        out.append([eye[j % modes] for j in range(d)])
    return out


class TestSpec:
    def test_rejects_non_hermitian_h(self):
        with pytest.raises(ValueError, match="self-adjoint"):
            QuadraticSpec([[1, 1j], [1j, 1]], np.zeros((2, 2)))

    def test_rejects_non_symmetric_k(self):
        with pytest.raises(ValueError, match="symmetric"):
            QuadraticSpec(np.eye(2), [[0, 1], [0, 0]])

    def test_rejects_bad_sign(self):
        with pytest.raises(ValueError):
            QuadraticSpec([[1]], [[0]], pairing_sign=0)


class TestAssemble:
    def test_number_operator(self):
        H = assemble_quadratic(QuadraticSpec([[2.0]], [[0.0]]), 5).toarray()
        assert np.allclose(H, np.diag(2.0 * np.arange(6)))
        assert not assemble_quadratic(QuadraticSpec([[2.0]], [[0.0]]), 5).lossy

    def test_zero(self):
        H = assemble_quadratic(QuadraticSpec(np.zeros((2, 2)), np.zeros((2, 2))), 4)
        assert H.matrix.nnz == 0 or np.all(H.toarray() == 0)

    def test_pair_matrix_element(self):
        # <2| (kappa/2) a^dag a^dag |0> = kappa / sqrt(2)
        H = assemble_quadratic(QuadraticSpec([[1.0]], [[0.3]]), 4).toarray()
        assert H[2, 0] == pytest.approx(0.3 / math.sqrt(2))
        assert H[0, 2] == pytest.approx(0.3 / math.sqrt(2))

    @pytest.mark.parametrize("modes,nmax,sign", [(1, 6, 1), (2, 4, 1), (3, 3, 1), (2, 4, -1)])
    def test_dense_oracle(self, modes, nmax, sign):
        spec = random_gated_spec(modes, modes + nmax)
        spec = QuadraticSpec(spec.h, spec.k, sign)
        H = assemble_quadratic(spec, nmax).toarray()
        assert np.allclose(H, dense_quadratic(spec.h, spec.k, nmax, sign), atol=1e-13)

    def test_hermitian_for_bosonic_sign(self):
        H = assemble_quadratic(random_gated_spec(2, 0), 5).toarray()
        assert np.allclose(H, H.conj().T)

    def test_sector_structure(self):
        H = assemble_quadratic(random_gated_spec(2, 1), 5)
        psi = FockVector.basis((1, 1), 5)
        out = H.apply(psi)
        assert {n for n, s in enumerate(out.sectors) if np.any(s)} <= {0, 2, 4}

    def test_apply_tracks_truncation(self):
        H = assemble_quadratic(QuadraticSpec([[1.0]], [[0.3]]), 4)
        assert H.apply(FockVector.basis((1,), 4)).exact_upto is None
        assert H.apply(FockVector.basis((3,), 4)).exact_upto == 4


class TestSecondQuantize:
    def test_commutes_with_number(self, rng):
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        E = a + a.conj().T
        dG = second_quantize(E, 4)
        psi = FockVector(3, 4, tuple(rng.normal(size=len(s)) for s in vacuum(3, 4).sectors))
        lhs = dG.apply(number_operator(psi))
        rhs = number_operator(dG.apply(psi))
        assert (lhs - rhs).norm(3) < 1e-12

    def test_vacuum_expectation_zero(self):
        dG = second_quantize(np.diag([1.0, 2.0]), 3)
        assert dG.apply(vacuum(2, 3)).norm() == 0

    def test_one_particle_action(self):
        E = np.array([[1.0, 2.0], [2.0, 3.0]])
        out = second_quantize(E, 2).apply(FockVector.basis((0, 1), 2))
        # a^dag(e_2)|0> -> a^dag(E e_2)|0>, occupation order is (0,1), (1,0)
        assert np.allclose(out.sectors[1], [3.0, 2.0])


class TestDiagonalize:
    def test_no_pairing(self):
        h = np.array([[1.0, 0.2j], [-0.2j, 2.0]])
        res = diagonalize(QuadraticSpec(h, np.zeros((2, 2))))
        assert np.array_equal(res.map.u.entries, np.eye(2))
        assert not np.any(res.map.v.entries)
        assert np.array_equal(res.E, h)
        assert res.c == 0.0
        spec = QuadraticSpec(h, np.zeros((2, 2)))
        assert conjugation_check(spec, res, unit_lists(2, 3), 8) < 1e-15

    def test_pairing_path_reduces_to_identity(self):
        # tiny pairing goes through the symplectic route and lands next to the identity
        h = np.array([[1.0, 0.2j], [-0.2j, 2.0]])
        res = diagonalize(QuadraticSpec(h, 1e-300 * np.eye(2)))
        assert np.allclose(res.map.u.entries, np.eye(2), atol=1e-14)
        assert np.allclose(res.E, h, atol=1e-14)

    def test_single_mode(self):
        omega, kappa = 1.0, 0.3
        spec = QuadraticSpec([[omega]], [[kappa]])
        res = diagonalize(spec)
        assert abs(res.E[0, 0] - math.sqrt(omega**2 - kappa**2)) < 1e-10
        assert abs(res.c - 0.5 * (omega - math.sqrt(omega**2 - kappa**2))) < 1e-12
        assert conjugation_check(spec, res, unit_lists(1, 4), 14) < 1e-8

    def test_single_mode_truncation_sweep(self):
        spec = QuadraticSpec([[1.0]], [[0.3]])
        res = diagonalize(spec)
        residuals = [conjugation_check(spec, res, unit_lists(1, 2), n) for n in range(6, 15)]
        assert max(residuals) < 1e-12

    def test_frozen_single_mode(self):
        res = diagonalize(QuadraticSpec([[1.0]], [[0.3]]))
        # sqrt(0.91) and (1 - sqrt(0.91))/2
        assert res.E[0, 0].real == pytest.approx(0.9539392014169456, abs=1e-15)
        assert res.c == pytest.approx(0.02303039929152719, abs=1e-15)

    @pytest.mark.parametrize("seed", range(5))
    def test_random_two_mode(self, seed):
        spec = random_gated_spec(2, seed)
        res = diagonalize(spec)
        assert max(bogoliubov_residuals(res.map)) < 1e-10
        assert np.allclose(res.E, res.E.conj().T)
        assert np.all(np.linalg.eigvalsh(res.E) > 0)
        assert conjugation_check(spec, res, unit_lists(2, 2) + [[np.eye(2)[1]]], 10) < 1e-6
        assert abs(res.c - vacuum_energy_shift(spec, res, 10)) < 1e-10

    def test_positivity_gate(self):
        with pytest.raises(PositivityError):
            diagonalize(QuadraticSpec([[1.0]], [[1.0]]))
        with pytest.raises(PositivityError):
            diagonalize(QuadraticSpec([[1.0]], [[1.5]]))

    def test_non_hermitian_sign_refused(self):
        with pytest.raises(ValueError, match="self-adjoint"):
            diagonalize(QuadraticSpec([[1.0]], [[0.3]], pairing_sign=-1))

    def test_probe_guard(self):
        spec = QuadraticSpec([[1.0]], [[0.3]])
        with pytest.raises(ValueError):
            conjugation_check(spec, diagonalize(spec), unit_lists(1, 3), 6)

    def test_wrong_result_detected(self):
        spec = QuadraticSpec([[1.0]], [[0.3]])
        res = diagonalize(spec)
        from dataclasses import replace

        bad = replace(res, c=res.c + 0.01)
        assert conjugation_check(spec, bad, unit_lists(1, 2), 10) > 1e-3


class TestGenerator:
    def test_strength_zero(self):
        bmap = generate_bogoliubov(3, 7, 0.0)
        assert np.array_equal(bmap.u.entries, np.eye(3)) and not np.any(bmap.v.entries)

    def test_deterministic(self):
        a, b = generate_bogoliubov(4, 42, 0.9), generate_bogoliubov(4, 42, 0.9)
        assert np.array_equal(a.u.entries, b.u.entries) and np.array_equal(a.v.entries, b.v.entries)

    def test_seeds_differ(self):
        assert not np.allclose(generate_bogoliubov(2, 1).u.entries, generate_bogoliubov(2, 2).u.entries)

    @given(st.integers(1, 5), st.integers(0, 10_000), st.floats(0.0, 1.5))
    def test_invariants(self, modes, seed, strength):
        bmap = generate_bogoliubov(modes, seed, strength)
        assert max(bogoliubov_residuals(bmap)) < 1e-10
        assert operator_norm(bmap.v) <= math.sinh(strength) + 1e-12
        o, kernel = pair_operator(bmap)
        assert kernel.symmetry_residual() < 1e-10
        assert operator_norm(o) < 0.5

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            generate_bogoliubov(0, 1)
        with pytest.raises(ValueError):
            generate_bogoliubov(2, 1, -0.1)
