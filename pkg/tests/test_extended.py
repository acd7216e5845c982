import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bogofock.extended import (
    EXECUTE_ALL,
    EXECUTE_MARKED,
    ExtendedVector,
    Ren1Element,
    canonicalize,
    embed_fock,
    ext_annihilate,
    ext_commutator_check,
    ext_create,
    ext_equal,
    ext_tensor,
    ren1_equal,
    scalar_sum,
    single,
)
from bogofock.fock import FockVector, annihilate, basis_states, create, sector_dim


def random_extended(rng, modes, bound, max_degree, summable=False):
    ents, flags = {}, {}
    for n in range(max_degree + 1):
        for l in range(max_degree + 1 - n):
            if rng.random() < 0.6:
                shape = (modes,) * (n + l)
                ents[(n, l)] = rng.normal(size=shape) + 1j * rng.normal(size=shape)
                flags[(n, l)] = summable and bool(rng.random() < 0.5)
    return ExtendedVector(modes, bound, ents, flags)


def equivalent_copy(rng, v):
    """Apply random ideal moves: permute trailing axes, execute one trailing sum, split entries."""
    ents, flags = {}, {}

    def put(key, arr, flag):
        if key in ents:
            ents[key] = ents[key] + arr
            flags[key] = flags[key] and flag
        else:
            ents[key], flags[key] = arr, flag

    for (n, l), arr in v.entries.items():
        flag = v.summable[(n, l)]
        move = rng.integers(3) if l > 0 else 2
        if move == 0:
            perm = list(range(n)) + list(n + rng.permutation(l))
            put((n, l), np.transpose(arr, perm), flag)
        elif move == 1:
            put((n, l - 1), arr.sum(axis=n + int(rng.integers(l))), flag)
        else:
            part = rng.normal(size=arr.shape)
            put((n, l), arr - part, flag)
            put((n, l), part, flag)
    return ExtendedVector(v.modes, v.bound, ents, flags)


class TestCanonicalize:
    @given(st.integers(1, 3), st.integers(0, 10_000), st.sampled_from([EXECUTE_ALL, EXECUTE_MARKED]))
    def test_idempotent(self, modes, seed, policy):
        rng = np.random.default_rng(seed)
        v = random_extended(rng, modes, 4, 4, summable=True)
        once = canonicalize(v, policy)
        twice = canonicalize(once, policy)
        assert once.degrees() == twice.degrees()
        assert all(np.allclose(once.get(*k), twice.get(*k), atol=1e-13) for k in once.degrees())

    def test_execute_all_removes_trailing(self, rng):
        v = random_extended(rng, 2, 4, 4)
        assert all(l == 0 for _, l in canonicalize(v).degrees())

    def test_marked_keeps_unmarked_sums(self):
        arr = np.arange(4.0).reshape(2, 2)
        v = single(2, 3, 0, 2, arr, summable=False)
        out = canonicalize(v, EXECUTE_MARKED)
        assert out.degrees() == [(0, 2)]
        assert np.allclose(out.get(0, 2), 0.5 * (arr + arr.T))
        marked = canonicalize(single(2, 3, 0, 2, arr, summable=True), EXECUTE_MARKED)
        assert marked.degrees() == [(0, 0)] and marked.get(0, 0) == pytest.approx(6.0)

    def test_zero_entries_dropped(self):
        v = single(2, 2, 0, 1, np.array([1.0, -1.0]))
        assert canonicalize(v).degrees() == []

    def test_unknown_policy(self, rng):
        with pytest.raises(ValueError):
            canonicalize(random_extended(rng, 1, 2, 2), "sometimes")


class TestIdealCompatibility:
    def test_randomized_pairs(self):
        phi_rng = np.random.default_rng(7)
        for case in range(100):
            rng = np.random.default_rng(case)
            modes = int(rng.integers(1, 4))
            v = random_extended(rng, modes, 5, 3)
            w = equivalent_copy(rng, v)
            assert ext_equal(v, w)
            phi = phi_rng.normal(size=modes) + 1j * phi_rng.normal(size=modes)
            assert ext_equal(ext_create(phi, v), ext_create(phi, w))
            assert ext_equal(ext_annihilate(phi, v), ext_annihilate(phi, w))

    def test_inequivalent_detected(self, rng):
        v = random_extended(rng, 2, 4, 3)
        w = v + single(2, 4, 1, 0, np.array([1e-6, 0]))
        assert not ext_equal(v, w)


class TestFockOracle:
    """Extended operators on embedded Fock vectors agree with the Fock-space ones."""

    @pytest.mark.parametrize("modes,nmax", [(m, n) for m in (1, 2, 3) for n in (1, 2, 3)])
    def test_exhaustive(self, modes, nmax):
        bound = nmax + 1
        vectors = [FockVector.basis(o, bound) for o in _occs(modes, nmax)]
        phis = list(np.eye(modes)) + [np.linspace(0.5, 1.5, modes) * np.exp(0.7j * np.arange(modes))]
        for psi in vectors:
            e = embed_fock(psi, bound)
            for phi in phis:
                assert ext_equal(ext_create(phi, e), embed_fock(create(phi, psi), bound))
                assert ext_equal(ext_annihilate(phi, e), embed_fock(annihilate(phi, psi), bound))

    def test_embedding_linear(self, rng):
        a = FockVector(2, 3, tuple(rng.normal(size=sector_dim(2, n)) for n in range(4)))
        b = FockVector(2, 3, tuple(rng.normal(size=sector_dim(2, n)) for n in range(4)))
        assert ext_equal(embed_fock(a + 2.0 * b), embed_fock(a) + 2.0 * embed_fock(b))


def _occs(modes, nmax):
    return [o for o in itertools.product(range(nmax + 1), repeat=modes) if sum(o) <= nmax]


class TestExtendedCCR:
    @pytest.mark.parametrize("modes", [1, 2, 3])
    @pytest.mark.parametrize("kmax", [2, 3])
    def test_basis_probes(self, rng, modes, kmax):
        probes = [embed_fock(p, kmax) for p in basis_states(modes, kmax, kmax - 2)]
        probes.append(random_extended(rng, modes, kmax, kmax - 2))
        for p in probes:
            phi = rng.normal(size=modes) + 1j * rng.normal(size=modes)
            chi = rng.normal(size=modes) + 1j * rng.normal(size=modes)
            assert max(ext_commutator_check(phi, chi, p)) < 1e-12

    def test_guard(self):
        with pytest.raises(ValueError):
            ext_commutator_check([1.0], [1.0], single(1, 2, 1, 0, np.ones(1)))

    def test_dsl_vector_argument(self):
        v = single(3, 3, 0, 0, np.ones(()))
        out = ext_create("recip(j)", v)
        assert np.allclose(out.get(1, 0), [1, 0.5, 1 / 3])


class TestTensor:
    def test_axis_order(self):
        a = single(2, 4, 1, 1, np.arange(4.0).reshape(2, 2))
        b = single(2, 4, 1, 1, 10 + np.arange(4.0).reshape(2, 2))
        t = ext_tensor(a, b).get(2, 2)
        # axes: free of a, free of b, trailing of a, trailing of b
        for x1, x2, s1, s2 in itertools.product(range(2), repeat=4):
            assert t[x1, x2, s1, s2] == a.get(1, 1)[x1, s1] * b.get(1, 1)[x2, s2]

    def test_bound_overflow_lossy(self):
        a = single(1, 2, 2, 0, np.ones((1, 1)))
        assert ext_tensor(a, a).lossy

    def test_scalar_sum_executes(self):
        s = scalar_sum([1.0, 2.0, 3.0], 3, 2)
        assert canonicalize(s).get(0, 0) == pytest.approx(6.0)


class TestRen1:
    def test_finite_exhaustive(self):
        values = range(-2, 3)
        count = 0
        for size in range(1, 5):
            for d in itertools.product(values, repeat=size):
                verdict = ren1_equal(Ren1Element.finite(d), Ren1Element.finite([0]))
                assert verdict is (sum(d) == 0)
                count += 1
        assert count == 5 + 25 + 125 + 625

    def test_finite_pairs(self):
        a = Ren1Element.finite([1, 2, -1])
        assert ren1_equal(a, Ren1Element.finite([2, 0])) is True
        assert ren1_equal(a, Ren1Element.finite([2, 1])) is False

    @pytest.mark.parametrize(
        "a,b,expected",
        [
            ("recip(j) - recip(j+1)", [1], True),
            ("1/j - 1/(j+1)", [1], True),
            ("1/j^2 - 1/(j+1)^2", [1], True),
            ("0.5^j", [1], True),
            ("2*0.5^(j+1)", [1], True),
            ("0.25^j", [1], False),
            ("delta(j,3)*recip(j)", [0, 0, 1 / 3], True),
            ("delta(j,2)", [1], True),
        ],
    )
    def test_recognised_formulas(self, a, b, expected):
        assert ren1_equal(Ren1Element.formula(a), Ren1Element.finite(b)) is expected

    def test_divergent_sequences_cancel_syntactically(self):
        assert ren1_equal(Ren1Element.formula("1/j"), Ren1Element.formula("1/j")) is True
        x = Ren1Element.formula("1/j + 0.5^j")
        assert ren1_equal(x, Ren1Element.formula("1/j")) is False

    @pytest.mark.parametrize("expr", ["1/j", "1/sqrt(j)", "sinh(j)/exp(j)"])
    def test_undecidable(self, expr):
        assert ren1_equal(Ren1Element.formula(expr), Ren1Element.finite([0])) is None

    def test_parameters(self):
        a = Ren1Element.formula("q^j", q=0.5)
        assert ren1_equal(a, Ren1Element.finite([1])) is True

    def test_to_extended(self):
        e = Ren1Element.formula("1/j").to_extended(4, 2)
        assert canonicalize(e).get(0, 0) == pytest.approx(1 + 1 / 2 + 1 / 3 + 1 / 4)

    def test_needs_exactly_one_source(self):
        with pytest.raises(ValueError):
            Ren1Element()
