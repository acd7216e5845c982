"""Truncated bosonic Fock space in the occupation-number basis.

Sector ``N`` of a :class:`FockVector` holds coefficients over the occupation
vectors ``n = (n_1, ..., n_M)`` with ``sum(n) = N``, enumerated in ascending
lexicographic order.  Pointwise (tuple-indexed) sectors are available through
:func:`to_pointwise` / :func:`from_pointwise`; a basis state ``|n>`` takes the
value ``sqrt(prod(n_i!) / N!)`` at every tuple compatible with ``n``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

POINTWISE_CAP = 10**6


@lru_cache(maxsize=None)
def occupations(modes: int, n: int) -> tuple[tuple[int, ...], ...]:
    """All occupation vectors of ``modes`` modes with total ``n``, lexicographic."""
    if modes < 1:
        raise ValueError("modes must be >= 1")
    if n < 0:
        return ()
    if modes == 1:
        return ((n,),)
    out = []
    for first in range(n + 1):
        for rest in occupations(modes - 1, n - first):
            out.append((first,) + rest)
    return tuple(out)


@lru_cache(maxsize=None)
def _index(modes: int, n: int) -> dict:
    return {occ: i for i, occ in enumerate(occupations(modes, n))}


def sector_dim(modes: int, n: int) -> int:
    return math.comb(n + modes - 1, modes - 1)


@lru_cache(maxsize=None)
def raise_matrices(modes: int, n: int) -> tuple[sp.csr_matrix, ...]:
    """``a_j^dagger`` from sector ``n`` to ``n + 1`` for each mode ``j``."""
    src = occupations(modes, n)
    dst = _index(modes, n + 1)
    mats = []
    for j in range(modes):
        rows, cols, vals = [], [], []
        for c, occ in enumerate(src):
            tgt = occ[:j] + (occ[j] + 1,) + occ[j + 1 :]
            rows.append(dst[tgt])
            cols.append(c)
            vals.append(math.sqrt(occ[j] + 1))
        m = sp.csr_matrix((vals, (rows, cols)), shape=(len(dst), len(src)), dtype=complex)
        mats.append(m)
    return tuple(mats)


@lru_cache(maxsize=None)
def lower_matrices(modes: int, n: int) -> tuple[sp.csr_matrix, ...]:
    """``a_j`` from sector ``n + 1`` to ``n``."""
    return tuple(m.T.tocsr() for m in raise_matrices(modes, n))


@dataclass(frozen=True, eq=False)
class FockVector:
    """Vector in the truncated bosonic Fock space.

    ``exact_upto`` tracks truncation: ``None`` means the vector is complete
    (nothing lives above ``nmax``); an integer ``e`` means sectors ``<= e``
    agree with the untruncated vector while higher sectors may be missing
    contributions.
    """

    modes: int
    nmax: int
    sectors: tuple
    exact_upto: int | None = None

    def __post_init__(self):
        if self.modes < 1 or self.nmax < 0:
            raise ValueError("need modes >= 1 and nmax >= 0")
        if len(self.sectors) != self.nmax + 1:
            raise ValueError(f"expected {self.nmax + 1} sectors, got {len(self.sectors)}")
        secs = []
        for n, s in enumerate(self.sectors):
            a = np.array(s, dtype=complex).reshape(-1)
            if a.shape != (sector_dim(self.modes, n),):
                raise ValueError(f"sector {n} has {a.size} entries, expected {sector_dim(self.modes, n)}")
            a.setflags(write=False)
            secs.append(a)
        object.__setattr__(self, "sectors", tuple(secs))

    @classmethod
    def zeros(cls, modes: int, nmax: int, exact_upto: int | None = None) -> "FockVector":
        return cls(modes, nmax, tuple(np.zeros(sector_dim(modes, n), complex) for n in range(nmax + 1)), exact_upto)

    @classmethod
    def basis(cls, occ: Sequence[int], nmax: int) -> "FockVector":
        occ = tuple(int(x) for x in occ)
        n = sum(occ)
        if n > nmax:
            raise ValueError(f"occupation {occ} exceeds nmax={nmax}")
        secs = [np.zeros(sector_dim(len(occ), k), complex) for k in range(nmax + 1)]
        secs[n][_index(len(occ), n)[occ]] = 1.0
        return cls(len(occ), nmax, tuple(secs))

    @property
    def lossy(self) -> bool:
        return self.exact_upto is not None

    @property
    def exact_sectors(self) -> int:
        """Highest sector index that can be trusted."""
        return self.nmax if self.exact_upto is None else min(self.exact_upto, self.nmax)

    def coefficient(self, occ: Sequence[int]) -> complex:
        occ = tuple(occ)
        n = sum(occ)
        if n > self.nmax:
            return 0j
        return complex(self.sectors[n][_index(self.modes, n)[occ]])

    def top_sector(self) -> int:
        """Highest sector with a nonzero coefficient (-1 for the zero vector)."""
        for n in range(self.nmax, -1, -1):
            if np.any(self.sectors[n] != 0):
                return n
        return -1

    def norm(self, upto: int | None = None) -> float:
        upto = self.nmax if upto is None else upto
        return math.sqrt(sum(float(np.vdot(s, s).real) for s in self.sectors[: upto + 1]))

    def sector_norms(self) -> list[float]:
        return [float(np.linalg.norm(s)) for s in self.sectors]

    def flat(self, upto: int | None = None) -> np.ndarray:
        upto = self.nmax if upto is None else upto
        return np.concatenate(self.sectors[: upto + 1])

    def _check(self, other: "FockVector"):
        if (self.modes, self.nmax) != (other.modes, other.nmax):
            raise ValueError("Fock vectors live in different truncated spaces")

    def __add__(self, other: "FockVector") -> "FockVector":
        self._check(other)
        return FockVector(
            self.modes,
            self.nmax,
            tuple(a + b for a, b in zip(self.sectors, other.sectors)),
            _min_exact(self.exact_upto, other.exact_upto),
        )

    def __neg__(self) -> "FockVector":
        return FockVector(self.modes, self.nmax, tuple(-a for a in self.sectors), self.exact_upto)

    def __sub__(self, other: "FockVector") -> "FockVector":
        return self + (-other)

    def __mul__(self, c: complex) -> "FockVector":
        return FockVector(self.modes, self.nmax, tuple(c * a for a in self.sectors), self.exact_upto)

    __rmul__ = __mul__

    def __repr__(self):
        return f"FockVector(modes={self.modes}, nmax={self.nmax}, norm={self.norm():.6g}, exact_upto={self.exact_upto})"


def _min_exact(a: int | None, b: int | None) -> int | None:
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


def vacuum(modes: int, nmax: int) -> FockVector:
    secs = [np.zeros(sector_dim(modes, n), complex) for n in range(nmax + 1)]
    secs[0][0] = 1.0
    return FockVector(modes, nmax, tuple(secs))


def _vec(phi, modes: int) -> np.ndarray:
    phi = np.asarray(phi, dtype=complex).reshape(-1)
    if phi.shape != (modes,):
        raise ValueError(f"mode vector has length {phi.size}, expected {modes}")
    return phi


def create(phi, psi: FockVector) -> FockVector:
    """``a^dagger(phi) psi``; content pushed above ``nmax`` is dropped."""
    phi = _vec(phi, psi.modes)
    M, top = psi.modes, psi.nmax
    secs = [np.zeros(1, complex)]
    for n in range(top):
        acc = np.zeros(sector_dim(M, n + 1), complex)
        src = psi.sectors[n]
        if np.any(src):
            for j, r in enumerate(raise_matrices(M, n)):
                if phi[j] != 0:
                    acc += phi[j] * (r @ src)
        secs.append(acc)
    exact = None if psi.exact_upto is None else min(psi.exact_upto + 1, top)
    if exact is None and np.any(psi.sectors[top]) and np.any(phi):
        exact = top
    return FockVector(M, top, tuple(secs), exact)


def annihilate(phi, psi: FockVector) -> FockVector:
    """``a(phi) psi = sum_j conj(phi_j) a_j psi``."""
    phi = _vec(phi, psi.modes)
    M, top = psi.modes, psi.nmax
    secs = []
    for n in range(top):
        acc = np.zeros(sector_dim(M, n), complex)
        src = psi.sectors[n + 1]
        if np.any(src):
            for j, low in enumerate(lower_matrices(M, n)):
                if phi[j] != 0:
                    acc += np.conj(phi[j]) * (low @ src)
        secs.append(acc)
    secs.append(np.zeros(sector_dim(M, top), complex))
    exact = None if psi.exact_upto is None else psi.exact_upto - 1
    return FockVector(M, top, tuple(secs), exact)


def inner(psi: FockVector, phi: FockVector, upto: int | None = None) -> complex:
    """``<psi, phi>``, antilinear in the first argument."""
    psi._check(phi)
    upto = psi.nmax if upto is None else upto
    return complex(sum(np.vdot(a, b) for a, b in zip(psi.sectors[: upto + 1], phi.sectors[: upto + 1])))


def number_operator(psi: FockVector) -> FockVector:
    out = FockVector.zeros(psi.modes, psi.nmax, psi.exact_upto)
    eye = np.eye(psi.modes)
    for j in range(psi.modes):
        out = out + create(eye[j], annihilate(eye[j], psi))
    return out


def symmetrize(values: np.ndarray) -> np.ndarray:
    """Average over all permutations of the tuple indices."""
    values = np.asarray(values)
    n = values.ndim
    if n < 2:
        return values.copy()
    acc = np.zeros(values.shape, dtype=np.result_type(values, float))
    perms = list(itertools.permutations(range(n)))
    for p in perms:
        acc += np.transpose(values, p)
    return acc / len(perms)


def _pointwise_layout(modes: int, n: int):
    """For every tuple in ``range(modes)**n``: sector index and basis weight."""
    if modes**n > POINTWISE_CAP:
        raise ValueError(f"pointwise array of size {modes}^{n} exceeds cap {POINTWISE_CAP}")
    if n == 0:
        return np.zeros(1, int), np.ones(1)
    grid = np.indices((modes,) * n).reshape(n, -1).T
    counts = np.zeros((grid.shape[0], modes), int)
    for slot in range(n):
        counts[np.arange(grid.shape[0]), grid[:, slot]] += 1
    uniq, inv = np.unique(counts, axis=0, return_inverse=True)
    idx = _index(modes, n)
    uniq_idx = np.array([idx[tuple(int(x) for x in row)] for row in uniq])
    uniq_w = np.array([math.sqrt(math.prod(math.factorial(int(x)) for x in row) / math.factorial(n)) for row in uniq])
    inv = inv.reshape(-1)
    return uniq_idx[inv], uniq_w[inv]


def to_pointwise(psi: FockVector, n: int) -> np.ndarray:
    """Sector ``n`` as a symmetric array of shape ``(M,) * n``."""
    if not 0 <= n <= psi.nmax:
        raise ValueError(f"sector {n} outside 0..{psi.nmax}")
    where, weight = _pointwise_layout(psi.modes, n)
    vals = psi.sectors[n][where] * weight
    return vals.reshape((psi.modes,) * n)


def from_pointwise(values: np.ndarray, modes: int, nmax: int) -> FockVector:
    """Fock vector whose only sector is the (symmetrized) pointwise array ``values``."""
    values = np.asarray(values, dtype=complex)
    n = values.ndim
    if n > nmax:
        raise ValueError(f"sector {n} exceeds nmax={nmax}")
    if any(d != modes for d in values.shape):
        raise ValueError(f"pointwise array shape {values.shape} incompatible with {modes} modes")
    sym = symmetrize(values)
    secs = [np.zeros(sector_dim(modes, k), complex) for k in range(nmax + 1)]
    for i, occ in enumerate(occupations(modes, n)):
        tup = tuple(j for j, c in enumerate(occ) for _ in range(c))
        secs[n][i] = sym[tup] * math.sqrt(math.factorial(n) / math.prod(math.factorial(c) for c in occ))
    return FockVector(modes, nmax, tuple(secs))


def commutator_residuals(phi, chi, probe: FockVector) -> tuple[float, float, float]:
    """Norms of ``([a(phi), a^dag(chi)] - <phi, chi>) probe``, ``[a, a] probe``, ``[a^dag, a^dag] probe``."""
    phi = _vec(phi, probe.modes)
    chi = _vec(chi, probe.modes)
    mixed = annihilate(phi, create(chi, probe)) - create(chi, annihilate(phi, probe)) - np.vdot(phi, chi) * probe
    ann = annihilate(phi, annihilate(chi, probe)) - annihilate(chi, annihilate(phi, probe))
    cre = create(phi, create(chi, probe)) - create(chi, create(phi, probe))
    return mixed.norm(), ann.norm(), cre.norm()


def ccr_residual(phi, chi, probes: Iterable[FockVector]) -> float:
    """Largest CCR violation over the probe states.

    Each probe must be complete and occupy sectors ``<= nmax - 2`` so that no
    commutator term is truncated.
    """
    worst = 0.0
    for p in probes:
        if p.lossy:
            raise ValueError("CCR probe must be a complete (non-truncated) vector")
        if p.top_sector() > p.nmax - 2:
            raise ValueError(f"CCR probe occupies sector {p.top_sector()} > nmax - 2 = {p.nmax - 2}")
        worst = max(worst, *commutator_residuals(phi, chi, p))
    return worst


def basis_states(modes: int, nmax: int, upto: int) -> list[FockVector]:
    """All occupation basis vectors in sectors ``0..upto``."""
    return [FockVector.basis(occ, nmax) for n in range(upto + 1) for occ in occupations(modes, n)]
