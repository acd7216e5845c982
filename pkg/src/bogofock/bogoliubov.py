"""Bogoliubov-transformed operators, the Bogoliubov vacuum and the implementer.

``b^dagger(phi) = a^dagger(u phi) + a(v conj(phi))`` and
``b(phi) = a^dagger(v conj(phi)) + a(u phi)``.  The vacuum has even sectors
``sqrt((2m)!)/m! * K^{(x)_S m}`` where ``K`` is the pair kernel; it is built in
the occupation basis as ``A^m Omega / m!`` with ``A = sum_jk K_jk a_j^dag a_k^dag``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fock import (
    FockVector,
    annihilate,
    create,
    from_pointwise,
    lower_matrices,
    occupations,
    raise_matrices,
    sector_dim,
    symmetrize,
    vacuum,
)
from .modes import DEFAULT_TOL, BogoliubovMap, operator_norm


def _vec(phi, m: int) -> np.ndarray:
    phi = np.asarray(phi, dtype=complex).reshape(-1)
    if phi.shape != (m,):
        raise ValueError(f"mode vector has length {phi.size}, expected {m}")
    return phi


def b_create(bmap: BogoliubovMap, phi, psi: FockVector) -> FockVector:
    phi = _vec(phi, bmap.dim)
    return create(bmap.u(phi), psi) + annihilate(bmap.v(phi.conj()), psi)


def b_annihilate(bmap: BogoliubovMap, phi, psi: FockVector) -> FockVector:
    phi = _vec(phi, bmap.dim)
    return create(bmap.v(phi.conj()), psi) + annihilate(bmap.u(phi), psi)


def _pair_creation(kernel: np.ndarray, modes: int, n: int, src: np.ndarray) -> np.ndarray:
    """``sum_jk K_jk a_j^dag a_k^dag`` from sector ``n`` to ``n + 2``."""
    up1 = raise_matrices(modes, n)
    up2 = raise_matrices(modes, n + 1)
    mid = [r @ src for r in up1]
    out = np.zeros(sector_dim(modes, n + 2), complex)
    for j in range(modes):
        acc = np.zeros(sector_dim(modes, n + 1), complex)
        for k in range(modes):
            if kernel[j, k] != 0:
                acc += kernel[j, k] * mid[k]
        out += up2[j] @ acc
    return out


def build_vacuum(bmap: BogoliubovMap, nmax: int, tol: float = DEFAULT_TOL) -> FockVector:
    """Unnormalised Bogoliubov vacuum truncated at ``nmax`` (sector 0 equals 1)."""
    _, kernel = bmap.pair(tol)
    K, M = kernel.entries, bmap.dim
    secs = [np.zeros(sector_dim(M, n), complex) for n in range(nmax + 1)]
    secs[0][0] = 1.0
    for m in range(1, nmax // 2 + 1):
        secs[2 * m] = _pair_creation(K, M, 2 * m - 2, secs[2 * m - 2]) / m
    return FockVector(M, nmax, tuple(secs), exact_upto=nmax)


def symmetric_power_sector(kernel: np.ndarray, m: int, nmax: int) -> FockVector:
    """``sqrt((2m)!)/m! * K^{(x)_S m}`` computed pointwise (slow, for checking)."""
    K = np.asarray(kernel, dtype=complex)
    M = K.shape[0]
    arr = np.ones(())
    for _ in range(m):
        arr = np.multiply.outer(arr, K)
    arr = symmetrize(arr) * math.sqrt(math.factorial(2 * m)) / math.factorial(m)
    return from_pointwise(arr, M, nmax)


def vacuum_by_recursion(bmap: BogoliubovMap, nmax: int) -> FockVector:
    """Solve ``b(e_j) Omega_V = 0`` sector by sector with sector 0 pinned to 1.

    Independent of the pair kernel: sector ``2m + 2`` is the unique solution of
    ``a(u e_j) s_{2m+2} = -a^dag(v e_j) s_{2m}`` for all ``j``.
    """
    M = bmap.dim
    u, v = bmap.u.entries, bmap.v.entries
    secs = [np.zeros(sector_dim(M, n), complex) for n in range(nmax + 1)]
    secs[0][0] = 1.0
    for n in range(0, nmax - 1, 2):
        lows = lower_matrices(M, n + 1)
        ups = raise_matrices(M, n)
        blocks, rhs = [], []
        for j in range(M):
            uj, vj = u[:, j], v[:, j]
            blocks.append(sum(np.conj(uj[i]) * lows[i] for i in range(M)))
            rhs.append(-sum(vj[i] * (ups[i] @ secs[n]) for i in range(M)))
        A = sp.vstack(blocks, format="csr")
        b = np.concatenate(rhs)
        # overdetermined but consistent: normal equations, sparse and well conditioned
        AH = A.conj().T.tocsr()
        secs[n + 2] = np.atleast_1d(spla.spsolve((AH @ A).tocsc(), AH @ b))
    return FockVector(M, nmax, tuple(secs), exact_upto=nmax)


def annihilation_residual(bmap: BogoliubovMap, omega_v: FockVector, phi, nmax: int | None = None) -> dict[int, float]:
    """Norms of the odd sectors ``n <= nmax - 1`` of ``b(phi) Omega_V``."""
    nmax = omega_v.nmax if nmax is None else nmax
    out = b_annihilate(bmap, phi, omega_v)
    top = min(nmax - 1, out.exact_sectors)
    return {n: float(np.linalg.norm(out.sectors[n])) for n in range(1, top + 1, 2)}


@dataclass(frozen=True)
class PsiVectors:
    matrix: np.ndarray
    sigma_min: float
    contraction_norm: float
    dual_path_residual: float


def psi_vectors(bmap: BogoliubovMap, tol: float = DEFAULT_TOL) -> PsiVectors:
    """Columns ``psi_j = u e_j + 2 O J v J e_j``, checked against ``(1 - 4 O J O J) u e_j``."""
    o, _ = bmap.pair(tol)
    O = o.entries
    u, v = bmap.u.entries, bmap.v.entries
    direct = u + 2.0 * O @ v.conj()
    contraction = 4.0 * O @ O.conj()
    via_contraction = (np.eye(bmap.dim) - contraction) @ u
    sv = np.linalg.svd(direct, compute_uv=False)
    return PsiVectors(
        matrix=direct,
        sigma_min=float(sv[-1]),
        contraction_norm=operator_norm(contraction),
        dual_path_residual=float(np.max(np.abs(direct - via_contraction))),
    )


def implement(bmap: BogoliubovMap, creation_list: Sequence, nmax: int, omega_v: FockVector | None = None) -> FockVector:
    """``b^dag(phi_1) ... b^dag(phi_n) Omega_V`` (``phi_n`` applied first).

    Sectors above ``result.exact_sectors`` carry truncation error.
    """
    psi = build_vacuum(bmap, nmax) if omega_v is None else omega_v
    for phi in reversed(list(creation_list)):
        psi = b_create(bmap, phi, psi)
    return psi


def _occ_to_list(occ: Sequence[int]) -> list[np.ndarray]:
    eye = np.eye(len(occ))
    return [eye[j] for j, c in enumerate(occ) for _ in range(c)]


def implement_basis_state(bmap: BogoliubovMap, occ: Sequence[int], omega_v: FockVector) -> FockVector:
    """Image of the normalised occupation state ``|n>``."""
    norm = math.sqrt(math.prod(math.factorial(c) for c in occ))
    return implement(bmap, _occ_to_list(occ), omega_v.nmax, omega_v) * (1.0 / norm)


class SingularGramError(np.linalg.LinAlgError):
    pass


class ImplementerOnSpan:
    """The implementer restricted to Fock sectors ``<= degree``.

    Images are compared on sectors ``<= nmax - degree``, where every image is
    free of truncation error.  The inverse is a least-squares solve against the
    Gram matrix of the images and refuses to proceed if that matrix is singular.
    """

    def __init__(self, bmap: BogoliubovMap, nmax: int, degree: int, cond_limit: float = 1e12):
        if degree > nmax // 2:
            raise ValueError(f"degree {degree} too large for nmax={nmax} (need degree <= nmax // 2)")
        self.bmap, self.nmax, self.degree = bmap, nmax, degree
        self.window = nmax - degree
        self.omega_v = build_vacuum(bmap, nmax)
        M = bmap.dim
        self.labels = [occ for n in range(degree + 1) for occ in occupations(M, n)]
        self.images = [implement_basis_state(bmap, occ, self.omega_v) for occ in self.labels]
        self.columns = np.column_stack([img.flat(self.window) for img in self.images])
        self.gram = self.columns.conj().T @ self.columns
        self.condition = float(np.linalg.cond(self.gram))
        if not np.isfinite(self.condition) or self.condition > cond_limit:
            raise SingularGramError(f"Gram matrix of implemented basis is singular (cond={self.condition:.3g})")

    def apply(self, psi: FockVector) -> FockVector:
        """Image of a Fock vector supported on sectors ``<= degree``."""
        if psi.top_sector() > self.degree:
            raise ValueError("vector outside the implemented span")
        out = FockVector.zeros(self.bmap.dim, self.nmax, self.omega_v.exact_upto)
        for occ, img in zip(self.labels, self.images):
            c = psi.coefficient(occ)
            if c != 0:
                out = out + c * img
        return out

    def inverse(self, target: FockVector) -> FockVector:
        """Preimage of ``target`` within the span, by a Gram-matrix solve."""
        rhs = self.columns.conj().T @ target.flat(self.window)
        coef = np.linalg.solve(self.gram, rhs)
        M = self.bmap.dim
        out = FockVector.zeros(M, self.nmax)
        for occ, c in zip(self.labels, coef):
            out = out + c * FockVector.basis(occ, self.nmax)
        return out


def gram_conditions(bmap: BogoliubovMap, nmax: int, degree: int) -> dict[int, float]:
    """Condition number of the Gram matrix of implemented basis states at each total degree."""
    omega_v = build_vacuum(bmap, nmax)
    window = nmax - degree
    out = {}
    for n in range(degree + 1):
        cols = np.column_stack(
            [implement_basis_state(bmap, occ, omega_v).flat(window) for occ in occupations(bmap.dim, n)]
        )
        out[n] = float(np.linalg.cond(cols.conj().T @ cols))
    return out


def _sector_diff(a: FockVector, b: FockVector, upto: int) -> float:
    return math.sqrt(sum(float(np.linalg.norm(x - y) ** 2) for x, y in zip(a.sectors[: upto + 1], b.sectors[: upto + 1])))


def implementation_check(bmap: BogoliubovMap, probes: Sequence[Sequence], phi, nmax: int) -> float:
    """Largest violation of both intertwining relations over the probe family.

    For each creation list ``(phi_1, ..., phi_n)``, with ``Psi`` its image:

    * ``U a^dag(phi) U^-1 Psi`` is the image of ``(phi, phi_1, ..., phi_n)``
      and is compared to ``b^dag(phi) Psi``;
    * ``U a(phi) U^-1 Psi = sum_k <phi, phi_k> U(list without phi_k)`` is
      compared to ``b(phi) Psi``.

    Only sectors free of truncation error on both sides are compared.
    """
    phi = _vec(phi, bmap.dim)
    omega_v = build_vacuum(bmap, nmax)
    worst = 0.0
    for plist in probes:
        plist = [_vec(p, bmap.dim) for p in plist]
        if len(plist) + 1 > nmax // 2:
            raise ValueError(f"creation list of length {len(plist)} too long for nmax={nmax}")
        psi = implement(bmap, plist, nmax, omega_v)

        lhs = implement(bmap, [phi] + plist, nmax, omega_v)
        rhs = b_create(bmap, phi, psi)
        upto = min(lhs.exact_sectors, rhs.exact_sectors)
        worst = max(worst, _sector_diff(lhs, rhs, upto))

        lhs = FockVector.zeros(bmap.dim, nmax, omega_v.exact_upto)
        for k, pk in enumerate(plist):
            w = np.vdot(phi, pk)
            if w != 0:
                lhs = lhs + w * implement(bmap, plist[:k] + plist[k + 1 :], nmax, omega_v)
        rhs = b_annihilate(bmap, phi, psi)
        upto = min(lhs.exact_sectors, rhs.exact_sectors)
        worst = max(worst, _sector_diff(lhs, rhs, upto))
    return worst


def b_commutator_residual(bmap: BogoliubovMap, phi, chi, probe: FockVector) -> float:
    """``([b(phi), b^dag(chi)] - <phi, chi>) probe`` and the two pure commutators, on exact sectors."""
    phi, chi = _vec(phi, bmap.dim), _vec(chi, bmap.dim)
    terms = [
        b_annihilate(bmap, phi, b_create(bmap, chi, probe))
        - b_create(bmap, chi, b_annihilate(bmap, phi, probe))
        - np.vdot(phi, chi) * probe,
        b_annihilate(bmap, phi, b_annihilate(bmap, chi, probe)) - b_annihilate(bmap, chi, b_annihilate(bmap, phi, probe)),
        b_create(bmap, phi, b_create(bmap, chi, probe)) - b_create(bmap, chi, b_create(bmap, phi, probe)),
    ]
    worst = 0.0
    for t in terms:
        upto = min(t.exact_sectors, probe.nmax - 2)
        worst = max(worst, t.norm(upto))
    return worst
