"""Quadratic bosonic Hamiltonians and their diagonalization by a Bogoliubov map.

``H = sum_jk h_jk a_j^dag a_k + 1/2 sum_jk (s k_jk a_j^dag a_k^dag + conj(k_jk) a_j a_k)``

with pairing sign ``s``.  ``s = +1`` is the self-adjoint bosonic form and the
default; ``s = -1`` is accepted by :func:`assemble_quadratic` but rejected by
:func:`diagonalize` since the operator is then not self-adjoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .bogoliubov import build_vacuum, implement
from .fock import FockVector, lower_matrices, raise_matrices, sector_dim
from .modes import BogoliubovMap, bogoliubov_residuals


class PositivityError(ValueError):
    """The block matrix ``[[h, k], [conj(k), conj(h)]]`` is not positive definite."""


@dataclass(frozen=True, eq=False)
class QuadraticSpec:
    h: np.ndarray
    k: np.ndarray
    pairing_sign: int = 1

    def __post_init__(self):
        h = np.array(self.h, dtype=complex)
        k = np.array(self.k, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape != k.shape:
            raise ValueError("h and k must be square matrices of equal size")
        if np.max(np.abs(h - h.conj().T)) > 1e-12:
            raise ValueError("h must be self-adjoint")
        if np.max(np.abs(k - k.T)) > 1e-12:
            raise ValueError("k must be symmetric")
        if self.pairing_sign not in (1, -1):
            raise ValueError("pairing_sign must be +1 or -1")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "k", k)

    @property
    def modes(self) -> int:
        return self.h.shape[0]

    def block(self) -> np.ndarray:
        return np.block([[self.h, self.k], [self.k.conj(), self.h.conj()]])


class QuadraticOperator:
    """Sparse matrix of ``H`` on Fock sectors ``0..nmax`` (concatenated)."""

    def __init__(self, matrix: sp.csr_matrix, modes: int, nmax: int, pairing: bool):
        self.matrix, self.modes, self.nmax = matrix, modes, nmax
        self.pairing = pairing
        self.offsets = np.cumsum([0] + [sector_dim(modes, n) for n in range(nmax + 1)])

    @property
    def lossy(self) -> bool:
        # pairing creation out of the two top sectors is dropped
        return self.pairing

    def apply(self, psi: FockVector) -> FockVector:
        if (psi.modes, psi.nmax) != (self.modes, self.nmax):
            raise ValueError("vector and operator live in different truncated spaces")
        out = self.matrix @ psi.flat()
        secs = tuple(out[self.offsets[n] : self.offsets[n + 1]] for n in range(self.nmax + 1))
        if psi.exact_upto is not None:
            exact = psi.exact_upto - 2 if self.pairing else psi.exact_upto
        elif self.pairing and psi.top_sector() > self.nmax - 2:
            exact = self.nmax
        else:
            exact = None
        return FockVector(self.modes, self.nmax, secs, exact)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def assemble_quadratic(spec: QuadraticSpec, nmax: int) -> QuadraticOperator:
    M = spec.modes
    h, k, s = spec.h, spec.k, spec.pairing_sign
    dims = [sector_dim(M, n) for n in range(nmax + 1)]
    blocks = [[None] * (nmax + 1) for _ in range(nmax + 1)]
    for n in range(nmax + 1):
        if n >= 1:
            R, L = raise_matrices(M, n - 1), lower_matrices(M, n - 1)
            blk = sp.csr_matrix((dims[n], dims[n]), dtype=complex)
            for j in range(M):
                for q in range(M):
                    if h[j, q] != 0:
                        blk = blk + h[j, q] * (R[j] @ L[q])
            blocks[n][n] = blk
        else:
            blocks[0][0] = sp.csr_matrix((1, 1), dtype=complex)
        if n + 2 <= nmax and np.any(k):
            R1, R2 = raise_matrices(M, n), raise_matrices(M, n + 1)
            up = sp.csr_matrix((dims[n + 2], dims[n]), dtype=complex)
            for j in range(M):
                for q in range(M):
                    if k[j, q] != 0:
                        up = up + (0.5 * s * k[j, q]) * (R2[j] @ R1[q])
            blocks[n + 2][n] = up
            L1, L2 = lower_matrices(M, n), lower_matrices(M, n + 1)
            down = sp.csr_matrix((dims[n], dims[n + 2]), dtype=complex)
            for j in range(M):
                for q in range(M):
                    if k[j, q] != 0:
                        down = down + (0.5 * np.conj(k[j, q])) * (L1[j] @ L2[q])
            blocks[n][n + 2] = down
    mat = sp.bmat(blocks, format="csr", dtype=complex)
    return QuadraticOperator(mat, M, nmax, bool(np.any(k)))


def second_quantize(E: np.ndarray, nmax: int) -> QuadraticOperator:
    """``dGamma(E) = sum_jk E_jk a_j^dag a_k``."""
    E = np.asarray(E, dtype=complex)
    return assemble_quadratic(QuadraticSpec(E, np.zeros_like(E)), nmax)


@dataclass(frozen=True, eq=False)
class DiagonalizationResult:
    map: BogoliubovMap
    E: np.ndarray
    c: float
    energies: np.ndarray

    def as_dict(self) -> dict:
        return {
            "c": self.c,
            "energies": [float(x) for x in self.energies],
            "E": _cplx_rows(self.E),
            "u": _cplx_rows(self.map.u.entries),
            "v": _cplx_rows(self.map.v.entries),
        }


def _cplx_rows(a: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(a)]


def diagonalize(spec: QuadraticSpec) -> DiagonalizationResult:
    """Bogoliubov map, one-particle operator ``E`` and constant ``c`` with
    ``H + c = sum_jk E_jk b_j^dag b_k``.

    Uses the Cholesky route on the doubled space.  The resulting ``u`` is
    rotated to its positive polar factor, so ``k = 0`` yields the identity map
    and ``E = h``.  ``c = tr(h - E) / 2``.
    """
    if spec.pairing_sign != 1:
        raise ValueError("only the self-adjoint pairing sign (+1) can be diagonalized")
    M = spec.modes
    if not np.any(spec.k):
        # no pairing: the identity map diagonalizes H exactly
        lam = np.linalg.eigvalsh(spec.h)
        if lam[0] <= 0:
            raise PositivityError("h is not positive definite")
        return DiagonalizationResult(BogoliubovMap.identity(M), spec.h.copy(), 0.0, lam)
    big = spec.block()
    try:
        chol = np.linalg.cholesky(big)
    except np.linalg.LinAlgError as exc:
        raise PositivityError("block matrix [[h, k], [conj(k), conj(h)]] is not positive definite") from exc
    K = chol.conj().T
    sigma3 = np.diag(np.r_[np.ones(M), -np.ones(M)])
    W = K @ sigma3 @ K.conj().T
    W = 0.5 * (W + W.conj().T)
    lam, vecs = np.linalg.eigh(W)
    pos = lam[M:]
    if np.any(pos <= 0) or np.any(lam[:M] >= 0):
        raise PositivityError("symplectic spectrum is not gapped")
    cols = np.linalg.solve(K, vecs[:, M:] * np.sqrt(pos))
    x1, y1 = cols[:M], cols[M:]
    u0, v0 = x1, -y1.conj()
    Q, P = sla.polar(u0, side="left")
    u = P
    v = v0 @ Q.T
    E = Q @ np.diag(pos) @ Q.conj().T
    E = 0.5 * (E + E.conj().T)
    c = 0.5 * float(np.trace(spec.h - E).real)
    return DiagonalizationResult(BogoliubovMap(u, v), E, c, pos)


def vacuum_energy_shift(spec: QuadraticSpec, result: DiagonalizationResult, nmax: int) -> float:
    """``-<Omega_V, H Omega_V> / <Omega_V, Omega_V>`` over truncation-exact sectors."""
    omega = build_vacuum(result.map, nmax)
    h_omega = assemble_quadratic(spec, nmax).apply(omega)
    upto = h_omega.exact_sectors
    num = sum(np.vdot(a, b) for a, b in zip(omega.sectors[: upto + 1], h_omega.sectors[: upto + 1]))
    den = omega.norm(upto) ** 2
    return float(-(num / den).real)


def conjugation_check(
    spec: QuadraticSpec, result: DiagonalizationResult, probe_lists: Sequence[Sequence], nmax: int
) -> float:
    """Max relative residual of ``(H + c) U Psi - U dGamma(E) Psi`` over probes.

    ``Psi = a^dag(phi_1) ... a^dag(phi_n) Omega``; ``dGamma(E) Psi`` is the sum of
    the lists with one ``phi_k`` replaced by ``E phi_k``.  Probe degree must be
    at most ``nmax - 4``.
    """
    bmap = result.map
    H = assemble_quadratic(spec, nmax)
    omega = build_vacuum(bmap, nmax)
    worst = 0.0
    for plist in probe_lists:
        plist = [np.asarray(p, dtype=complex) for p in plist]
        if len(plist) > nmax - 4:
            raise ValueError(f"probe of degree {len(plist)} exceeds nmax - 4 = {nmax - 4}")
        upsi = implement(bmap, plist, nmax, omega)
        lhs = H.apply(upsi) + result.c * upsi
        rhs = FockVector.zeros(bmap.dim, nmax, omega.exact_upto)
        for i in range(len(plist)):
            mod = plist[:i] + [result.E @ plist[i]] + plist[i + 1 :]
            rhs = rhs + implement(bmap, mod, nmax, omega)
        upto = min(lhs.exact_sectors, rhs.exact_sectors)
        diff = lhs - rhs
        scale = upsi.norm(upto)
        worst = max(worst, diff.norm(upto) / scale)
    return worst


def _random_unitary(rng: np.random.Generator, m: int) -> np.ndarray:
    z = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def generate_bogoliubov(modes: int, seed: int, strength: float = 0.5) -> BogoliubovMap:
    """Random valid Bogoliubov map with ``||v|| <= sinh(strength)``.

    ``u = W1 cosh(R) W2``, ``v = W1 sinh(R) conj(W2)`` with random unitaries and
    squeezing parameters ``R`` drawn from ``[0, strength]``.  ``W2`` is
    ``W1^*`` times a unitary whose generator scales with ``strength``, so zero
    strength gives the identity map.
    """
    if modes < 1 or strength < 0:
        raise ValueError("need modes >= 1 and strength >= 0")
    if strength == 0:
        return BogoliubovMap.identity(modes)
    rng = np.random.default_rng(seed)
    w1 = _random_unitary(rng, modes)
    r = strength * rng.uniform(0.0, 1.0, modes)
    g = rng.standard_normal((modes, modes)) + 1j * rng.standard_normal((modes, modes))
    g = 0.5 * (g + g.conj().T)
    g /= max(np.linalg.norm(g, 2), 1e-300)
    w2 = w1.conj().T @ sla.expm(1j * strength * g)
    u = w1 @ np.diag(np.cosh(r)) @ w2
    v = w1 @ np.diag(np.sinh(r)) @ w2.conj()
    bmap = BogoliubovMap(u, v)
    assert max(bogoliubov_residuals(bmap)) < 1e-10
    return bmap


def random_gated_spec(modes: int, seed: int, pairing: float = 0.4) -> QuadraticSpec:
    """Random spec whose doubled block matrix is positive definite."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((modes, modes)) + 1j * rng.standard_normal((modes, modes))
    h = a @ a.conj().T / modes + np.eye(modes)
    b = rng.standard_normal((modes, modes)) + 1j * rng.standard_normal((modes, modes))
    k = 0.5 * (b + b.T)
    lo = float(np.linalg.eigvalsh(h)[0])
    k *= pairing * lo / max(np.linalg.norm(k, 2), 1e-300)
    return QuadraticSpec(h, k)
