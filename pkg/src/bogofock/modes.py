"""Linear and antilinear operators on the truncated one-particle space.

A mode operator is an ``M x M`` complex matrix together with a flag saying
whether it acts linearly (``phi -> A phi``) or antilinearly
(``phi -> A conj(phi)``).  Bogoliubov maps ``(u, v)`` and the derived pair
operator live here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

DEFAULT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ModeOperator:
    entries: np.ndarray
    antilinear: bool = False

    def __post_init__(self):
        a = np.array(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"mode operator must be a square M x M matrix, got shape {a.shape}")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __call__(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=complex)
        if self.antilinear:
            phi = phi.conj()
        return self.entries @ phi

    def __matmul__(self, other: "ModeOperator") -> "ModeOperator":
        # (A o B) phi = A(B phi); an antilinear left factor conjugates B's matrix
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        right = other.entries.conj() if self.antilinear else other.entries
        return ModeOperator(self.entries @ right, self.antilinear != other.antilinear)

    def __add__(self, other: "ModeOperator") -> "ModeOperator":
        if self.antilinear != other.antilinear:
            raise ValueError("cannot add a linear and an antilinear operator")
        return ModeOperator(self.entries + other.entries, self.antilinear)

    def __sub__(self, other: "ModeOperator") -> "ModeOperator":
        return self + other.scale(-1.0)

    def scale(self, c: complex) -> "ModeOperator":
        """Left multiplication by a scalar, ``phi -> c * (A phi)``."""
        return ModeOperator(c * self.entries, self.antilinear)

    @property
    def T(self) -> "ModeOperator":
        return ModeOperator(self.entries.T, self.antilinear)

    @property
    def H(self) -> "ModeOperator":
        # adjoint of phi -> A conj(phi) is phi -> A^T conj(phi)
        if self.antilinear:
            return ModeOperator(self.entries.T, True)
        return ModeOperator(self.entries.conj().T)

    @property
    def bar(self) -> "ModeOperator":
        """Entrywise conjugate, i.e. ``J A J``."""
        return ModeOperator(self.entries.conj(), self.antilinear)

    @classmethod
    def identity(cls, dim: int) -> "ModeOperator":
        return cls(np.eye(dim))

    def __repr__(self):
        kind = "antilinear" if self.antilinear else "linear"
        return f"ModeOperator(dim={self.dim}, {kind})"


def conjugation_J(dim: int) -> ModeOperator:
    """Complex conjugation on C^dim as an antilinear operator."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return ModeOperator(np.eye(dim), antilinear=True)


def operator_norm(op) -> float:
    """Largest singular value; antilinearity does not change it."""
    a = op.entries if isinstance(op, ModeOperator) else np.asarray(op)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def _max_abs(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


@dataclass(frozen=True)
class PairKernel:
    entries: np.ndarray

    def symmetry_residual(self) -> float:
        return _max_abs(self.entries - self.entries.T)

    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.entries))


@dataclass(frozen=True, eq=False)
class BogoliubovMap:
    """The pair ``(u, v)`` defining ``b^dagger(phi) = a^dagger(u phi) + a(v conj(phi))``."""

    u: ModeOperator
    v: ModeOperator
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        u, v = self.u, self.v
        if not isinstance(u, ModeOperator):
            object.__setattr__(self, "u", ModeOperator(u))
        if not isinstance(v, ModeOperator):
            object.__setattr__(self, "v", ModeOperator(v))
        if self.u.antilinear or self.v.antilinear:
            raise ValueError("u and v must be linear")
        if self.u.dim != self.v.dim:
            raise ValueError(f"dimension mismatch: u is {self.u.dim}, v is {self.v.dim}")

    @property
    def dim(self) -> int:
        return self.u.dim

    @classmethod
    def identity(cls, dim: int) -> "BogoliubovMap":
        return cls(np.eye(dim), np.zeros((dim, dim)))

    def block_matrix(self) -> np.ndarray:
        u, v = self.u.entries, self.v.entries
        return np.block([[u, v], [v.conj(), u.conj()]])

    def pair(self, tol: float = DEFAULT_TOL) -> tuple[ModeOperator, PairKernel]:
        key = ("pair", tol)
        if key not in self._cache:
            self._cache[key] = pair_operator(self, tol)
        return self._cache[key]


def bogoliubov_residuals(bmap: BogoliubovMap) -> tuple[float, float, float, float]:
    """Max-norm residuals of the four bosonic Bogoliubov relations.

    Order: ``u*u - v^T vbar - 1``, ``u*v - v^T ubar``, ``u u* - v v* - 1``,
    ``u v^T - v u^T``.
    """
    u, v = bmap.u.entries, bmap.v.entries
    if u.shape != v.shape:
        raise ValueError("dimension mismatch")
    one = np.eye(u.shape[0])
    uh, vh = u.conj().T, v.conj().T
    return (
        _max_abs(uh @ u - v.T @ v.conj() - one),
        _max_abs(uh @ v - v.T @ u.conj()),
        _max_abs(u @ uh - v @ vh - one),
        _max_abs(u @ v.T - v @ u.T),
    )


class RelationError(ValueError):
    """The Bogoliubov relations do not hold to the requested tolerance."""


def _pair_closed_form(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    # O conj(u) = -v/2  <=>  conj(u)^T O^T = -v^T/2
    return -0.5 * np.linalg.solve(u.conj().T, v.T).T


def pair_operator_spectral(bmap: BogoliubovMap, cutoff: float = 0.0) -> np.ndarray:
    """Pair operator assembled from the spectral decomposition of ``v^T vbar``.

    With ``v^T vbar = F diag(lam) F*`` and ``g_j = lam_j^{-1/2} v conj(f_j)``, the
    polar pieces give ``O = -sum_{lam_j > 0} sqrt(lam_j / (4 (1 + lam_j))) g_j h_j^T``
    where ``h_j = (1 + lam_j)^{-1/2} u f_j``.  The decomposition is taken from the
    SVD ``v = P diag(s) Q*``: ``lam = s^2``, ``f_j = conj(q_j)``, ``g_j = p_j``.  Each
    term carries a factor ``s_j``, so singular values at or below ``cutoff`` can be
    dropped without ever needing the antiunitary completion on the kernel.
    """
    u, v = bmap.u.entries, bmap.v.entries
    p, s, qh = np.linalg.svd(v)
    q = qh.conj().T
    out = np.zeros_like(u)
    for j in np.flatnonzero(s > cutoff):
        h = u @ q[:, j].conj() / np.sqrt(1.0 + s[j] ** 2)
        out -= s[j] / (2.0 * np.sqrt(1.0 + s[j] ** 2)) * np.outer(p[:, j], h)
    return out


def pair_operator(bmap: BogoliubovMap, tol: float = DEFAULT_TOL) -> tuple[ModeOperator, PairKernel]:
    """Linear pair operator ``O`` with ``2 O J u = -v J`` and its kernel.

    Raises RelationError if ``(u, v)`` is not a Bogoliubov map within ``tol``.
    """
    res = bogoliubov_residuals(bmap)
    if max(res) > tol:
        raise RelationError(f"Bogoliubov relations violated: residuals {res}")
    o = _pair_closed_form(bmap.u.entries, bmap.v.entries)
    return ModeOperator(o), PairKernel(o.copy())


def pair_residual(bmap: BogoliubovMap, o: ModeOperator) -> float:
    """Max-norm of ``2 O J u + v J`` as an antilinear operator."""
    J = conjugation_J(bmap.dim)
    lhs = (o.scale(2.0) @ J @ bmap.u) + (bmap.v @ J)
    return _max_abs(lhs.entries)


@dataclass(frozen=True)
class ConvergenceProbe:
    sizes: tuple[int, ...]
    partial_traces: tuple[float, ...]
    verdict: str
    rate_estimate: float
    family: str = ""

    def as_dict(self) -> dict:
        return {
            "family": self.family,
            "sizes": list(self.sizes),
            "partial_traces": list(self.partial_traces),
            "verdict": self.verdict,
            "rate_estimate": self.rate_estimate,
        }


# decay exponent p of the per-index trace increment ~ j^-p
CONVERGENT_EXPONENT = 1.25
DIVERGENT_EXPONENT = 1.05


def shale_stinespring_probe(
    family: Callable[[int], np.ndarray],
    sizes: Sequence[int],
    label: str = "",
) -> ConvergenceProbe:
    """Partial traces ``tr_M(v* v)`` over growing truncations, with a verdict.

    The verdict is a diagnostic.  Per-index increments between consecutive sizes
    are fitted to a power law ``j^-p`` on a log-log scale; ``p`` is returned as
    ``rate_estimate``.  ``p > 1.25`` reads as convergent, ``p < 1.05`` (or
    increments that do not shrink) as divergent, anything else inconclusive.
    """
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) < 2 or any(b <= a for a, b in zip(sizes, sizes[1:])) or sizes[0] < 1:
        raise ValueError("sizes must be an ascending list of at least two positive integers")
    traces = []
    for m in sizes:
        v = np.asarray(family(m), dtype=complex)
        if v.shape != (m, m):
            raise ValueError(f"family returned shape {v.shape} for M={m}")
        traces.append(float(np.sum(np.abs(v) ** 2)))

    incs = np.diff(traces)
    widths = np.diff(sizes)
    top = max(abs(traces[-1]), 1.0)
    if np.all(np.abs(incs) <= 1e-14 * top):
        return ConvergenceProbe(sizes, tuple(traces), "convergent", float("inf"), label)
    if np.any(incs <= 0):
        # zero increments mixed with positive ones: no clean power law
        return ConvergenceProbe(sizes, tuple(traces), "inconclusive", float("nan"), label)

    per_index = incs / widths
    mids = np.sqrt(np.asarray(sizes[:-1], float) * np.asarray(sizes[1:], float))
    if len(incs) == 1:
        p = float("nan")
    else:
        slope = np.polyfit(np.log(mids), np.log(per_index), 1)[0]
        p = float(-slope)
    if np.isnan(p):
        verdict = "inconclusive"
    elif p > CONVERGENT_EXPONENT:
        verdict = "convergent"
    elif p < DIVERGENT_EXPONENT:
        verdict = "divergent"
    else:
        verdict = "inconclusive"
    return ConvergenceProbe(sizes, tuple(traces), verdict, p, label)
