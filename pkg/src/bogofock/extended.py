"""Double-graded raw functions and their quotient by the summation ideal.

An :class:`ExtendedVector` stores, for each pair ``(N, L)``, a raw array of
shape ``(M,) * (N + L)``.  The first ``N`` axes are free; the trailing ``L``
axes are formally summed over.  Two vectors are identified when they differ by
permutations of trailing axes or by executing trailing sums.  At finite ``M``
every such sum is finite, so the ``execute-all`` normal form (all ``L = 0``)
decides equality; ``execute-marked`` only executes entries flagged summable
and keeps the bookkeeping of the rest.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import dsl
from .fock import POINTWISE_CAP, FockVector, to_pointwise

EXECUTE_ALL = "execute-all"
EXECUTE_MARKED = "execute-marked"
POLICIES = (EXECUTE_ALL, EXECUTE_MARKED)


@dataclass(frozen=True, eq=False)
class ExtendedVector:
    modes: int
    bound: int
    entries: Mapping[tuple[int, int], np.ndarray] = field(default_factory=dict)
    summable: Mapping[tuple[int, int], bool] = field(default_factory=dict)
    lossy: bool = False

    def __post_init__(self):
        if self.modes < 1 or self.bound < 0:
            raise ValueError("need modes >= 1 and bound >= 0")
        ents = {}
        for (n, l), arr in self.entries.items():
            if n < 0 or l < 0 or n + l > self.bound:
                raise ValueError(f"entry ({n}, {l}) outside bound {self.bound}")
            if self.modes ** (n + l) > POINTWISE_CAP:
                raise ValueError(f"entry ({n}, {l}) needs {self.modes}^{n + l} values, cap is {POINTWISE_CAP}")
            a = np.array(arr, dtype=complex)
            if a.shape != (self.modes,) * (n + l):
                raise ValueError(f"entry ({n}, {l}) has shape {a.shape}, expected {(self.modes,) * (n + l)}")
            a.setflags(write=False)
            ents[(n, l)] = a
        object.__setattr__(self, "entries", dict(sorted(ents.items())))
        object.__setattr__(self, "summable", {key: bool(self.summable.get(key, False)) for key in ents})

    def get(self, n: int, l: int) -> np.ndarray:
        if (n, l) in self.entries:
            return self.entries[(n, l)]
        return np.zeros((self.modes,) * (n + l), complex)

    def degrees(self) -> list[tuple[int, int]]:
        return list(self.entries)

    def top_degree(self) -> int:
        """Largest ``N + L`` among stored entries (-1 when empty)."""
        return max((n + l for n, l in self.entries), default=-1)

    def _like(self, other: "ExtendedVector"):
        if (self.modes, self.bound) != (other.modes, other.bound):
            raise ValueError("extended vectors have different modes or bound")

    def __add__(self, other: "ExtendedVector") -> "ExtendedVector":
        self._like(other)
        ents = dict(self.entries)
        flags = dict(self.summable)
        for key, a in other.entries.items():
            ents[key] = ents[key] + a if key in ents else a
            flags[key] = flags.get(key, True) and other.summable[key]
        return ExtendedVector(self.modes, self.bound, ents, flags, self.lossy or other.lossy)

    def __mul__(self, c: complex) -> "ExtendedVector":
        return ExtendedVector(
            self.modes, self.bound, {k: c * a for k, a in self.entries.items()}, self.summable, self.lossy
        )

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other: "ExtendedVector") -> "ExtendedVector":
        return self + (-other)

    def max_abs(self) -> float:
        return max((float(np.max(np.abs(a))) for a in self.entries.values() if a.size), default=0.0)

    def __repr__(self):
        return f"ExtendedVector(modes={self.modes}, bound={self.bound}, degrees={self.degrees()})"


def single(modes: int, bound: int, n: int, l: int, arr, summable: bool = False) -> ExtendedVector:
    return ExtendedVector(modes, bound, {(n, l): arr}, {(n, l): summable})


def embed_fock(psi: FockVector, bound: int | None = None) -> ExtendedVector:
    """Fock vector as the element with ``(N, 0)`` entries only."""
    bound = psi.nmax if bound is None else bound
    ents = {}
    for n in range(min(psi.nmax, bound) + 1):
        if np.any(psi.sectors[n]):
            ents[(n, 0)] = to_pointwise(psi, n)
    lossy = psi.top_sector() > bound
    return ExtendedVector(psi.modes, bound, ents, {}, lossy)


def _sym_trailing(arr: np.ndarray, n: int) -> np.ndarray:
    l = arr.ndim - n
    if l < 2:
        return arr
    perms = list(itertools.permutations(range(n, n + l)))
    acc = np.zeros_like(arr)
    head = tuple(range(n))
    for p in perms:
        acc = acc + np.transpose(arr, head + p)
    return acc / len(perms)


def canonicalize(v: ExtendedVector, policy: str = EXECUTE_ALL) -> ExtendedVector:
    """Normal form: symmetrize trailing axes, then execute the allowed sums.

    Entries that end up identically zero are dropped.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    ents: dict = {}
    flags: dict = {}
    for (n, l), arr in v.entries.items():
        if l > 0 and (policy == EXECUTE_ALL or v.summable[(n, l)]):
            key, val, flag = (n, 0), arr.sum(axis=tuple(range(n, n + l))), False
        else:
            key, val, flag = (n, l), _sym_trailing(arr, n), v.summable[(n, l)]
        if key in ents:
            ents[key] = ents[key] + val
            flags[key] = flags[key] and flag
        else:
            ents[key], flags[key] = val, flag
    ents = {k: a for k, a in ents.items() if np.any(a != 0)}
    return ExtendedVector(v.modes, v.bound, ents, {k: flags[k] for k in ents}, v.lossy)


def ext_equal(v: ExtendedVector, w: ExtendedVector, policy: str = EXECUTE_ALL, tol: float = 1e-12) -> bool:
    v._like(w)
    cv, cw = canonicalize(v, policy), canonicalize(w, policy)
    for key in set(cv.entries) | set(cw.entries):
        if np.max(np.abs(cv.get(*key) - cw.get(*key)), initial=0.0) > tol:
            return False
    return True


def _as_vector(phi, modes: int, params=None) -> np.ndarray:
    if isinstance(phi, str):
        return dsl.build_vector(phi, modes, params)
    phi = np.asarray(phi, dtype=complex).reshape(-1)
    if phi.shape != (modes,):
        raise ValueError(f"mode vector has length {phi.size}, expected {modes}")
    return phi


def ext_create(phi, v: ExtendedVector, params=None) -> ExtendedVector:
    """Extended ``a^dagger(phi)``: symmetric insertion into the free slots.

    ``phi`` may be a DSL string in ``j``, evaluated for ``1 <= j <= M``.
    """
    phi = _as_vector(phi, v.modes, params)
    ents, flags, lossy = {}, {}, v.lossy
    for (n0, l), arr in v.entries.items():
        n = n0 + 1
        if n + l > v.bound:
            lossy = lossy or bool(np.any(arr))
            continue
        outer = np.multiply.outer(phi, arr)
        acc = sum(np.moveaxis(outer, 0, k) for k in range(n))
        ents[(n, l)] = acc / math.sqrt(n)
        flags[(n, l)] = v.summable[(n0, l)]
    return ExtendedVector(v.modes, v.bound, ents, flags, lossy)


def ext_annihilate(phi, v: ExtendedVector, params=None, summable: bool = False) -> ExtendedVector:
    """Extended ``a(phi)``: expose the last free slot as a new trailing sum.

    Never sums; entries with ``N = 0`` are annihilated.  The new entries are
    marked ``summable`` as requested (used by the ``execute-marked`` policy).
    """
    phi = _as_vector(phi, v.modes, params)
    ents, flags = {}, {}
    for (n1, l), arr in v.entries.items():
        if n1 == 0:
            continue
        n = n1 - 1
        shape = [1] * arr.ndim
        shape[n] = v.modes
        ents[(n, l + 1)] = math.sqrt(n1) * arr * phi.conj().reshape(shape)
        flags[(n, l + 1)] = summable or v.summable[(n1, l)]
    return ExtendedVector(v.modes, v.bound, ents, flags, v.lossy)


def ext_tensor(v: ExtendedVector, w: ExtendedVector) -> ExtendedVector:
    """Graded product: free axes of both factors first, then trailing axes."""
    v._like(w)
    ents: dict = {}
    flags: dict = {}
    lossy = v.lossy or w.lossy
    for (n1, l1), a in v.entries.items():
        for (n2, l2), b in w.entries.items():
            key = (n1 + n2, l1 + l2)
            if sum(key) > v.bound:
                lossy = lossy or bool(np.any(a) and np.any(b))
                continue
            prod = np.multiply.outer(a, b)
            d1 = n1 + l1
            order = (
                list(range(n1))
                + list(range(d1, d1 + n2))
                + list(range(n1, d1))
                + list(range(d1 + n2, d1 + n2 + l2))
            )
            prod = np.transpose(prod, order)
            flag = v.summable[(n1, l1)] and w.summable[(n2, l2)]
            if key in ents:
                ents[key] = ents[key] + prod
                flags[key] = flags[key] and flag
            else:
                ents[key], flags[key] = prod, flag
    return ExtendedVector(v.modes, v.bound, ents, flags, lossy)


def scalar_sum(weights, modes: int, bound: int, summable: bool = False) -> ExtendedVector:
    """The formal constant ``sum_j weights_j`` as a ``(0, 1)`` element."""
    return single(modes, bound, 0, 1, np.asarray(weights, dtype=complex), summable)


def ext_commutator_check(phi, chi, probe: ExtendedVector) -> tuple[float, float, float]:
    """Residuals of the three extended commutation relations on ``probe``.

    The constant ``<phi, chi>`` enters as the formal sum ``sum_j conj(phi_j) chi_j``
    multiplied onto the probe; everything is compared after ``execute-all``.
    Requires ``probe.top_degree() <= bound - 2``.
    """
    m = probe.modes
    phi = _as_vector(phi, m)
    chi = _as_vector(chi, m)
    if probe.top_degree() > probe.bound - 2:
        raise ValueError(f"probe degree {probe.top_degree()} exceeds bound - 2 = {probe.bound - 2}")
    mixed = (
        ext_annihilate(phi, ext_create(chi, probe))
        - ext_create(chi, ext_annihilate(phi, probe))
        - ext_tensor(scalar_sum(phi.conj() * chi, m, probe.bound), probe)
    )
    ann = ext_annihilate(phi, ext_annihilate(chi, probe)) - ext_annihilate(chi, ext_annihilate(phi, probe))
    cre = ext_create(phi, ext_create(chi, probe)) - ext_create(chi, ext_create(phi, probe))
    return tuple(canonicalize(x).max_abs() for x in (mixed, ann, cre))


# Ren_1 ---------------------------------------------------------------------


@dataclass(frozen=True)
class Ren1Element:
    """Formal sum ``sum_{j >= 1} phi_j``.

    Either ``values`` (finite support, ``values[0]`` is ``phi_1``) or ``expr``,
    a DSL formula in ``j`` with parameters ``params``.
    """

    values: tuple | None = None
    expr: str | None = None
    params: tuple = ()

    def __post_init__(self):
        if (self.values is None) == (self.expr is None):
            raise ValueError("give exactly one of values or expr")
        if self.values is not None:
            object.__setattr__(self, "values", tuple(complex(x) for x in self.values))
        if isinstance(self.params, Mapping):
            object.__setattr__(self, "params", tuple(sorted(self.params.items())))

    @classmethod
    def finite(cls, values: Sequence[complex]) -> "Ren1Element":
        return cls(values=tuple(values))

    @classmethod
    def formula(cls, expr: str, **params) -> "Ren1Element":
        dsl.parse(expr, dict(params))
        return cls(expr=expr, params=tuple(sorted(params.items())))

    def sequence(self, modes: int) -> np.ndarray:
        if self.values is not None:
            out = np.zeros(modes, complex)
            vals = np.array(self.values, complex)[:modes]
            out[: vals.size] = vals
            return out
        return dsl.build_vector(self.expr, modes, dict(self.params))

    def to_extended(self, modes: int, bound: int) -> ExtendedVector:
        """Truncate to ``j <= modes`` and place as a ``(0, 1)`` entry."""
        return scalar_sum(self.sequence(modes), modes, bound)


class _Undecidable(Exception):
    pass


def _terms(e, sign: float = 1.0):
    """Flatten top-level sums into ``(sign, term)`` pairs."""
    if isinstance(e, dsl.BinOp) and e.op in "+-":
        yield from _terms(e.left, sign)
        yield from _terms(e.right, sign if e.op == "+" else -sign)
    elif isinstance(e, dsl.Neg):
        yield from _terms(e.operand, -sign)
    else:
        yield sign, e


def _factors(e):
    if isinstance(e, dsl.BinOp) and e.op == "*":
        return _factors(e.left) + _factors(e.right)
    return [e]


def _is_const(e) -> bool:
    return not (dsl.free_names(e) & set(dsl.INDEX_VARS))


def _const(e, env) -> complex:
    return complex(dsl.evaluate(e, env))


def _substitute(e, name: str, repl):
    if isinstance(e, dsl.Name):
        return repl if e.id == name else e
    if isinstance(e, dsl.Neg):
        return dsl.Neg(_substitute(e.operand, name, repl))
    if isinstance(e, dsl.BinOp):
        return dsl.BinOp(e.op, _substitute(e.left, name, repl), _substitute(e.right, name, repl))
    if isinstance(e, dsl.Call):
        return dsl.Call(e.func, tuple(_substitute(a, name, repl) for a in e.args))
    return e


def _is_j(e) -> bool:
    return isinstance(e, dsl.Name) and e.id == "j"


def _grows(e, env) -> bool:
    """Certify ``|e(j)| -> infinity`` monotonically with positive real values."""
    if _is_j(e):
        return True
    if isinstance(e, dsl.BinOp):
        if e.op in "+-":
            if _is_const(e.right):
                c = _const(e.right, env)
                return c.imag == 0 and _grows(e.left, env)
            if e.op == "+" and _is_const(e.left):
                c = _const(e.left, env)
                return c.imag == 0 and _grows(e.right, env)
            return e.op == "+" and _grows(e.left, env) and _grows(e.right, env)
        if e.op == "*":
            for a, b in ((e.left, e.right), (e.right, e.left)):
                if _is_const(a):
                    c = _const(a, env)
                    return c.imag == 0 and c.real > 0 and _grows(b, env)
            return _grows(e.left, env) and _grows(e.right, env)
        if e.op == "^" and _is_const(e.right):
            p = _const(e.right, env)
            return p.imag == 0 and p.real > 0 and _grows(e.left, env)
    if isinstance(e, dsl.Call) and e.func in ("sqrt", "exp", "cosh", "sinh"):
        return _grows(e.args[0], env)
    return False


def _decays(e, env) -> bool:
    """Certify ``e(j) -> 0`` through recognised shapes."""
    if _is_const(e):
        return _const(e, env) == 0
    if isinstance(e, dsl.Neg):
        return _decays(e.operand, env)
    if isinstance(e, dsl.BinOp):
        if e.op == "/":
            return _is_const(e.left) and _grows(e.right, env) or (_decays(e.left, env) and _is_const(e.right))
        if e.op == "*":
            return (_is_const(e.left) and _decays(e.right, env)) or (_is_const(e.right) and _decays(e.left, env))
        if e.op == "^" and _is_const(e.right):
            p = _const(e.right, env)
            return p.imag == 0 and p.real < 0 and _grows(e.left, env)
        if e.op == "^" and _is_const(e.left):
            return _geometric_ratio(e, env) is not None
    if isinstance(e, dsl.Call) and e.func == "recip":
        return _grows(e.args[0], env)
    return False


def _geometric_ratio(e, env):
    """For ``q^(j + s)`` with constant ``|q| < 1``, return ``(q, s)``."""
    if not (isinstance(e, dsl.BinOp) and e.op == "^" and _is_const(e.left)):
        return None
    q = _const(e.left, env)
    ex = e.right
    if _is_j(ex):
        s = 0j
    elif isinstance(ex, dsl.BinOp) and ex.op in "+-" and _is_j(ex.left) and _is_const(ex.right):
        s = _const(ex.right, env) * (1 if ex.op == "+" else -1)
    elif isinstance(ex, dsl.BinOp) and ex.op == "+" and _is_j(ex.right) and _is_const(ex.left):
        s = _const(ex.left, env)
    else:
        return None
    if abs(q) >= 1:
        return None
    return q, s


def _finite_support_point(term, env):
    """If some factor is ``delta(j, n)`` with integer constant ``n >= 1``, return ``n``."""
    for f in _factors(term):
        if isinstance(f, dsl.Call) and f.func == "delta":
            a, b = f.args
            for x, y in ((a, b), (b, a)):
                if _is_j(x) and _is_const(y):
                    n = _const(y, env)
                    if n.imag == 0 and n.real == round(n.real):
                        return int(round(n.real))
    return None


def _closed_sum(term, env) -> complex:
    """Closed form of ``sum_{j >= 1} term(j)`` for a single recognised term."""
    if _is_const(term):
        if _const(term, env) == 0:
            return 0j
        raise _Undecidable
    n = _finite_support_point(term, env)
    if n is not None:
        return 0j if n < 1 else complex(dsl.evaluate(term, env, j=n))
    const, rest = 1 + 0j, []
    for f in _factors(term):
        if _is_const(f):
            const *= _const(f, env)
        else:
            rest.append(f)
    if len(rest) == 1:
        g = _geometric_ratio(rest[0], env)
        if g is not None:
            q, s = g
            return const * q ** (1 + s) / (1 - q)
    raise _Undecidable


def _formal_sum(e, env) -> complex:
    terms = [(s, t, dsl.to_source(t)) for s, t in _terms(e)]
    # syntactic cancellation of identical terms
    bucket: dict = {}
    for s, t, key in terms:
        c, _ = bucket.get(key, (0.0, t))
        bucket[key] = (c + s, t)
    live = [(c, t) for c, t in bucket.values() if c != 0]
    total = 0j
    used = [False] * len(live)
    # telescoping pairs c*f(j) - c*f(j+1) with f -> 0 sum to c*f(1)
    for a, (ca, ta) in enumerate(live):
        if used[a]:
            continue
        shifted = dsl.to_source(_substitute(ta, "j", dsl.BinOp("+", dsl.Name("j"), dsl.Num(1 + 0j))))
        for b, (cb, tb) in enumerate(live):
            if b != a and not used[b] and cb == -ca and dsl.to_source(tb) == shifted and _decays(ta, env):
                total += ca * complex(dsl.evaluate(ta, env, j=1))
                used[a] = used[b] = True
                break
    for (c, t), u in zip(live, used):
        if not u:
            total += c * _closed_sum(t, env)
    return total


def ren1_equal(a: Ren1Element, b: Ren1Element, tol: float = 1e-12) -> bool | None:
    """Decide ``sum_j (a_j - b_j) = 0`` with absolute convergence.

    Returns ``None`` when the difference is not recognised as a finitely
    supported, geometric, or telescoping sequence.
    """
    env = dict(a.params) | dict(b.params)
    finite_part = 0j
    exprs = []
    for sign, el in ((1.0, a), (-1.0, b)):
        if el.values is not None:
            vals = np.array(el.values, complex)
            finite_part += sign * complex(math.fsum(vals.real), math.fsum(vals.imag))
        else:
            exprs.append((sign, dsl.parse(el.expr, env)))
    if not exprs:
        total = finite_part
    else:
        diff = exprs[0][1] if exprs[0][0] > 0 else dsl.Neg(exprs[0][1])
        for sign, e in exprs[1:]:
            diff = dsl.BinOp("+" if sign > 0 else "-", diff, e)
        try:
            total = finite_part + _formal_sum(diff, env)
        except _Undecidable:
            return None
    return abs(total) <= tol
