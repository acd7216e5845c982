"""Closed-form entry expressions for operator families.

Grammar (see docs/grammar.md)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?
    primary := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

``^`` binds tightest and associates to the right; ``-2^2`` is ``-(2^2)``.
Index variables are ``j`` and ``k``; ``i`` is the imaginary unit and ``pi``
the usual constant.  Numbers may carry an ``i`` suffix (``2.5i``).
Evaluation is vectorised: ``j`` and ``k`` may be integer arrays.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

FUNCTIONS = {
    "exp": 1,
    "tanh": 1,
    "cosh": 1,
    "sinh": 1,
    "sqrt": 1,
    "recip": 1,
    "delta": 2,
}
INDEX_VARS = ("j", "k")
CONSTANTS = {"i": 1j, "pi": math.pi}


class DSLError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line, self.column = line, column
        where = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(message + where)
        self.message = message


class EvalError(DSLError):
    pass


@dataclass(frozen=True)
class Num:
    value: complex


@dataclass(frozen=True)
class Name:
    id: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


Expr = Union[Num, Name, Neg, BinOp, Call]

_TOKEN = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)"
    r"|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?i?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(src: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        col = pos - line_start + 1
        if not m:
            raise DSLError(f"unexpected character {src[pos]!r}", line, col)
        kind = m.lastgroup
        if kind == "nl":
            line, line_start = line + 1, m.end()
        elif kind != "ws":
            tokens.append(Token(kind, m.group(), line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, len(src) - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, src: str, names):
        self.toks = tokenize(src)
        self.pos = 0
        self.names = names

    def peek(self) -> Token:
        return self.toks[self.pos]

    def next(self) -> Token:
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def fail(self, tok: Token, msg: str | None = None):
        if msg is None:
            msg = "unexpected end of input" if tok.kind == "eof" else f"unexpected token {tok.text!r}"
        raise DSLError(msg, tok.line, tok.column)

    def expect(self, text: str):
        tok = self.next()
        if tok.text != text:
            self.fail(tok, f"expected {text!r}" + (" but input ended" if tok.kind == "eof" else f", got {tok.text!r}"))
        return tok

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek().kind != "eof":
            self.fail(self.peek())
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.peek().text in ("+", "-") and self.peek().kind == "op":
            op = self.next().text
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.peek().text in ("*", "/") and self.peek().kind == "op":
            op = self.next().text
            left = BinOp(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.peek().text == "-" and self.peek().kind == "op":
            self.next()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.peek().text == "^":
            self.next()
            return BinOp("^", base, self.unary())
        return base

    def primary(self) -> Expr:
        tok = self.next()
        if tok.kind == "num":
            text = tok.text
            if text.endswith("i"):
                return Num(complex(0.0, float(text[:-1])))
            return Num(complex(float(text), 0.0))
        if tok.kind == "name":
            if self.peek().text == "(":
                if tok.text not in FUNCTIONS:
                    raise DSLError(f"unknown function {tok.text!r}", tok.line, tok.column)
                self.next()
                args = [self.expr()]
                while self.peek().text == ",":
                    self.next()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != FUNCTIONS[tok.text]:
                    raise DSLError(
                        f"{tok.text} takes {FUNCTIONS[tok.text]} argument(s), got {len(args)}", tok.line, tok.column
                    )
                return Call(tok.text, tuple(args))
            if tok.text in FUNCTIONS:
                raise DSLError(f"function {tok.text!r} used without arguments", tok.line, tok.column)
            if self.names is not None and tok.text not in self.names:
                raise DSLError(f"unknown identifier {tok.text!r}", tok.line, tok.column)
            return Name(tok.text)
        if tok.text == "(":
            e = self.expr()
            self.expect(")")
            return e
        self.fail(tok)


def parse(src: str, params=None) -> Expr:
    """Parse ``src``.  If ``params`` is given, free names must be parameters,
    index variables or built-in constants."""
    names = None
    if params is not None:
        names = set(params) | set(INDEX_VARS) | set(CONSTANTS)
    return _Parser(src, names).parse()


# printing ------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _PREC["neg"]
    if isinstance(e, Num):
        if e.value.real != 0 and e.value.imag != 0:
            return _PREC["+"]
        if e.value.real < 0 or e.value.imag < 0:
            return _PREC["neg"]
    return _PREC["atom"]


def _fmt_float(x: float) -> str:
    s = repr(float(x))
    if s in ("inf", "nan", "-inf"):
        raise DSLError(f"cannot print non-finite literal {s}")
    return s


def to_source(e: Expr) -> str:
    """Print with the minimal parentheses needed to reparse to the same tree."""
    if isinstance(e, Num):
        re_, im = e.value.real, e.value.imag
        if im == 0:
            return _fmt_float(re_)
        if re_ == 0:
            return _fmt_float(im) + "i"
        return f"({_fmt_float(re_)}+{_fmt_float(im)}i)"
    if isinstance(e, Name):
        return e.id
    if isinstance(e, Call):
        return f"{e.func}({', '.join(to_source(a) for a in e.args)})"
    if isinstance(e, Neg):
        inner = to_source(e.operand)
        if _prec(e.operand) < _PREC["neg"]:
            inner = f"({inner})"
        return "-" + inner
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        left, right = to_source(e.left), to_source(e.right)
        if e.op == "^":
            # left operand must be an atom; right may be any unary-level expression
            if _prec(e.left) <= p:
                left = f"({left})"
            if _prec(e.right) < _PREC["neg"]:
                right = f"({right})"
            return f"{left}^{right}"
        if _prec(e.left) < p:
            left = f"({left})"
        if _prec(e.right) <= p:
            right = f"({right})"
        return f"{left}{e.op}{right}" if p == 2 else f"{left} {e.op} {right}"
    raise TypeError(f"not an expression: {e!r}")


# evaluation ----------------------------------------------------------------


def free_names(e: Expr) -> set[str]:
    if isinstance(e, Name):
        return {e.id}
    if isinstance(e, Neg):
        return free_names(e.operand)
    if isinstance(e, BinOp):
        return free_names(e.left) | free_names(e.right)
    if isinstance(e, Call):
        out = set()
        for a in e.args:
            out |= free_names(a)
        return out
    return set()


def _nonzero_divisor(x):
    if np.any(np.asarray(x) == 0):
        raise EvalError("division by zero")


def _eval(e: Expr, env: Mapping):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Name):
        if e.id in env:
            return env[e.id]
        if e.id in CONSTANTS:
            return CONSTANTS[e.id]
        raise EvalError(f"unbound name {e.id!r}")
    if isinstance(e, Neg):
        return -_eval(e.operand, env)
    if isinstance(e, BinOp):
        a, b = _eval(e.left, env), _eval(e.right, env)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            _nonzero_divisor(b)
            return a / b
        if np.any(np.asarray(a) == 0) and np.any(np.real(np.asarray(b)) < 0):
            raise EvalError("division by zero")
        return np.power(np.asarray(a, dtype=complex), b)
    if isinstance(e, Call):
        args = [np.asarray(_eval(a, env), dtype=complex) for a in e.args]
        f = e.func
        if f == "delta":
            return (args[0] == args[1]).astype(complex)
        if f == "recip":
            _nonzero_divisor(args[0])
            return 1.0 / args[0]
        return {"exp": np.exp, "tanh": np.tanh, "cosh": np.cosh, "sinh": np.sinh, "sqrt": np.sqrt}[f](args[0])
    raise TypeError(f"not an expression: {e!r}")


def evaluate(e: Expr | str, bindings: Mapping | None = None, j=None, k=None):
    """Evaluate to a complex scalar (or array when ``j``/``k`` are arrays)."""
    if isinstance(e, str):
        e = parse(e)
    env = dict(bindings or {})
    if j is not None:
        env["j"] = np.asarray(j)
    if k is not None:
        env["k"] = np.asarray(k)
    with np.errstate(all="ignore"):
        out = _eval(e, env)
    out = np.asarray(out, dtype=complex)
    return complex(out) if out.ndim == 0 else out


def build_matrix(src: str, modes: int, params: Mapping | None = None) -> np.ndarray:
    """Matrix with entries ``expr(j, k)`` for ``1 <= j, k <= modes`` (row ``j``, column ``k``)."""
    e = parse(src, params or {})
    jj, kk = np.meshgrid(np.arange(1, modes + 1), np.arange(1, modes + 1), indexing="ij")
    out = evaluate(e, params, j=jj, k=kk)
    return np.broadcast_to(out, (modes, modes)).astype(complex)


def build_vector(src: str, modes: int, params: Mapping | None = None) -> np.ndarray:
    """Vector with entries ``expr(j)`` for ``1 <= j <= modes``."""
    e = parse(src, params or {})
    out = evaluate(e, params, j=np.arange(1, modes + 1))
    return np.broadcast_to(out, (modes,)).astype(complex)


def auto_u(v: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    """``u = diag(sqrt(1 + v_jj^2))`` completing a diagonal real ``v``."""
    v = np.asarray(v, dtype=complex)
    off = v - np.diag(np.diag(v))
    if np.max(np.abs(off), initial=0.0) > tol or np.max(np.abs(v.imag), initial=0.0) > tol:
        raise ValueError("auto_u needs a diagonal real v")
    d = np.diag(v).real
    return np.diag(np.sqrt(1.0 + d**2)).astype(complex)


def build_family(family: Mapping[str, object], modes: int, params: Mapping | None = None) -> dict[str, np.ndarray]:
    """Evaluate every ``expr_<name>`` entry of ``family``; honours ``auto_u``."""
    out = {}
    for key, src in family.items():
        if key.startswith("expr_"):
            out[key[5:]] = build_matrix(src, modes, params)
    if family.get("auto_u") and "u" not in out:
        if "v" not in out:
            raise ValueError("auto_u requires expr_v")
        out["u"] = auto_u(out["v"])
    return out
