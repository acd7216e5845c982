"""Scenario files, check execution and report rendering."""

from __future__ import annotations

import io
import itertools
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import jsonschema
import numpy as np

from . import __version__
from .bogoliubov import (
    SingularGramError,
    annihilation_residual,
    build_vacuum,
    gram_conditions,
    implementation_check,
    psi_vectors,
    vacuum_by_recursion,
)
from .dsl import DSLError, build_family, build_matrix
from .extended import embed_fock, ext_commutator_check
from .fock import FockVector, basis_states, ccr_residual
from .modes import (
    BogoliubovMap,
    bogoliubov_residuals,
    operator_norm,
    pair_operator,
    pair_operator_spectral,
    shale_stinespring_probe,
)
from .quadratic import QuadraticSpec, conjugation_check, diagonalize, generate_bogoliubov, vacuum_energy_shift
from .serialize import FORMAT_VERSION, fock_to_record

CHECK_ORDER = (
    "relations",
    "ccr",
    "ext-ccr",
    "vacuum",
    "annihilation",
    "implement",
    "injectivity",
    "ss-probe",
    "diagonalize",
)

# checks that need the Bogoliubov map to satisfy the relations
MAP_CHECKS = frozenset({"vacuum", "annihilation", "implement", "injectivity"})

COND_LIMIT = 1e12

_matrix_schema = {
    "oneOf": [
        {"type": "string"},
        {
            "type": "array",
            "items": {
                "type": "array",
                "items": {
                    "oneOf": [
                        {"type": "number"},
                        {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                    ]
                },
            },
        },
    ]
}

SCHEMA = {
    "type": "object",
    "required": ["format_version", "name", "modes", "nmax"],
    "properties": {
        "format_version": {"const": FORMAT_VERSION},
        "name": {"type": "string"},
        "modes": {"type": "integer", "minimum": 1},
        "nmax": {"type": "integer", "minimum": 2},
        "tolerance": {"type": "number", "exclusiveMinimum": 0},
        "params": {"type": "object", "additionalProperties": {"type": "number"}},
        "map": {
            "type": "object",
            "properties": {
                "expr_u": {"type": "string"},
                "expr_v": {"type": "string"},
                "auto_u": {"type": "boolean"},
                "u": _matrix_schema,
                "v": _matrix_schema,
                "generator": {
                    "type": "object",
                    "required": ["seed"],
                    "properties": {
                        "seed": {"type": "integer", "minimum": 0},
                        "strength": {"type": "number", "minimum": 0},
                    },
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "checks": {
            "type": "array",
            "items": {"enum": list(CHECK_ORDER)},
            "uniqueItems": True,
        },
        "quadratic": {
            "type": "object",
            "required": ["h", "k"],
            "properties": {
                "h": _matrix_schema,
                "k": _matrix_schema,
                "pairing_sign": {"enum": [1, -1]},
                "c_formula": {"type": "string"},
            },
            "additionalProperties": False,
        },
        "probe": {
            "type": "object",
            "properties": {
                "sizes": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2},
                "degree": {"type": "integer", "minimum": 0},
                "family": {"type": "string"},
                "expect": {"enum": ["convergent", "divergent", "inconclusive"]},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


class ScenarioError(ValueError):
    """The scenario file is unreadable or violates the schema."""


@dataclass
class Scenario:
    name: str
    modes: int
    nmax: int
    tolerance: float = 1e-10
    params: dict = field(default_factory=dict)
    map_spec: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    quadratic: dict | None = None
    probe: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        try:
            jsonschema.validate(data, SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ScenarioError(f"schema violation at {where}: {exc.message}") from None
        return cls(
            name=data["name"],
            modes=data["modes"],
            nmax=data["nmax"],
            tolerance=float(data.get("tolerance", 1e-10)),
            params={k: float(v) for k, v in data.get("params", {}).items()},
            map_spec=dict(data.get("map", {})),
            checks=list(data.get("checks", [])),
            quadratic=data.get("quadratic"),
            probe=dict(data.get("probe", {})),
            raw=data,
        )


def load_scenario(path) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return Scenario.from_dict(data)


def parse_matrix(value, modes: int, params: dict) -> np.ndarray:
    """A matrix given as a DSL string or row-major rows of numbers / ``[re, im]`` pairs."""
    if isinstance(value, str):
        return build_matrix(value, modes, params)
    rows = [[complex(x[0], x[1]) if isinstance(x, list) else complex(x) for x in row] for row in value]
    a = np.array(rows, dtype=complex)
    if a.shape != (modes, modes):
        raise ValueError(f"matrix has shape {a.shape}, expected {(modes, modes)}")
    return a


def build_map(scn: Scenario) -> BogoliubovMap:
    spec = scn.map_spec
    M = scn.modes
    if "generator" in spec:
        g = spec["generator"]
        return generate_bogoliubov(M, g["seed"], g.get("strength", 0.5))
    fam = build_family({k: v for k, v in spec.items() if k.startswith("expr_") or k == "auto_u"}, M, scn.params)
    u = parse_matrix(spec["u"], M, scn.params) if "u" in spec else fam.get("u")
    v = parse_matrix(spec["v"], M, scn.params) if "v" in spec else fam.get("v")
    if v is None:
        v = np.zeros((M, M), complex)
    if u is None:
        if np.any(v):
            raise ValueError("map gives v without u; set auto_u or expr_u")
        u = np.eye(M, dtype=complex)
    return BogoliubovMap(u, v)


@dataclass
class CheckRecord:
    check: str
    status: str
    residuals: dict = field(default_factory=dict)
    lossy: bool = False
    notes: list = field(default_factory=list)
    wall_time: float | None = None

    def as_dict(self) -> dict:
        return {
            "check": self.check,
            "status": self.status,
            "residuals": {k: _num(v) for k, v in self.residuals.items()},
            "lossy": self.lossy,
            "notes": list(self.notes),
            "wall_time": self.wall_time,
        }


def _num(x):
    x = float(x)
    if math.isfinite(x):
        return x
    return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")


@dataclass
class Report:
    scenario: dict
    command: str
    checks: list
    artifacts: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.status != "fail" for c in self.checks)

    def as_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "tool_version": __version__,
            "command": self.command,
            "scenario": self.scenario,
            "status": "pass" if self.passed else "fail",
            "checks": [c.as_dict() for c in self.checks],
            "artifacts": self.artifacts,
        }


class _Context:
    """Lazily built objects shared between checks."""

    def __init__(self, scn: Scenario):
        self.scn = scn
        self._map = None
        self._map_error = None
        self._omega = None
        self.relations_failed = False
        self.probe_verdict = None

    @property
    def map(self) -> BogoliubovMap:
        if self._map_error is not None:
            raise self._map_error
        if self._map is None:
            try:
                self._map = build_map(self.scn)
            except (DSLError, ValueError) as exc:
                self._map_error = exc
                raise
        return self._map

    @property
    def omega(self) -> FockVector:
        if self._omega is None:
            self._omega = build_vacuum(self.map, self.scn.nmax, self.scn.tolerance)
        return self._omega


def _unit(j: int, m: int) -> np.ndarray:
    e = np.zeros(m, complex)
    e[j] = 1.0
    return e


def _mixed_vector(m: int) -> np.ndarray:
    """Fixed complex test vector with all components nonzero."""
    w = np.arange(1, m + 1) * np.exp(0.37j * np.arange(m))
    return w / np.linalg.norm(w)


def _check_relations(ctx: _Context, rec: CheckRecord):
    res = bogoliubov_residuals(ctx.map)
    rec.residuals = dict(zip(("uu_vv", "uv_vu", "uu_vv_dual", "uv_vu_dual"), res))
    ok = max(res) < ctx.scn.tolerance
    ctx.relations_failed = not ok
    return ok


def _check_ccr(ctx: _Context, rec: CheckRecord):
    scn = ctx.scn
    M = scn.modes
    upto = min(scn.nmax - 2, 2)
    probes = basis_states(M, scn.nmax, upto)
    pairs = [(_unit(0, M), _unit(M - 1, M)), (_unit(0, M), _unit(0, M)), (_mixed_vector(M), _mixed_vector(M)[::-1])]
    worst = max(ccr_residual(p, c, probes) for p, c in pairs)
    rec.residuals = {"ccr": worst}
    rec.notes.append(f"{len(probes)} basis probes in sectors <= {upto}")
    return worst < scn.tolerance


def _check_ext_ccr(ctx: _Context, rec: CheckRecord):
    scn = ctx.scn
    M = scn.modes
    bound = min(scn.nmax, 4 if M <= 8 else 3)
    probes = [embed_fock(FockVector.basis(_unit_occ(j, M, n), bound), bound) for n in range(min(bound - 2, 1) + 1) for j in {0, M - 1}]
    phi, chi = _mixed_vector(M), _unit(0, M)
    worst = max(max(ext_commutator_check(phi, chi, p)) for p in probes)
    rec.residuals = {"ext_ccr": worst}
    rec.notes.append(f"extended bound {bound}")
    return worst < scn.tolerance


def _unit_occ(j: int, m: int, n: int) -> tuple:
    occ = [0] * m
    occ[j] = n
    return tuple(occ)


def _check_vacuum(ctx: _Context, rec: CheckRecord):
    scn = ctx.scn
    bmap = ctx.map
    o, kernel = pair_operator(bmap, scn.tolerance)
    spectral = pair_operator_spectral(bmap)
    omega = ctx.omega
    rec_oracle = vacuum_by_recursion(bmap, scn.nmax)
    upto = min(omega.exact_sectors, rec_oracle.exact_sectors)
    diff = max(float(np.max(np.abs(a - b), initial=0.0)) for a, b in zip(omega.sectors[: upto + 1], rec_oracle.sectors[: upto + 1]))
    norm = operator_norm(o)
    rec.residuals = {
        "pair_dual_path": float(np.max(np.abs(o.entries - spectral))),
        "kernel_symmetry": kernel.symmetry_residual(),
        "pair_norm": norm,
        "recursion_oracle": diff,
        "vacuum_norm_truncated": omega.norm(),
    }
    rec.lossy = omega.lossy
    rec.notes.append("pair_norm must stay below 0.5; vacuum_norm_truncated is informational")
    return max(rec.residuals["pair_dual_path"], rec.residuals["kernel_symmetry"], diff) < max(scn.tolerance, 1e-9) and norm < 0.5


def _check_annihilation(ctx: _Context, rec: CheckRecord):
    scn = ctx.scn
    M = scn.modes
    per_sector: dict[int, float] = {}
    phis = [_unit(j, M) for j in range(M)] + [_mixed_vector(M)]
    for phi in phis:
        for n, r in annihilation_residual(ctx.map, ctx.omega, phi).items():
            per_sector[n] = max(per_sector.get(n, 0.0), r)
    rec.residuals = {f"sector_{n}": r for n, r in sorted(per_sector.items())}
    rec.lossy = ctx.omega.lossy
    rec.notes.append(f"odd sectors up to {scn.nmax - 1}; phi runs over the {M} unit vectors and one mixed vector")
    return max(per_sector.values(), default=0.0) < scn.tolerance


def _creation_lists(M: int, degree: int, width: int = 3) -> list[list[np.ndarray]]:
    modes = range(min(M, width))
    out = []
    for d in range(degree + 1):
        for combo in itertools.combinations_with_replacement(modes, d):
            out.append([_unit(j, M) for j in combo])
    return out


def _check_implement(ctx: _Context, rec: CheckRecord):
    scn = ctx.scn
    limit = scn.nmax // 2 - 1
    degree = scn.probe.get("degree", 3)
    if degree > limit:
        rec.notes.append(f"probe degree lowered from {degree} to {limit} (nmax guard)")
        degree = limit
    if degree < 0:
        raise ValueError("nmax too small for any implementation probe")
    lists = _creation_lists(scn.modes, degree)
    worst = 0.0
    for phi in (_unit(0, scn.modes), _mixed_vector(scn.modes)):
        worst = max(worst, implementation_check(ctx.map, lists, phi, scn.nmax))
    rec.residuals = {"intertwining": worst}
    rec.lossy = True
    rec.notes.append(f"{len(lists)} creation lists up to degree {degree}")
    return worst < scn.tolerance


def _check_injectivity(ctx: _Context, rec: CheckRecord):
    scn = ctx.scn
    pv = psi_vectors(ctx.map, scn.tolerance)
    degree = min(scn.probe.get("degree", 3), scn.nmax // 2)
    conds = gram_conditions(ctx.map, scn.nmax, degree)
    rec.residuals = {"sigma_min": pv.sigma_min, "contraction_norm": pv.contraction_norm, "psi_dual_path": pv.dual_path_residual}
    rec.residuals.update({f"gram_cond_{n}": c for n, c in conds.items()})
    rec.notes.append("finite-truncation surrogate: Gram nonsingularity per total degree")
    ok_cond = all(math.isfinite(c) and c < COND_LIMIT for c in conds.values())
    return pv.sigma_min > scn.tolerance and ok_cond and pv.dual_path_residual < max(scn.tolerance, 1e-9)


def _probe_family(scn: Scenario) -> tuple[Callable[[int], np.ndarray], str] | None:
    src = scn.probe.get("family") or scn.map_spec.get("expr_v")
    if src is None:
        return None
    return (lambda m: build_matrix(src, m, scn.params)), src


def _check_ss_probe(ctx: _Context, rec: CheckRecord):
    scn = ctx.scn
    fam = _probe_family(scn)
    if fam is None:
        rec.notes.append("no DSL family for v (map is explicit or generated); nothing to probe")
        return None
    family, label = fam
    sizes = scn.probe.get("sizes", [8, 16, 32, 64])
    probe = shale_stinespring_probe(family, sizes, label)
    ctx.probe_verdict = probe.verdict
    rec.residuals = {"rate_estimate": probe.rate_estimate, "partial_trace_last": probe.partial_traces[-1]}
    rec.residuals.update({f"partial_trace_{m}": t for m, t in zip(probe.sizes, probe.partial_traces)})
    rec.notes.append(f"verdict: {probe.verdict}")
    expect = scn.probe.get("expect")
    if expect is not None:
        return probe.verdict == expect
    return True


def _check_diagonalize(ctx: _Context, rec: CheckRecord):
    scn = ctx.scn
    q = scn.quadratic
    if q is None:
        rec.notes.append("scenario has no quadratic section")
        return None
    M = scn.modes
    spec = QuadraticSpec(parse_matrix(q["h"], M, scn.params), parse_matrix(q["k"], M, scn.params), q.get("pairing_sign", 1))
    result = diagonalize(spec)
    if scn.nmax < 4:
        raise ValueError("conjugation check needs nmax >= 4")
    degree = min(scn.probe.get("degree", 2), scn.nmax - 4, 2)
    lists = _creation_lists(M, degree)
    resid = conjugation_check(spec, result, lists, scn.nmax)
    c_vac = vacuum_energy_shift(spec, result, scn.nmax)
    rel = max(bogoliubov_residuals(result.map))
    rec.residuals = {"conjugation": resid, "relations": rel, "c": result.c, "c_vacuum_gap": abs(result.c - c_vac)}
    rec.lossy = True
    rec.notes.append("c is the finite-truncation normal-ordering constant")
    if ctx.probe_verdict == "divergent":
        rec.notes.append("probe verdict divergent: c has no finite limit as modes grow")
        if "c_formula" in q:
            rec.notes.append(f"renormalization constant (formal): {q['c_formula']}")
    ctx.diagonalization = result
    return max(resid, rel, rec.residuals["c_vacuum_gap"]) < scn.tolerance


_CHECKS = {
    "relations": _check_relations,
    "ccr": _check_ccr,
    "ext-ccr": _check_ext_ccr,
    "vacuum": _check_vacuum,
    "annihilation": _check_annihilation,
    "implement": _check_implement,
    "injectivity": _check_injectivity,
    "ss-probe": _check_ss_probe,
    "diagonalize": _check_diagonalize,
}

COMMAND_CHECKS = {
    "vacuum": ["relations", "vacuum", "annihilation"],
    "implement": ["relations", "implement", "injectivity"],
    "diagonalize": ["diagonalize"],
    "probe": ["ss-probe"],
}


def run_scenario(scn: Scenario | str | Path, command: str = "check", timings: bool = False) -> Report:
    """Run the checks requested by ``command`` (``check`` uses the scenario's list)."""
    if not isinstance(scn, Scenario):
        scn = load_scenario(scn)
    requested = set(scn.checks if command == "check" else COMMAND_CHECKS[command])
    ctx = _Context(scn)
    records = []
    for name in CHECK_ORDER:
        if name not in requested:
            continue
        rec = CheckRecord(name, "fail")
        t0 = time.perf_counter()
        if name in MAP_CHECKS and ctx.relations_failed:
            rec.status = "skipped"
            rec.notes.append("skipped: map violates the Bogoliubov relations")
        else:
            try:
                ok = _CHECKS[name](ctx, rec)
                rec.status = "skipped" if ok is None else ("pass" if ok else "fail")
            except (DSLError, ValueError, np.linalg.LinAlgError, SingularGramError) as exc:
                rec.status = "fail"
                rec.notes.append(f"error: {exc}")
        if timings:
            rec.wall_time = round(time.perf_counter() - t0, 6)
        records.append(rec)

    artifacts: dict[str, Any] = {}
    if command == "vacuum" and ctx._omega is not None:
        artifacts["vacuum"] = fock_to_record(ctx._omega)
    if command == "diagonalize" and getattr(ctx, "diagonalization", None) is not None:
        artifacts["diagonalization"] = ctx.diagonalization.as_dict()
    return Report(scn.raw, command, records, artifacts)


def emit(report: Report, fmt: str = "json") -> bytes:
    if fmt == "json":
        return (json.dumps(report.as_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n").encode()
    if fmt == "table":
        return _table(report).encode()
    raise ValueError(f"unknown format {fmt!r}")


def _table(report: Report) -> str:
    buf = io.StringIO()
    name = report.scenario.get("name", "")
    buf.write(f"scenario: {name}   command: {report.command}   status: {'pass' if report.passed else 'fail'}\n")
    rows = []
    for c in report.checks:
        items = list(c.residuals.items()) or [("-", None)]
        for i, (k, v) in enumerate(items):
            val = "" if v is None else f"{float(v):.3e}"
            rows.append((c.check if i == 0 else "", c.status if i == 0 else "", k, val, ("yes" if c.lossy else "no") if i == 0 else ""))
        for note in c.notes:
            rows.append(("", "", "note", note, ""))
    head = ("check", "status", "residual", "value", "lossy")
    plain = [r for r in rows if r[2] != "note"] + [head]
    widths = [max(len(r[i]) for r in plain) for i in range(4)]
    fmt_row = lambda r: f"{r[0]:<{widths[0]}}  {r[1]:<{widths[1]}}  {r[2]:<{widths[2]}}  {r[3]:>{widths[3]}}  {r[4]}".rstrip()
    buf.write(fmt_row(head) + "\n")
    buf.write("-" * (sum(widths) + 12) + "\n")
    for r in rows:
        if r[2] == "note":
            buf.write(f"{'':<{widths[0]}}  {'':<{widths[1]}}  note: {r[3]}\n")
        else:
            buf.write(fmt_row(r) + "\n")
    return buf.getvalue()
