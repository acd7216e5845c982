"""JSON-compatible records for Fock and extended vectors.

Fock record::

    {"format_version": 1, "kind": "fock", "modes": M, "nmax": N, "exact_upto": e | null,
     "sectors": [{"N": n, "entries": [[[n_1, ..., n_M], re, im], ...]}, ...]}

Extended record: same layout with ``"kind": "extended"``, ``"bound"`` in place of
``nmax``, one block per ``(N, L)`` key carrying ``"summable"`` and entries keyed
by the flat index tuple ``(i_1, ..., i_{N+L})`` (0-based).
"""

from __future__ import annotations

import itertools

import numpy as np

from .extended import ExtendedVector
from .fock import FockVector, occupations

FORMAT_VERSION = 1


def _check_version(rec: dict, kind: str):
    if rec.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported format_version {rec.get('format_version')!r}")
    if rec.get("kind") != kind:
        raise ValueError(f"expected a {kind!r} record, got {rec.get('kind')!r}")


def fock_to_record(psi: FockVector, drop_below: float = 0.0) -> dict:
    sectors = []
    for n, sec in enumerate(psi.sectors):
        occs = occupations(psi.modes, n)
        ents = [[list(occs[i]), float(z.real), float(z.imag)] for i, z in enumerate(sec) if abs(z) > drop_below]
        if ents:
            sectors.append({"N": n, "entries": ents})
    return {
        "format_version": FORMAT_VERSION,
        "kind": "fock",
        "modes": psi.modes,
        "nmax": psi.nmax,
        "exact_upto": psi.exact_upto,
        "sectors": sectors,
    }


def fock_from_record(rec: dict) -> FockVector:
    _check_version(rec, "fock")
    psi = FockVector.zeros(int(rec["modes"]), int(rec["nmax"]))
    secs = [np.array(s) for s in psi.sectors]
    index = {}
    for block in rec["sectors"]:
        n = int(block["N"])
        lookup = index.setdefault(n, {o: i for i, o in enumerate(occupations(psi.modes, n))})
        for occ, re, im in block["entries"]:
            occ = tuple(int(x) for x in occ)
            if sum(occ) != n or occ not in lookup:
                raise ValueError(f"occupation {occ} does not belong to sector {n}")
            secs[n][lookup[occ]] = complex(re, im)
    return FockVector(psi.modes, psi.nmax, tuple(secs), rec.get("exact_upto"))


def extended_to_record(v: ExtendedVector, drop_below: float = 0.0) -> dict:
    blocks = []
    for (n, l), arr in v.entries.items():
        ents = []
        for idx in itertools.product(range(v.modes), repeat=n + l):
            z = arr[idx] if idx else arr[()]
            if abs(z) > drop_below:
                ents.append([list(idx), float(z.real), float(z.imag)])
        blocks.append({"N": n, "L": l, "summable": v.summable[(n, l)], "entries": ents})
    return {
        "format_version": FORMAT_VERSION,
        "kind": "extended",
        "modes": v.modes,
        "bound": v.bound,
        "lossy": v.lossy,
        "sectors": blocks,
    }


def extended_from_record(rec: dict) -> ExtendedVector:
    _check_version(rec, "extended")
    m = int(rec["modes"])
    entries, flags = {}, {}
    for block in rec["sectors"]:
        n, l = int(block["N"]), int(block["L"])
        arr = np.zeros((m,) * (n + l), complex)
        for idx, re, im in block["entries"]:
            arr[tuple(int(i) for i in idx)] = complex(re, im)
        entries[(n, l)] = arr
        flags[(n, l)] = bool(block.get("summable", False))
    return ExtendedVector(m, int(rec["bound"]), entries, flags, bool(rec.get("lossy", False)))
