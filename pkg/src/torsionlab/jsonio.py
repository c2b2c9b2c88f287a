"""JSON document formats for algebras, morphisms, complexes and Morse data.

Algebra documents::

    {"algebra": {"kind": "finite_group", "table": [[...]]}
                 | {"kind": "torus", "rank": d, "grid": N}
                 | {"kind": "scalar"},
     "morphisms": {name: {"rows": m, "cols": n,
                          "entries": [[[{"g": idx | [k1..kd], "c": x}, ...]]]}},
     "complex": {"ranks": [...], "differentials": ["d0", "d1", ...]}}

Coefficients ``c`` are real numbers or two-element ``[re, im]`` lists.

Morse documents::

    {"group": {"kind": "finite" | "free_abelian" | "trivial",
               "table": [[...]] | "rank": d},
     "crit_counts": [m_0, ..., m_d],
     "incidence": [M_1, M_2, ...],     # entries [{"g": ..., "c": int}, ...]
     "harmonic_data": {"0": [[...]], ...}}   # optional
"""

from __future__ import annotations

import json

import numpy as np

from .algebra import Key, TraceAlgebra
from .cochain import CochainComplex
from .morphism import Morphism
from .morse import MorseSpec


def _coeff(c) -> complex:
    if isinstance(c, (list, tuple)):
        return complex(c[0], c[1])
    return complex(c)


def parse_algebra(doc: dict) -> TraceAlgebra:
    kind = doc.get("kind", "scalar")
    if kind == "scalar":
        return TraceAlgebra()
    if kind == "finite_group":
        return TraceAlgebra(table=np.asarray(doc["table"], dtype=int))
    if kind == "torus":
        rank = int(doc["rank"])
        grid = doc.get("grid", 1024)
        grid = tuple(grid) if isinstance(grid, (list, tuple)) else (int(grid),) * rank
        return TraceAlgebra(rank=rank, grid=grid)
    raise ValueError(f"unknown algebra kind {kind!r}")


def _key(algebra: TraceAlgebra, g) -> Key:
    if algebra.rank == 0:
        return (int(g), ())
    if algebra.table is None:
        k = tuple(int(x) for x in np.atleast_1d(g))
        if len(k) != algebra.rank:
            raise ValueError("lattice point rank mismatch")
        return (0, k)
    gg, k = g
    return (int(gg), tuple(int(x) for x in k))


def parse_morphism(algebra: TraceAlgebra, doc: dict) -> Morphism:
    rows, cols = int(doc["rows"]), int(doc["cols"])
    entries = doc["entries"]
    if len(entries) != rows or any(len(r) != cols for r in entries):
        raise ValueError("entry grid does not match rows x cols")
    coeffs: dict[Key, np.ndarray] = {}
    for i, row in enumerate(entries):
        for j, terms in enumerate(row):
            for term in terms:
                key = _key(algebra, term["g"])
                mat = coeffs.setdefault(key, np.zeros((rows, cols), dtype=complex))
                mat[i, j] += _coeff(term["c"])
    return Morphism(algebra, rows, cols, coeffs)


def parse_document(doc: dict) -> dict:
    """Parse a full document into algebra, named morphisms, optional complex."""
    algebra = parse_algebra(doc.get("algebra", {}))
    morphisms = {name: parse_morphism(algebra, m)
                 for name, m in doc.get("morphisms", {}).items()}
    out = {"algebra": algebra, "morphisms": morphisms, "complex": None}
    if "complex" in doc:
        spec = doc["complex"]
        ranks = [int(r) for r in spec["ranks"]]
        diffs = []
        for i, name in enumerate(spec["differentials"]):
            if name not in morphisms:
                raise ValueError(f"complex references unknown morphism {name!r}")
            diffs.append(morphisms[name])
        out["complex"] = CochainComplex(algebra, ranks, diffs)
    return out


def load_document(path: str) -> dict:
    with open(path) as handle:
        return parse_document(json.load(handle))


def parse_morse_spec(doc: dict) -> MorseSpec:
    group = doc.get("group", {"kind": "trivial"})
    kind = group.get("kind", "trivial")
    table = np.asarray(group["table"], dtype=int) if kind == "finite" else None
    rank = int(group.get("rank", 0)) if kind == "free_abelian" else 0
    counts = [int(m) for m in doc["crit_counts"]]
    incidence = []
    for mat in doc.get("incidence", []):
        rows = []
        for row in mat:
            entries = []
            for terms in row:
                entry = {}
                for term in terms:
                    if kind == "finite":
                        key = (int(term["g"]), ())
                    elif kind == "free_abelian":
                        key = (0, tuple(int(x) for x in np.atleast_1d(term["g"])))
                    else:
                        key = (0, ())
                    entry[key] = entry.get(key, 0) + int(term["c"])
                entries.append(entry)
            rows.append(entries)
        incidence.append(rows)
    harmonic = None
    if doc.get("harmonic_data"):
        harmonic = {int(q): np.asarray(mat, dtype=float)
                    for q, mat in doc["harmonic_data"].items()}
    return MorseSpec(kind if kind != "finite" else "finite",
                     counts, incidence, table=table, rank=rank,
                     harmonic_data=harmonic, name=doc.get("name", "file"))


def load_morse_spec(path: str) -> MorseSpec:
    with open(path) as handle:
        return parse_morse_spec(json.load(handle))
