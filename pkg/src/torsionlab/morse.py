"""Morse-theoretic chain data over group rings and its torsion invariants.

A :class:`MorseSpec` stores critical-point counts per index and incidence
matrices with *exact integer* group-ring entries; the complex-squared
condition is checked in integer arithmetic.  A :class:`Representation`
sends group generators to unitary morphisms over a target trace algebra;
substituting it into the incidence data produces a
:class:`~torsionlab.cochain.CochainComplex`.

Presets (circle, flat 2-torus, round S^2 and S^3) ship with analytically
computed integrals of orthonormal harmonic frames over unstable cells, so
the metric torsion on presets is exact rather than discretized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algebra import TraceAlgebra
from .cochain import CochainComplex, TorsionResult
from .morphism import Morphism, block_morphism

GroupKey = tuple[int, tuple[int, ...]]
RingEntry = dict[GroupKey, int]


def _ring_mul(spec: "MorseSpec", a: RingEntry, b: RingEntry) -> RingEntry:
    out: RingEntry = {}
    for ka, ca in a.items():
        for kb, cb in b.items():
            k = spec.mul_keys(ka, kb)
            out[k] = out.get(k, 0) + ca * cb
    return {k: c for k, c in out.items() if c != 0}


@dataclass
class MorseSpec:
    """Critical-point counts and integer group-ring incidence matrices.

    ``incidence[q]`` encodes the degree-q differential C^q -> C^{q+1} as an
    m_{q+1} x m_q matrix of group-ring elements (finite support, integer
    coefficients).
    """

    group_kind: str                      # 'trivial' | 'finite' | 'free_abelian'
    crit_counts: list[int]
    incidence: list[list[list[RingEntry]]]
    table: np.ndarray | None = None      # for 'finite'
    rank: int = 0                        # for 'free_abelian'
    harmonic_data: dict[int, np.ndarray] | None = None
    name: str = ""
    _ident: int = field(default=0, repr=False)

    def __post_init__(self):
        if self.group_kind == "finite":
            if self.table is None:
                raise ValueError("finite group spec needs a table")
            self.table = np.asarray(self.table, dtype=int)
        elif self.group_kind == "free_abelian":
            if self.rank <= 0:
                raise ValueError("free abelian group needs positive rank")
        elif self.group_kind != "trivial":
            raise ValueError(f"unknown group kind {self.group_kind!r}")
        if len(self.incidence) != max(len(self.crit_counts) - 1, 0):
            raise ValueError("need one incidence matrix per adjacent degree")

    def mul_keys(self, a: GroupKey, b: GroupKey) -> GroupKey:
        g = int(self.table[a[0], b[0]]) if self.group_kind == "finite" else 0
        return (g, tuple(x + y for x, y in zip(a[1], b[1])))

    def key(self, g: int = 0, k=()) -> GroupKey:
        return (int(g), tuple(int(x) for x in k))

    @property
    def dim(self) -> int:
        return len(self.crit_counts) - 1

    def validate(self) -> dict:
        """Exact integer check of the squared differential, plus support data."""
        worst = 0
        max_support = 0
        for q in range(len(self.incidence) - 1):
            m_hi, m_mid = self.incidence[q + 1], self.incidence[q]
            rows, mid, cols = len(m_hi), len(m_mid), len(m_mid[0]) if m_mid else 0
            for i in range(rows):
                for j in range(cols):
                    acc: RingEntry = {}
                    for l in range(mid):
                        prod = _ring_mul(self, m_hi[i][l], m_mid[l][j])
                        for k, c in prod.items():
                            acc[k] = acc.get(k, 0) + c
                    bad = max((abs(c) for c in acc.values()), default=0)
                    worst = max(worst, bad)
        for mat in self.incidence:
            for row in mat:
                for entry in row:
                    max_support = max(max_support, len(entry))
        return {"square_residual": worst, "max_entry_support": max_support,
                "valid": worst == 0}


# -- representations -----------------------------------------------------------


@dataclass
class Representation:
    """Unitary images of group generators over a target algebra.

    For free-abelian groups ``images[k]`` must be multiplicative in the
    lattice point; the helper constructors below produce monomial, character
    and trivial assignments.  ``module_rank`` is the rank of the coefficient
    module (the paper-side multiplicity l).
    """

    algebra: TraceAlgebra
    module_rank: int
    name: str
    _image_of: object = None      # callable GroupKey -> Morphism

    def image(self, key: GroupKey) -> Morphism:
        return self._image_of(key)

    def apply(self, entry: RingEntry) -> Morphism:
        out = Morphism.zero(self.algebra, self.module_rank, self.module_rank)
        for k, c in entry.items():
            out = out + float(c) * self.image(k)
        return out

    def check_unitary(self, spec: MorseSpec, tol: float = 1e-10) -> float:
        """Largest unitarity defect over the spec's generators."""
        gens: list[GroupKey] = []
        if spec.group_kind == "free_abelian":
            for j in range(spec.rank):
                gens.append(spec.key(0, tuple(1 if i == j else 0
                                              for i in range(spec.rank))))
        elif spec.group_kind == "finite":
            gens = [spec.key(g) for g in range(spec.table.shape[0])]
        worst = 0.0
        ident = Morphism.identity(self.algebra, self.module_rank)
        for g in gens:
            u = self.image(g)
            worst = max(worst, (u.adjoint() @ u - ident).op_norm())
        # defining relations: commutativity for free abelian, full table otherwise
        if spec.group_kind == "free_abelian" and spec.rank > 1:
            for a in range(spec.rank):
                for b in range(a):
                    ka = gens[a]
                    kb = gens[b]
                    worst = max(worst, (self.image(ka) @ self.image(kb)
                                        - self.image(kb) @ self.image(ka)).op_norm())
        if spec.group_kind == "finite":
            n = spec.table.shape[0]
            for a in range(n):
                for b in range(n):
                    lhs = self.image(spec.key(a)) @ self.image(spec.key(b))
                    rhs = self.image(spec.mul_keys(spec.key(a), spec.key(b)))
                    worst = max(worst, (lhs - rhs).op_norm())
        return worst


def trivial_rep(spec: MorseSpec) -> Representation:
    alg = TraceAlgebra()
    one = Morphism.identity(alg, 1)
    return Representation(alg, 1, "trivial", lambda key: one)


def character_rep(spec: MorseSpec, theta) -> Representation:
    """Unit-modulus character of a free-abelian group (theta per generator)."""
    if spec.group_kind == "trivial":
        return trivial_rep(spec)
    if spec.group_kind != "free_abelian":
        raise ValueError("character representation needs a free abelian group")
    angles = np.atleast_1d(np.asarray(theta, dtype=float))
    if angles.size != spec.rank:
        raise ValueError("need one angle per generator")
    alg = TraceAlgebra()

    def img(key: GroupKey) -> Morphism:
        phase = np.exp(1j * float(np.dot(angles, key[1])))
        return Morphism.from_scalar_matrix(alg, [[phase]])

    return Representation(alg, 1, f"char:{','.join(f'{a:g}' for a in angles)}", img)


def regular_rep(spec: MorseSpec, grid: int = 1024) -> Representation:
    """Regular representation: the group ring acts over its own algebra."""
    if spec.group_kind == "free_abelian":
        alg = TraceAlgebra(rank=spec.rank, grid=(grid,) * spec.rank)

        def img(key: GroupKey) -> Morphism:
            return Morphism.from_element(alg.monomial(key[1]))

        return Representation(alg, 1, "regular", img)
    if spec.group_kind == "finite":
        alg = TraceAlgebra(table=spec.table)

        def img(key: GroupKey) -> Morphism:
            return Morphism.from_element(alg.delta(key[0]))

        return Representation(alg, 1, "regular", img)
    return trivial_rep(spec)


def direct_sum_rep(a: Representation, b: Representation) -> Representation:
    """Block-diagonal sum of two representations over the same algebra."""
    if a.algebra != b.algebra:
        raise ValueError("direct sum needs a common target algebra")
    ra, rb = a.module_rank, b.module_rank

    def img(key: GroupKey) -> Morphism:
        fib_a, fib_b = a.image(key).realization(), b.image(key).realization()
        d = a.algebra.group_order
        nf = a.algebra.n_fibers
        out = np.zeros((nf, (ra + rb) * d, (ra + rb) * d), dtype=complex)
        out[:, :ra * d, :ra * d] = fib_a
        out[:, ra * d:, ra * d:] = fib_b
        return Morphism.from_fibers(a.algebra, ra + rb, ra + rb, out)

    return Representation(a.algebra, ra + rb, f"{a.name}+{b.name}", img)


# -- complex construction --------------------------------------------------------


def build_complex(spec: MorseSpec, rep: Representation,
                  check_rep: bool = True) -> CochainComplex:
    """Substitute a representation into the incidence data."""
    if check_rep:
        defect = rep.check_unitary(spec)
        if defect > 1e-8:
            raise ValueError(f"representation fails unitarity/relations: {defect:.2e}")
    l = rep.module_rank
    ranks = [m * l for m in spec.crit_counts]
    diffs = []
    for q, mat in enumerate(spec.incidence):
        rows, cols = spec.crit_counts[q + 1], spec.crit_counts[q]
        blocks = [[rep.apply(mat[i][j]) for j in range(cols)] for i in range(rows)]
        diffs.append(block_morphism(rep.algebra, [l] * rows, [l] * cols, blocks))
    return CochainComplex(rep.algebra, ranks, diffs)


def comb_torsion(spec: MorseSpec, rep: Representation, **kw) -> TorsionResult:
    return build_complex(spec, rep).torsion(**kw)


def metric_torsion(spec: MorseSpec, rep: Representation) -> dict:
    """Metric part of the torsion from stored harmonic-frame cell integrals.

    For representations with vanishing Betti numbers the metric part is zero
    ("no harmonic forms"); presets without stored harmonic data raise when a
    nonzero harmonic module shows up.
    """
    comp = build_complex(spec, rep)
    betti = [comp.betti(i) for i in range(len(comp.ranks))]
    if all(b < 1e-9 for b in betti):
        return {"value": 0.0, "note": "no harmonic forms", "betti": betti}
    if spec.harmonic_data is None:
        raise ValueError("preset carries no harmonic data but Betti numbers "
                         "are nonzero")
    if rep.name != "trivial":
        raise ValueError("stored harmonic data covers the trivial "
                         "representation only")
    total = 0.0
    for q, mat in spec.harmonic_data.items():
        # theta_q inverts the projected integration map on harmonic frames:
        # logdet(theta* theta) = -logdet(A A*) for the stored frame matrix A.
        a = np.asarray(mat, dtype=float)
        sign, ld = np.linalg.slogdet(a @ a.T)
        if sign <= 0:
            raise ValueError("degenerate harmonic integration data")
        total += 0.5 * (-1) ** q * (-ld)
    return {"value": float(total), "note": "from stored cell integrals",
            "betti": betti}


def reidemeister(spec: MorseSpec, rep: Representation, **kw) -> dict:
    """log T_Re = log T_comb + log T_met (finite only in determinant class)."""
    comb = comb_torsion(spec, rep, **kw)
    met = metric_torsion(spec, rep)
    value = None
    if comb.det_class:
        value = comb.log_t + met["value"]
    return {
        "comb": comb,
        "met": met["value"],
        "met_note": met["note"],
        "log_t_re": value,
        "det_class": comb.det_class,
    }


def orientation_flip(spec: MorseSpec, degree: int, cell: int) -> MorseSpec:
    """Flip the orientation of one cell of the given index.

    Negates the cell's row in the incoming incidence matrix and its column
    in the outgoing one; torsion is invariant under this change.
    """
    inc = [[[dict(e) for e in row] for row in mat] for mat in spec.incidence]
    if 0 <= degree - 1 < len(inc):    # row of M_degree = incidence[degree-1]
        inc[degree - 1][cell] = [{k: -c for k, c in e.items()}
                                 for e in inc[degree - 1][cell]]
    if 0 <= degree < len(inc):        # column of M_{degree+1} = incidence[degree]
        for i in range(len(inc[degree])):
            inc[degree][i][cell] = {k: -c for k, c in inc[degree][i][cell].items()}
    return MorseSpec(spec.group_kind, list(spec.crit_counts), inc,
                     spec.table, spec.rank, spec.harmonic_data, spec.name)


# -- presets ------------------------------------------------------------------------


def circle_spec(length: float = 2 * math.pi) -> MorseSpec:
    """Height function on the circle: one minimum, one maximum, M_1 = [1 - t]."""
    e = (0, (0,))
    t = (0, (1,))
    inc = [[[{e: 1, t: -1}]]]
    harmonic = {
        0: np.array([[1.0 / math.sqrt(length)]]),   # value of 1/sqrt(L) at the min
        1: np.array([[math.sqrt(length)]]),         # integral of dx/sqrt(L) over the 1-cell
    }
    return MorseSpec("free_abelian", [1, 1], inc, rank=1,
                     harmonic_data=harmonic, name="circle")


def torus2_spec(length: float = 2 * math.pi) -> MorseSpec:
    """Standard Morse function on the flat square 2-torus of side ``length``."""
    e = (0, (0, 0))
    a = (0, (1, 0))
    b = (0, (0, 1))
    m1 = [[{e: 1, a: -1}], [{e: 1, b: -1}]]          # min -> two saddles
    m2 = [[{e: -1, b: 1}, {e: 1, a: -1}]]            # saddles -> max
    harmonic = {
        0: np.array([[1.0 / length]]),
        1: np.eye(2),
        2: np.array([[length]]),
    }
    return MorseSpec("free_abelian", [1, 2, 1], [m1, m2], rank=2,
                     harmonic_data=harmonic, name="torus2")


def s2_spec() -> MorseSpec:
    """Round 2-sphere: a single minimum and maximum, no 1-cells."""
    return MorseSpec("trivial", [1, 0, 1], [_empty_inc(0, 1), _empty_inc(1, 0)],
                     name="s2")


def s3_spec() -> MorseSpec:
    """Round 3-sphere: single minimum and maximum (indices 0 and 3)."""
    return MorseSpec("trivial", [1, 0, 0, 1],
                     [_empty_inc(0, 1), _empty_inc(0, 0), _empty_inc(1, 0)],
                     name="s3")


def _empty_inc(rows: int, cols: int):
    return [[{} for _ in range(cols)] for _ in range(rows)]


PRESETS = {
    "circle": circle_spec,
    "torus2": torus2_spec,
    "s2": lambda length=None: s2_spec(),
    "s3": lambda length=None: s3_spec(),
}


def preset_spec(name: str, length: float = 2 * math.pi) -> MorseSpec:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    try:
        return PRESETS[name](length)
    except TypeError:
        return PRESETS[name]()


def preset_rep(spec: MorseSpec, descriptor: str, grid: int = 1024) -> Representation:
    """Parse 'trivial' | 'char:p,k' | 'char:theta' | 'regular'."""
    if descriptor == "trivial":
        return trivial_rep(spec)
    if descriptor == "regular":
        return regular_rep(spec, grid=grid)
    if descriptor.startswith("char:"):
        body = descriptor[5:]
        parts = [float(x) for x in body.split(",")]
        if len(parts) == 2 and spec.rank == 1 and float(parts[0]).is_integer():
            p, k = parts
            theta = 2 * math.pi * k / p
            return character_rep(spec, [theta])
        return character_rep(spec, parts)
    raise ValueError(f"unknown representation descriptor {descriptor!r}")
