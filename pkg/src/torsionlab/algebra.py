"""Concrete finite trace algebras and their elements.

Three realizations are supported, plus tensor products of them:

* ``scalar``        -- the ground field (trivial group),
* ``finite_group``  -- the group algebra of a finite group given by its
                       multiplication table, with the normalized trace
                       ``tr(a) = a(e)``,
* ``torus``         -- Laurent polynomials on a rank-``d`` torus, acting as
                       Fourier multipliers; the trace is the constant
                       Fourier coefficient, quadrature runs over a shifted
                       (midpoint) uniform grid so that symbols of the
                       operators in scope never hit grid nodes exactly.

An element is a finitely supported coefficient table over keys
``(g, k)`` where ``g`` indexes the finite-group part and ``k`` is a lattice
point of Z^d.  Coefficients may be complex; reported traces follow the
realified-module-over-two convention, i.e. they equal the real part.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

Key = tuple[int, tuple[int, ...]]


def cyclic_table(n: int) -> np.ndarray:
    """Multiplication table of Z/n (index i is the residue i)."""
    i = np.arange(n)
    return (i[:, None] + i[None, :]) % n


def symmetric3_table() -> np.ndarray:
    """Multiplication table of S_3 acting on {0,1,2}, elements in lex order."""
    perms = list(itertools.permutations(range(3)))
    index = {p: i for i, p in enumerate(perms)}
    tab = np.zeros((6, 6), dtype=int)
    for i, p in enumerate(perms):
        for j, q in enumerate(perms):
            comp = tuple(p[q[k]] for k in range(3))  # (p o q)
            tab[i, j] = index[comp]
    return tab


def _check_table(tab: np.ndarray) -> tuple[int, np.ndarray]:
    """Validate a group table; return (identity index, inverse table)."""
    tab = np.asarray(tab, dtype=int)
    n = tab.shape[0]
    if tab.shape != (n, n) or n == 0:
        raise ValueError("group table must be square and nonempty")
    ident = None
    for e in range(n):
        if np.array_equal(tab[e], np.arange(n)) and np.array_equal(tab[:, e], np.arange(n)):
            ident = e
            break
    if ident is None:
        raise ValueError("group table has no identity element")
    inv = np.full(n, -1, dtype=int)
    for g in range(n):
        (js,) = np.nonzero(tab[g] == ident)
        if js.size != 1:
            raise ValueError("group table element without unique inverse")
        inv[g] = js[0]
    return ident, inv


@dataclass(frozen=True, eq=False)
class TraceAlgebra:
    """A concrete finite von Neumann algebra with normalized trace.

    ``table`` is the finite-group multiplication table (``None`` for a pure
    torus or scalar algebra), ``rank`` the torus rank and ``grid`` the number
    of quadrature nodes per torus dimension.
    """

    table: np.ndarray | None = None
    rank: int = 0
    grid: tuple[int, ...] = ()
    _ident: int = field(default=0, repr=False)
    _inv: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.table is not None:
            ident, inv = _check_table(self.table)
            object.__setattr__(self, "table", np.asarray(self.table, dtype=int))
            object.__setattr__(self, "_ident", ident)
            object.__setattr__(self, "_inv", inv)
        if self.rank < 0:
            raise ValueError("torus rank must be >= 0")
        grid = tuple(int(g) for g in self.grid)
        if len(grid) == 0 and self.rank > 0:
            grid = (1024,) * self.rank
        if len(grid) != self.rank:
            raise ValueError("need one grid size per torus dimension")
        if any(g <= 0 for g in grid):
            raise ValueError("grid sizes must be positive")
        object.__setattr__(self, "grid", grid)

    # -- structure ---------------------------------------------------------

    @property
    def group_order(self) -> int:
        return 1 if self.table is None else self.table.shape[0]

    @property
    def kind(self) -> str:
        if self.table is not None and self.rank > 0:
            return "finite_group*torus"
        if self.table is not None:
            return "finite_group"
        if self.rank > 0:
            return "torus"
        return "scalar"

    @property
    def identity_key(self) -> Key:
        return (self._ident, (0,) * self.rank)

    @property
    def n_fibers(self) -> int:
        return int(np.prod(self.grid)) if self.rank else 1

    def mul_keys(self, a: Key, b: Key) -> Key:
        g = a[0] if self.table is None else int(self.table[a[0], b[0]])
        return (g, tuple(x + y for x, y in zip(a[1], b[1])))

    def inv_key(self, a: Key) -> Key:
        g = a[0] if self._inv is None else int(self._inv[a[0]])
        return (g, tuple(-x for x in a[1]))

    def grid_angles(self) -> np.ndarray:
        """Quadrature nodes, shape (n_fibers, rank); midpoint-shifted."""
        if self.rank == 0:
            return np.zeros((1, 0))
        axes = [2 * np.pi * (np.arange(g) + 0.5) / g for g in self.grid]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def left_mult_matrix(self, g: int) -> np.ndarray:
        """Permutation matrix of left translation by group element g."""
        n = self.group_order
        mat = np.zeros((n, n))
        if self.table is None:
            return np.eye(1)
        mat[self.table[g], np.arange(n)] = 1.0
        return mat

    def refined(self, factor: int = 2) -> "TraceAlgebra":
        """Same algebra with every torus grid dimension scaled by ``factor``."""
        return TraceAlgebra(self.table, self.rank, tuple(factor * g for g in self.grid))

    def __eq__(self, other):
        if not isinstance(other, TraceAlgebra):
            return NotImplemented
        if (self.table is None) != (other.table is None):
            return False
        if self.table is not None and not np.array_equal(self.table, other.table):
            return False
        return self.rank == other.rank and self.grid == other.grid

    def __hash__(self):
        tab = None if self.table is None else self.table.tobytes()
        return hash((tab, self.rank, self.grid))

    # -- elements ----------------------------------------------------------

    def element(self, coeffs: dict[Key, complex]) -> "AlgebraElement":
        return AlgebraElement(self, dict(coeffs))

    def unit(self) -> "AlgebraElement":
        return self.element({self.identity_key: 1.0})

    def delta(self, g: int) -> "AlgebraElement":
        """The group element g as an algebra element."""
        return self.element({(int(g), (0,) * self.rank): 1.0})

    def monomial(self, k) -> "AlgebraElement":
        """The torus monomial z^k (k a lattice point of Z^rank)."""
        k = tuple(int(x) for x in np.atleast_1d(k))
        if len(k) != self.rank:
            raise ValueError("lattice point has wrong rank")
        return self.element({(self._ident, k): 1.0})


def tensor_algebra(a: TraceAlgebra, b: TraceAlgebra) -> TraceAlgebra:
    """Tensor product: product group table, torus ranks add."""
    if a.table is None:
        table = b.table
    elif b.table is None:
        table = a.table
    else:
        na, nb = a.group_order, b.group_order
        ga, gb = np.divmod(np.arange(na * nb), nb)
        table = (a.table[np.ix_(ga, ga)] * nb + b.table[np.ix_(gb, gb)]).astype(int)
    return TraceAlgebra(table, a.rank + b.rank, a.grid + b.grid)


def tensor_key(a: TraceAlgebra, b: TraceAlgebra, ka: Key, kb: Key) -> Key:
    g = ka[0] * b.group_order + kb[0] if (a.table is not None and b.table is not None) else (
        ka[0] if a.table is not None else kb[0])
    return (g, ka[1] + kb[1])


class AlgebraElement:
    """Finitely supported coefficient table over an algebra's group keys."""

    __slots__ = ("algebra", "coeffs")

    def __init__(self, algebra: TraceAlgebra, coeffs: dict[Key, complex]):
        self.algebra = algebra
        self.coeffs = {k: complex(c) for k, c in coeffs.items() if c != 0}

    def __add__(self, other: "AlgebraElement") -> "AlgebraElement":
        self._same(other)
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out.get(k, 0.0) + c
        return AlgebraElement(self.algebra, out)

    def __sub__(self, other: "AlgebraElement") -> "AlgebraElement":
        return self + (-1.0) * other

    def __mul__(self, other):
        if isinstance(other, AlgebraElement):
            self._same(other)
            out: dict[Key, complex] = {}
            for ka, ca in self.coeffs.items():
                for kb, cb in other.coeffs.items():
                    k = self.algebra.mul_keys(ka, kb)
                    out[k] = out.get(k, 0.0) + ca * cb
            return AlgebraElement(self.algebra, out)
        return AlgebraElement(self.algebra, {k: complex(other) * c for k, c in self.coeffs.items()})

    __rmul__ = __mul__

    def star(self) -> "AlgebraElement":
        return AlgebraElement(
            self.algebra,
            {self.algebra.inv_key(k): np.conj(c) for k, c in self.coeffs.items()},
        )

    def trace(self) -> float:
        """Normalized trace: coefficient at the identity key (exact)."""
        return complex(self.coeffs.get(self.algebra.identity_key, 0.0)).real

    def support(self) -> list[Key]:
        return sorted(self.coeffs.keys())

    def _same(self, other: "AlgebraElement"):
        if other.algebra is not self.algebra and other.algebra != self.algebra:
            raise ValueError("elements live over different algebras")

    def __eq__(self, other):
        return isinstance(other, AlgebraElement) and self.coeffs == other.coeffs

    def __repr__(self):
        return f"AlgebraElement({self.coeffs!r})"


def trace_element(a: AlgebraElement) -> float:
    """Trace of an algebra element (coefficient at the identity, exact)."""
    return a.trace()
