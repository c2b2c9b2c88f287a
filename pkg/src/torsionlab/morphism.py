"""Morphisms between free modules over a trace algebra, and their spectra.

A morphism is an m x n matrix of algebra elements.  Its *realization* is a
stack of complex fiber matrices: a single dense ``(m|G|) x (n|G|)`` block
matrix for finite-group algebras (left regular representation entrywise),
and the evaluated symbol ``f^(phi)`` at every quadrature node for torus
algebras.  All spectral operations (traces, spectral distribution
functions, Fuglede-Kadison determinants, functional calculus) run on the
realization; fiber eigenvalues carry the uniform von Neumann weight
``1/(n_fibers * |G|)``.

Spectral calculus outputs (projectors, inverses, polar parts) are carried
as fiber-sampled morphisms without a coefficient table; algebraic inputs
keep exact coefficient tables so products and adjoints stay symbolic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .algebra import AlgebraElement, Key, TraceAlgebra, tensor_algebra, tensor_key

DEFAULT_PROJECTOR_TOL = 1e-10
DEFAULT_LAMBDA_GRID = tuple(np.geomspace(1e-8, 1.0, 16))


class Morphism:
    """A rectangular matrix over a TraceAlgebra acting between free modules."""

    def __init__(self, algebra: TraceAlgebra, rows: int, cols: int,
                 coeffs: dict[Key, np.ndarray] | None = None,
                 fibers: np.ndarray | None = None):
        self.algebra = algebra
        self.rows = int(rows)
        self.cols = int(cols)
        self.coeffs = None
        if coeffs is not None:
            self.coeffs = {}
            for k, mat in coeffs.items():
                mat = np.asarray(mat, dtype=complex).reshape(self.rows, self.cols)
                if np.any(mat != 0):
                    self.coeffs[k] = mat
        self._fibers = fibers
        if coeffs is None and fibers is None:
            raise ValueError("morphism needs coefficients or fiber data")

    # -- constructors --------------------------------------------------------

    @classmethod
    def identity(cls, algebra: TraceAlgebra, n: int) -> "Morphism":
        return cls(algebra, n, n, {algebra.identity_key: np.eye(n)})

    @classmethod
    def zero(cls, algebra: TraceAlgebra, rows: int, cols: int) -> "Morphism":
        return cls(algebra, rows, cols, {})

    @classmethod
    def from_element(cls, a: AlgebraElement) -> "Morphism":
        return cls(a.algebra, 1, 1, {k: np.array([[c]]) for k, c in a.coeffs.items()})

    @classmethod
    def from_scalar_matrix(cls, algebra: TraceAlgebra, mat) -> "Morphism":
        mat = np.asarray(mat, dtype=complex)
        return cls(algebra, mat.shape[0], mat.shape[1], {algebra.identity_key: mat})

    @classmethod
    def from_entries(cls, algebra: TraceAlgebra, entries) -> "Morphism":
        """Build from a nested list of AlgebraElement (m rows of n entries)."""
        m, n = len(entries), len(entries[0])
        coeffs: dict[Key, np.ndarray] = {}
        for i, row in enumerate(entries):
            for j, a in enumerate(row):
                for k, c in a.coeffs.items():
                    coeffs.setdefault(k, np.zeros((m, n), dtype=complex))[i, j] = \
                        coeffs[k][i, j] + c
        return cls(algebra, m, n, coeffs)

    @classmethod
    def from_fibers(cls, algebra: TraceAlgebra, rows: int, cols: int,
                    fibers: np.ndarray) -> "Morphism":
        return cls(algebra, rows, cols, fibers=np.asarray(fibers, dtype=complex))

    # -- realization ----------------------------------------------------------

    @property
    def block(self) -> int:
        """Fiber block size per free-module rank (= group order)."""
        return self.algebra.group_order

    def realization(self) -> np.ndarray:
        """Fiber stack of shape (n_fibers, rows*|G|, cols*|G|)."""
        if self._fibers is None:
            alg = self.algebra
            d = alg.group_order
            nf = alg.n_fibers
            out = np.zeros((nf, self.rows * d, self.cols * d), dtype=complex)
            if self.coeffs:
                phi = alg.grid_angles()  # (nf, rank)
                for (g, k), mat in self.coeffs.items():
                    blockm = np.kron(mat, alg.left_mult_matrix(g))
                    if alg.rank:
                        phase = np.exp(1j * (phi @ np.asarray(k, dtype=float)))
                    else:
                        phase = np.ones(1)
                    out += phase[:, None, None] * blockm[None, :, :]
            self._fibers = out
        return self._fibers

    # -- algebra ---------------------------------------------------------------

    def _binary_coeffs(self, other, op):
        out: dict[Key, np.ndarray] = {k: m.copy() for k, m in self.coeffs.items()}
        for k, m in other.coeffs.items():
            out[k] = op(out.get(k, np.zeros_like(m)), m)
        return out

    def __add__(self, other: "Morphism") -> "Morphism":
        self._compat(other, same_shape=True)
        if self.coeffs is not None and other.coeffs is not None:
            return Morphism(self.algebra, self.rows, self.cols,
                            self._binary_coeffs(other, np.add))
        return Morphism.from_fibers(self.algebra, self.rows, self.cols,
                                    self.realization() + other.realization())

    def __sub__(self, other: "Morphism") -> "Morphism":
        return self + (-1.0) * other

    def __mul__(self, c) -> "Morphism":
        c = complex(c)
        if self.coeffs is not None:
            return Morphism(self.algebra, self.rows, self.cols,
                            {k: c * m for k, m in self.coeffs.items()})
        return Morphism.from_fibers(self.algebra, self.rows, self.cols,
                                    c * self.realization())

    __rmul__ = __mul__

    def __matmul__(self, other: "Morphism") -> "Morphism":
        self._compat(other)
        if self.cols != other.rows:
            raise ValueError("shape mismatch in composition")
        if self.coeffs is not None and other.coeffs is not None:
            out: dict[Key, np.ndarray] = {}
            for ka, ma in self.coeffs.items():
                for kb, mb in other.coeffs.items():
                    k = self.algebra.mul_keys(ka, kb)
                    acc = out.get(k)
                    prod = ma @ mb
                    out[k] = prod if acc is None else acc + prod
            return Morphism(self.algebra, self.rows, other.cols, out)
        fib = np.einsum("gij,gjk->gik", self.realization(), other.realization())
        return Morphism.from_fibers(self.algebra, self.rows, other.cols, fib)

    def adjoint(self) -> "Morphism":
        if self.coeffs is not None:
            out = {self.algebra.inv_key(k): np.conj(m).T for k, m in self.coeffs.items()}
            return Morphism(self.algebra, self.cols, self.rows, out)
        fib = np.conj(np.swapaxes(self.realization(), 1, 2))
        return Morphism.from_fibers(self.algebra, self.cols, self.rows, fib)

    def shift(self, lam: float) -> "Morphism":
        """f + lam * id (square morphisms)."""
        if self.rows != self.cols:
            raise ValueError("shift needs a square morphism")
        return self + lam * Morphism.identity(self.algebra, self.rows)

    # -- norms and checks -------------------------------------------------------

    def op_norm(self) -> float:
        fib = self.realization()
        if fib.size == 0:
            return 0.0
        return float(np.linalg.norm(fib, ord=2, axis=(1, 2)).max())

    def is_selfadjoint(self, tol: float = 1e-10) -> bool:
        return (self - self.adjoint()).op_norm() <= tol * max(1.0, self.op_norm())

    def is_projector(self, tol: float = DEFAULT_PROJECTOR_TOL) -> bool:
        if self.rows != self.cols:
            return False
        herm = (self - self.adjoint()).op_norm()
        idem = (self @ self - self).op_norm()
        return herm <= tol and idem <= tol

    def _compat(self, other: "Morphism", same_shape: bool = False):
        if self.algebra != other.algebra:
            raise ValueError("morphisms live over different algebras")
        if same_shape and (self.rows, self.cols) != (other.rows, other.cols):
            raise ValueError("shape mismatch")


# -- von Neumann trace and dimension ---------------------------------------------


def vn_trace(f: Morphism) -> float:
    """Normalized trace of a square morphism.

    For coefficient morphisms this is the exact sum of diagonal identity
    coefficients; fiber-backed morphisms average fiber traces with the
    1/(n_fibers * |G|) normalization.  Complex traces are reported in the
    realified-over-two convention, i.e. by their real part.
    """
    if f.rows != f.cols:
        raise ValueError("trace needs a square morphism")
    if f.coeffs is not None:
        mat = f.coeffs.get(f.algebra.identity_key)
        return 0.0 if mat is None else float(np.trace(mat).real)
    fib = f.realization()
    tr = np.trace(fib, axis1=1, axis2=2).mean() if fib.size else 0.0
    return float(np.real(tr)) / f.block


def vn_dim(p: Morphism, tol: float = DEFAULT_PROJECTOR_TOL) -> float:
    """Von Neumann dimension of the submodule cut out by a projector."""
    if not p.is_projector(tol):
        raise ValueError("input is not an orthogonal projector")
    return vn_trace(p)


# -- spectral measures ------------------------------------------------------------


@dataclass
class SpectralMeasure:
    """Weighted eigenvalue data of a selfadjoint morphism.

    ``values`` are all fiber eigenvalues sorted ascending, each carrying
    the uniform weight ``weight``; total mass equals the module rank.
    """

    values: np.ndarray
    weight: float
    rank: int
    op_norm: float

    def counting(self, lam: float) -> float:
        """N(lam): von Neumann mass of the spectrum in (-inf, lam]."""
        return self.weight * float(np.searchsorted(self.values, lam, side="right"))

    def mass(self, a: float, b: float) -> float:
        """Mass of the spectrum in the half-open interval (a, b]."""
        lo = np.searchsorted(self.values, a, side="right")
        hi = np.searchsorted(self.values, b, side="right")
        return self.weight * float(hi - lo)

    def kernel_width(self) -> float:
        """Kernel detection band: kappa = max(1e-12, 1e-9 * op norm)."""
        return max(1e-12, 1e-9 * self.op_norm)

    def null_mass(self) -> float:
        return self.counting(self.kernel_width())

    def positive_part(self) -> np.ndarray:
        return self.values[self.values > self.kernel_width()]

    def min_positive(self) -> float:
        pos = self.positive_part()
        return float(pos[0]) if pos.size else math.inf

    def log_moment(self, cut: float, top: float = 1.0) -> float:
        """Stieltjes integral of log(mu) over the band (max(cut, kappa), top]."""
        lo = max(cut, self.kernel_width())
        sel = self.values[(self.values > lo) & (self.values <= top)]
        return self.weight * float(np.log(sel).sum()) if sel.size else 0.0

    def shifted_logdet(self, lam: float) -> float:
        """logdet of (f + lam) from the measure; includes kernel modes."""
        return self.weight * float(np.log(self.values + lam).sum())

    def heat_trace(self, t: float) -> float:
        return self.weight * float(np.exp(-t * self.values).sum())

    def resolvent_power_trace(self, lam: float, s: float) -> float:
        """tr (f + lam)^(-s)."""
        return self.weight * float(((self.values + lam) ** (-s)).sum())


def spectral_measure(f: Morphism, tol: float = 1e-10) -> SpectralMeasure:
    """Full fiber eigen-decomposition of a selfadjoint morphism."""
    if f.rows != f.cols:
        raise ValueError("spectral measure needs a square morphism")
    nrm = f.op_norm()
    if (f - f.adjoint()).op_norm() > tol * max(1.0, nrm):
        raise ValueError("morphism is not selfadjoint")
    fib = f.realization()
    vals = np.linalg.eigvalsh(fib).ravel() if fib.size else np.zeros(0)
    vals.sort()
    weight = 1.0 / (f.algebra.n_fibers * f.block)
    return SpectralMeasure(vals, weight, f.rows, nrm)


def functional_calculus(f: Morphism, fn) -> Morphism:
    """Apply a scalar function to a selfadjoint morphism fiberwise."""
    fib = f.realization()
    if fib.size == 0:
        return Morphism.from_fibers(f.algebra, f.rows, f.cols, fib.copy())
    w, v = np.linalg.eigh(fib)
    g = np.asarray(fn(w), dtype=complex)
    out = np.einsum("gik,gk,gjk->gij", v, g, np.conj(v))
    return Morphism.from_fibers(f.algebra, f.rows, f.cols, out)


def spectral_projector(f: Morphism, lo: float, hi: float) -> Morphism:
    """Spectral projector of a selfadjoint morphism onto [lo, hi]."""
    return functional_calculus(f, lambda w: ((w >= lo) & (w <= hi)).astype(float))


def kernel_projector(f: Morphism) -> Morphism:
    kappa = max(1e-12, 1e-9 * f.op_norm())
    return spectral_projector(f, -kappa, kappa)


def positive_inverse(f: Morphism) -> Morphism:
    """Inverse of a positive-definite selfadjoint morphism."""
    meas = spectral_measure(f)
    if meas.values.size and meas.values.min() <= meas.kernel_width():
        raise ValueError("morphism is not invertible")
    return functional_calculus(f, lambda w: 1.0 / w)


# -- determinants ------------------------------------------------------------------


def vn_logdet(f: Morphism, eps: float = 0.0) -> float:
    """Fuglede-Kadison log-determinant of a positive selfadjoint morphism.

    Requires the spectrum to stay above ``eps`` (and above the kernel
    band); use :func:`logdet_regularized` otherwise.
    """
    meas = spectral_measure(f)
    floor = max(eps, meas.kernel_width())
    if meas.values.size == 0:
        return 0.0
    if meas.values.min() <= floor:
        raise ValueError(
            f"spectrum reaches {meas.values.min():.3e} <= {floor:.3e}; "
            "use logdet_regularized")
    return meas.weight * float(np.log(meas.values).sum())


def vn_logdet_agmon(f: Morphism) -> float:
    """log-determinant through principal-branch logs of fiber eigenvalues.

    Valid whenever no fiber eigenvalue touches the cut (-inf, 0]; this covers
    non-selfadjoint inputs such as block-triangular morphisms with positive
    diagonal blocks.  Returns the real part (imaginary parts cancel in
    conjugate pairs for real-coefficient inputs).
    """
    fib = f.realization()
    if f.rows != f.cols:
        raise ValueError("logdet needs a square morphism")
    if fib.size == 0:
        return 0.0
    vals = np.linalg.eigvals(fib).ravel()
    bad = (np.abs(vals.imag) < 1e-12) & (vals.real <= 1e-14)
    if bad.any():
        raise ValueError("spectrum touches the branch cut (-inf, 0]")
    weight = 1.0 / (f.algebra.n_fibers * f.block)
    return weight * float(np.log(vals).sum().real)


def vn_volume(f: Morphism) -> float:
    """Vol(f) = det(f* f)^(1/2) for a morphism with f*f bounded below."""
    return math.exp(0.5 * vn_logdet(f.adjoint() @ f))


# -- regularized determinants -------------------------------------------------------


@dataclass
class RegularizedLogDet:
    """Sampled representative of a regularized log-determinant.

    ``samples[i] = logdet(f + lam_i) - null_dim * log(lam_i)``; when
    ``det_class`` holds, ``value`` is the extrapolated ``lam -> 0`` limit.
    """

    null_dim: float
    lambda_grid: np.ndarray
    samples: np.ndarray
    det_class: bool
    value: float | None
    diagnostic: float

    def to_dict(self) -> dict:
        return {
            "null_dim": self.null_dim,
            "lambda_grid": [float(x) for x in self.lambda_grid],
            "samples": [float(x) for x in self.samples],
            "det_class": self.det_class,
            "value": self.value,
            "diagnostic": self.diagnostic,
        }


def _aitken_limit(seq: np.ndarray) -> float:
    """Aitken delta-squared limit from the last three samples."""
    if len(seq) < 3:
        return float(seq[-1])
    s0, s1, s2 = seq[-3], seq[-2], seq[-1]
    d1, d2 = s1 - s0, s2 - s1
    den = d2 - d1
    if abs(den) < 1e-15 * max(1.0, abs(s2)):
        return float(s2)
    return float(s2 - d2 * d2 / den)


def _log_integral_converges(meas: SpectralMeasure, grid: np.ndarray,
                            tol: float = 5e-3) -> bool:
    """Prop.-2.15-style criterion: tail of int_{0+}^1 log(mu) dN must settle."""
    cuts = np.sort(grid[grid <= 1.0])[::-1]
    if meas.min_positive() > cuts[-1]:
        return True  # spectral gap below the probed window
    vals = np.array([meas.log_moment(c) for c in cuts])
    deltas = np.abs(np.diff(vals))
    tail = deltas[-4:]
    if tail.size == 0:
        return True
    nonincreasing = all(tail[i + 1] <= tail[i] * 1.5 for i in range(len(tail) - 1))
    return bool(nonincreasing and tail[-1] < tol)


def logdet_regularized(f: Morphism,
                       lambda_grid=DEFAULT_LAMBDA_GRID,
                       measure: SpectralMeasure | None = None) -> RegularizedLogDet:
    """Regularized log-determinant of a selfadjoint nonnegative morphism."""
    meas = measure if measure is not None else spectral_measure(f)
    if meas.values.size and meas.values.min() < -1e-8 * max(1.0, meas.op_norm):
        raise ValueError("morphism is not nonnegative")
    return logdet_regularized_measure(meas, lambda_grid)


def logdet_regularized_measure(meas: SpectralMeasure,
                               lambda_grid=DEFAULT_LAMBDA_GRID) -> RegularizedLogDet:
    grid = np.sort(np.asarray(lambda_grid, dtype=float))[::-1]  # descending to 0
    null = meas.null_mass()
    kappa = meas.kernel_width()
    pos = meas.positive_part()
    # v(lam) = logdet(f + lam) - null*log lam; kernel modes contribute
    # null*log(mu+lam) ~ null*log lam and cancel, so sum over the positive part.
    samples = np.array([meas.weight * np.log(pos + lam).sum() if pos.size else 0.0
                        for lam in grid])
    diffs = np.abs(np.diff(samples[-4:])) if len(samples) >= 2 else np.zeros(1)
    diagnostic = float(diffs.max()) if diffs.size else 0.0
    integral_ok = _log_integral_converges(meas, grid)
    sample_ok = diagnostic < 5e-2
    det_class = bool(integral_ok and sample_ok)
    value = _aitken_limit(samples) if det_class else None
    _ = kappa
    return RegularizedLogDet(float(null), grid, samples, det_class, value, diagnostic)


# -- spectral distribution and Novikov-Shubin ----------------------------------------


def spectral_distribution(f: Morphism, lam, measure: SpectralMeasure | None = None):
    """Gromov-Shubin distribution F_f(lam): mass of spec(f* f) in (0, lam].

    Kernel mass is excluded; for selfadjoint nonnegative f this satisfies
    N_f(lam) = null_dim + F(lam) with the lam -> lam^2 rescaling absorbed
    into the f*f convention.
    """
    meas = measure if measure is not None else spectral_measure(f.adjoint() @ f)
    kappa = meas.kernel_width()
    lam = np.asarray(lam, dtype=float)
    out = np.array([meas.mass(kappa, x) for x in np.atleast_1d(lam)])
    return float(out[0]) if lam.ndim == 0 else out


def novikov_shubin(f: Morphism, window: tuple[float, float] = (1e-6, 1e-2),
                   n_samples: int = 16) -> float:
    """Novikov-Shubin invariant as the log-log slope of F_f near zero.

    Returns ``math.inf`` when F vanishes on the window (isomorphism case).
    Raises if fewer than four window samples are nonzero.
    """
    meas = spectral_measure(f.adjoint() @ f)
    lams = np.geomspace(window[0], window[1], n_samples)
    F = spectral_distribution(f, lams, measure=meas)
    nz = F > 0
    if not nz.any():
        return math.inf
    if nz.sum() < 4:
        raise ValueError(
            f"only {int(nz.sum())} nonzero F-samples on the window; "
            "refine the grid or widen the window")
    slope = np.polyfit(np.log(lams[nz]), np.log(F[nz]), 1)[0]
    return float(slope)


# -- dilational comparison ------------------------------------------------------------


@dataclass
class SampledFunction:
    """A nondecreasing function sampled on a lambda grid near zero."""

    lams: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        order = np.argsort(self.lams)
        self.lams = np.asarray(self.lams, dtype=float)[order]
        self.values = np.asarray(self.values, dtype=float)[order]

    def __call__(self, lam):
        # step interpolation (left-continuous tail value below the grid)
        idx = np.searchsorted(self.lams, lam, side="right") - 1
        idx = np.clip(idx, -1, len(self.values) - 1)
        vals = np.where(idx >= 0, self.values[np.maximum(idx, 0)], 0.0)
        return vals


def dilational_compare(F: SampledFunction, G: SampledFunction,
                       c_max: float = 1e6) -> float | None:
    """Smallest C >= 1 with G(lam/C) <= F(lam) <= G(C lam) on the grid.

    Returns None when no constant up to ``c_max`` works.
    """
    if F.lams.size == 0 or G.lams.size == 0:
        raise ValueError("empty sample grids")

    def ok(c: float) -> bool:
        lam = F.lams
        return bool(np.all(G(lam / c) <= F.values + 1e-12)
                    and np.all(F.values <= G(c * lam) + 1e-12))

    if not ok(c_max):
        return None
    lo, hi = 1.0, c_max
    if ok(lo):
        return 1.0
    for _ in range(80):
        mid = math.sqrt(lo * hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return float(hi)


# -- derivatives and tensor products ----------------------------------------------------


def logdet_derivative(f: Morphism, g: Morphism) -> float:
    """d/dt logdet(f + t g) at t = 0 via tr(g f^{-1}) (f positive definite)."""
    return vn_trace(g @ positive_inverse(f))


def tensor_morphism(fa: Morphism, fb: Morphism) -> Morphism:
    """Kronecker tensor product over the tensor-product algebra."""
    if fa.coeffs is None or fb.coeffs is None:
        raise ValueError("tensor product needs coefficient morphisms")
    alg = tensor_algebra(fa.algebra, fb.algebra)
    out: dict[Key, np.ndarray] = {}
    for ka, ma in fa.coeffs.items():
        for kb, mb in fb.coeffs.items():
            k = tensor_key(fa.algebra, fb.algebra, ka, kb)
            prod = np.kron(ma, mb)
            acc = out.get(k)
            out[k] = prod if acc is None else acc + prod
    return Morphism(alg, fa.rows * fb.rows, fa.cols * fb.cols, out)


def block_morphism(algebra: TraceAlgebra, row_ranks, col_ranks, blocks) -> Morphism:
    """Assemble a block matrix of morphisms; ``blocks[i][j]`` may be None."""
    rows, cols = int(sum(row_ranks)), int(sum(col_ranks))
    roff = np.concatenate([[0], np.cumsum(row_ranks)]).astype(int)
    coff = np.concatenate([[0], np.cumsum(col_ranks)]).astype(int)
    coeffs: dict[Key, np.ndarray] = {}
    for i, brow in enumerate(blocks):
        for j, blk in enumerate(brow):
            if blk is None:
                continue
            if blk.coeffs is None:
                raise ValueError("block assembly needs coefficient morphisms")
            if (blk.rows, blk.cols) != (row_ranks[i], col_ranks[j]):
                raise ValueError("block shape mismatch")
            for k, m in blk.coeffs.items():
                tgt = coeffs.setdefault(k, np.zeros((rows, cols), dtype=complex))
                tgt[roff[i]:roff[i + 1], coff[j]:coff[j + 1]] += m
    return Morphism(algebra, rows, cols, coeffs)
