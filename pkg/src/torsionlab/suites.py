"""Verification bundles: seeded identity checks and end-to-end comparisons.

Each suite returns a report with one pass/fail row per criterion; the CLI
and the HTTP service expose them directly, and the acceptance tests call
into the same code paths.
"""

from __future__ import annotations

import math

import numpy as np

from . import analytic, morse, witten
from .algebra import TraceAlgebra, cyclic_table, symmetric3_table
from .cochain import CochainComplex, single_map_complex, tensor_complex
from .morphism import (
    Morphism,
    block_morphism,
    functional_calculus,
    logdet_derivative,
    logdet_regularized,
    novikov_shubin,
    vn_logdet,
    vn_logdet_agmon,
    vn_trace,
    vn_volume,
)

SUITE_NAMES = ("identities", "product-formulas", "cheeger-mueller",
               "witten-gap", "det-class")


def _row(name: str, value: float, tolerance: float, extra: dict | None = None) -> dict:
    row = {"name": name, "value": float(value), "tolerance": float(tolerance),
           "passed": bool(abs(value) <= tolerance)}
    if extra:
        row.update(extra)
    return row


def _finish(name: str, rows: list[dict], meta: dict | None = None) -> dict:
    report = {"suite": name, "criteria": rows,
              "passed": all(r["passed"] for r in rows)}
    if meta:
        report.update(meta)
    return report


# -- random instances over finite group algebras -----------------------------------


def _random_morphism(rng: np.random.Generator, algebra: TraceAlgebra,
                     rows: int, cols: int) -> Morphism:
    coeffs = {}
    for g in range(algebra.group_order):
        coeffs[(g, ())] = rng.standard_normal((rows, cols)) / algebra.group_order
    return Morphism(algebra, rows, cols, coeffs)


def _random_positive(rng, algebra, n: int, floor: float = 0.5) -> Morphism:
    a = _random_morphism(rng, algebra, n, n)
    return a.adjoint() @ a + floor * Morphism.identity(algebra, n)


def _to_coefficients(f: Morphism) -> Morphism:
    """Recover the coefficient table of a fiber morphism (finite kinds only).

    Left-translation matrices are Frobenius-orthogonal, so the coefficient
    of g in block (i, j) is tr(L_g^T block_ij) / |G|.
    """
    alg = f.algebra
    if alg.rank != 0:
        raise ValueError("coefficient recovery works for finite kinds only")
    fib = f.realization()[0]
    d = alg.group_order
    coeffs = {}
    for g in range(d):
        lg = alg.left_mult_matrix(g)
        mat = np.zeros((f.rows, f.cols), dtype=complex)
        for i in range(f.rows):
            for j in range(f.cols):
                mat[i, j] = np.sum(lg * fib[i * d:(i + 1) * d, j * d:(j + 1) * d]) / d
        coeffs[(g, ())] = mat
    return Morphism(alg, f.rows, f.cols, coeffs)


def _planted_complex(rng, algebra, ranks=(1, 2, 1)) -> CochainComplex:
    """Random exact-squared three-term complex: d1 = r P with P = 1 - range(d0)."""
    d0 = _random_morphism(rng, algebra, ranks[1], ranks[0])
    dd = d0 @ d0.adjoint()
    kappa = max(1e-12, 1e-9 * dd.op_norm())
    p_perp = functional_calculus(dd, lambda w: (w <= kappa).astype(float))
    r = _random_morphism(rng, algebra, ranks[2], ranks[1])
    d1 = _to_coefficients(r @ p_perp)
    d0 = d0
    return CochainComplex(algebra, list(ranks), [d0, d1])


# -- identities suite -----------------------------------------------------------------


def identities_suite(seed: int = 0, n_instances: int = 50) -> dict:
    rng = np.random.default_rng(seed)
    algebras = [TraceAlgebra(table=cyclic_table(4)),
                TraceAlgebra(table=symmetric3_table())]
    worst = {"trace_symmetry": 0.0, "block_additivity": 0.0,
             "volume_multiplicativity": 0.0, "derivative_formula": 0.0,
             "hodge_residual": 0.0}
    for i in range(n_instances):
        alg = algebras[i % 2]
        f = _random_morphism(rng, alg, 2, 2)
        g = _random_morphism(rng, alg, 2, 2)
        worst["trace_symmetry"] = max(worst["trace_symmetry"],
                                      abs(vn_trace(f @ g) - vn_trace(g @ f)))

        f1 = _random_positive(rng, alg, 2)
        f2 = _random_positive(rng, alg, 2)
        off = _random_morphism(rng, alg, 2, 2)
        tri = block_morphism(alg, [2, 2], [2, 2], [[f1, None], [off, f2]])
        delta = vn_logdet_agmon(tri) - vn_logdet(f1) - vn_logdet(f2)
        worst["block_additivity"] = max(worst["block_additivity"], abs(delta))

        g1 = _random_morphism(rng, alg, 2, 2) + 2.0 * Morphism.identity(alg, 2)
        g2 = _random_morphism(rng, alg, 2, 2) + 2.0 * Morphism.identity(alg, 2)
        vol_delta = math.log(vn_volume(g2 @ g1)) - math.log(vn_volume(g1)) \
            - math.log(vn_volume(g2))
        worst["volume_multiplicativity"] = max(worst["volume_multiplicativity"],
                                               abs(vol_delta))

        pos = _random_positive(rng, alg, 2)
        dirn = _random_morphism(rng, alg, 2, 2)
        dirn = 0.5 * (dirn + dirn.adjoint())
        h = 1e-4
        fd = (vn_logdet(pos + h * dirn) - vn_logdet(pos + (-h) * dirn)) / (2 * h)
        from .morphism import logdet_derivative
        an = logdet_derivative(pos, dirn)
        worst["derivative_formula"] = max(worst["derivative_formula"], abs(fd - an))

        comp = _planted_complex(rng, alg)
        worst["hodge_residual"] = max(worst["hodge_residual"],
                                      comp.hodge().max_residual,
                                      comp.validate()["max_residual"])
    rows = [
        _row("trace symmetry |tr(fg) - tr(gf)|", worst["trace_symmetry"], 1e-12),
        _row("block-triangular logdet additivity", worst["block_additivity"], 1e-10),
        _row("volume multiplicativity", worst["volume_multiplicativity"], 1e-8),
        _row("derivative formula vs finite differences",
             worst["derivative_formula"], 1e-6),
        _row("Hodge residuals", worst["hodge_residual"], 1e-9),
    ]
    return _finish("identities", rows, {"instances": n_instances, "seed": seed})


# -- product formulas -------------------------------------------------------------------


def product_formulas_suite(seed: int = 0, n_pairs: int = 50) -> dict:
    rng = np.random.default_rng(seed)
    algebras = [TraceAlgebra(table=cyclic_table(4)),
                TraceAlgebra(table=symmetric3_table())]
    worst_t = 0.0
    worst_z = 0.0
    for i in range(n_pairs):
        ca = _planted_complex(rng, algebras[i % 2]).make_perfect()
        cb = _planted_complex(rng, algebras[(i + 1) % 2]).make_perfect()
        # perfectized planted complexes have isometric restricted
        # differentials; rescale one to make the torsions nontrivial
        scale = 0.5 + rng.random()
        ca = CochainComplex(ca.algebra, ca.ranks,
                            [scale * d if j == 0 else d
                             for j, d in enumerate(ca.diffs)])
        ta = ca.torsion(cross_check=False)
        tb = cb.torsion(cross_check=False)
        cc = tensor_complex(ca, cb)
        tc = cc.torsion(cross_check=False)
        rhs = tb.chi * ta.log_t + ta.chi * tb.log_t
        worst_t = max(worst_t, abs(tc.log_t - rhs))
        if i < 5:
            for lam in (0.3, 1.0):
                for s in (0.4, 1.1):
                    z = cc.zeta(lam, s)
                    zr = ca.zeta(lam, s) * tb.chi + cb.zeta(lam, s) * ta.chi
                    worst_z = max(worst_z, abs(z - zr))
    # circle x circle over the group von Neumann algebra of Z^2
    spec = morse.torus2_spec()
    rep = morse.regular_rep(spec, grid=256)
    re2 = morse.reidemeister(spec, rep)
    lhs = re2["log_t_re"]
    rhs = 0.0  # chi(S^1) = 0 twice over
    morse_diff = abs(lhs - rhs)
    an = analytic.analytic_torsion("torus2", "regular", grid=64)
    an_diff = abs(an["log_t_an"] - 0.0)
    rows = [
        _row("tensor torsion identity (perfect pairs)", worst_t, 1e-8),
        _row("zeta two-variable identity", worst_z, 1e-8),
        _row("circle x circle combinatorial/metric side", morse_diff, 4e-3),
        _row("circle x circle analytic side", an_diff, 4e-3),
    ]
    return _finish("product-formulas", rows, {"pairs": n_pairs, "seed": seed})


# -- Cheeger-Mueller ---------------------------------------------------------------------


def cheeger_mueller_suite(grid: int = 8192) -> dict:
    rows = []
    for label, theta_desc in (("theta=2pi/5", "char:5,1"), ("theta=pi/2", "char:4,1"),
                              ("theta=pi", "char:2,1")):
        rep = theta_desc
        cm = analytic.cheeger_mueller("circle", rep, length=2 * math.pi, grid=grid)
        theta = {"char:5,1": 2 * math.pi / 5, "char:4,1": math.pi / 2,
                 "char:2,1": math.pi}[rep]
        oracle = math.log(4 * math.sin(theta / 2) ** 2) / 2
        rows.append(_row(f"twisted circle {label}: |T_an - T_Re|",
                         cm["abs_difference"], 1e-6))
        rows.append(_row(f"twisted circle {label}: T_an vs closed form",
                         cm["log_t_an"] - oracle, 1e-6))
    cm = analytic.cheeger_mueller("circle", "trivial", length=2 * math.pi, grid=grid)
    rows.append(_row("trivial circle: |T_an - T_Re|", cm["abs_difference"], 1e-6))
    rows.append(_row("trivial circle: T_an - log(2pi)",
                     cm["log_t_an"] - math.log(2 * math.pi), 1e-6))
    rows.append(_row("trivial circle: T_comb", cm["log_t_comb"], 1e-9))
    rows.append(_row("trivial circle: T_met - log(2pi)",
                     cm["log_t_met"] - math.log(2 * math.pi), 1e-12))
    cm2 = analytic.cheeger_mueller("circle", "regular", length=2 * math.pi, grid=grid)
    rows.append(_row("group-vN circle: T_comb", cm2["log_t_comb"], 2e-3))
    rows.append(_row("group-vN circle: T_an", cm2["log_t_an"], 2e-3))
    rows.append(_row("group-vN circle: |T_an - T_Re|", cm2["abs_difference"], 4e-3))
    fine = analytic.analytic_torsion("circle", "regular", grid=grid)
    finer = analytic.analytic_torsion("circle", "regular", grid=2 * grid)
    rows.append(_row("group-vN circle: refinement delta",
                     fine["log_t_an"] - finer["log_t_an"], 1e-3))
    dc = analytic.det_class_report("circle", "regular", grid=grid)
    rows.append(_row("group-vN circle: det-class verdicts agree and hold",
                     0.0 if (dc["agree"] and dc["a_determinant_class"]) else 1.0,
                     0.5))
    mv = analytic.mayer_vietoris_grid(np.linspace(1.0, 2 * math.pi, 5),
                                      np.linspace(0.5, 3.0, 5))
    rows.append(_row("gluing constant cbar - 1/2",
                     mv["cbar_mean"] - 0.5, 1e-6))
    rows.append(_row("gluing constant spread over (L, m) grid",
                     mv["cbar_spread"], 1e-6))
    return _finish("cheeger-mueller", rows, {"grid": grid})


# -- Witten gap ----------------------------------------------------------------------------


def witten_gap_suite(n: int = 8192) -> dict:
    ts = np.linspace(10.0, 40.0, 7)
    report = witten.gap_report(ts, n=n, theta=math.pi)
    rows = []
    counts_ok = all(int(c) == 1 for arr in report.small_counts.values() for c in arr)
    rows.append(_row("exactly one small eigenvalue per degree",
                     0.0 if counts_ok else 1.0, 0.5))
    rows.append(_row("small-eigenvalue decay slope (want < -0.1)",
                     0.0 if report.decay_slope < -0.1 else report.decay_slope, 0.05,
                     {"slope": report.decay_slope}))
    rows.append(_row("gap ratio min g(t)/t (want >= 0.5)",
                     0.0 if report.gap_ratio_min >= 0.5 else report.gap_ratio_min,
                     0.25, {"ratio": report.gap_ratio_min}))
    worst_ho = 0.0
    for t in (50.0, 100.0):
        worst_ho = max(worst_ho, witten.ho_check(t)["max_rel_error"])
    rows.append(_row("harmonic-oscillator levels, relative", worst_ho, 1e-2))
    return _finish("witten-gap", rows, {"n": n, "t1": report.t1})


# -- determinant class -----------------------------------------------------------------------


def det_class_suite(grid: int = 8192, ns_grid: int = 131072) -> dict:
    rows = []
    alg = TraceAlgebra(rank=1, grid=(grid,))
    z = Morphism.from_element(alg.monomial(1))
    ident = Morphism.identity(alg, 1)
    f = 5.0 * ident - 2.0 * (z + z.adjoint())
    rows.append(_row("logdet(5 - 4 cos) - 2 log 2",
                     vn_logdet(f) - 2 * math.log(2.0), 1e-6))
    sym = 2.0 * ident - (z + z.adjoint())
    from .morphism import logdet_regularized
    reg = logdet_regularized(sym)
    rows.append(_row("Mahler measure of 2 - 2 cos", reg.value, 2e-3,
                     {"det_class": reg.det_class, "diagnostic": reg.diagnostic}))

    alg_ns = TraceAlgebra(rank=1, grid=(ns_grid,))
    z2 = Morphism.from_element(alg_ns.monomial(1))
    id2 = Morphism.identity(alg_ns, 1)
    d = id2 - z2
    alpha = novikov_shubin(d)
    rows.append(_row("Novikov-Shubin alpha(1 - z) - 1/2", alpha - 0.5, 0.05))
    sym2 = d.adjoint() @ d
    alpha2 = novikov_shubin(sym2)
    rows.append(_row("Novikov-Shubin alpha((2 - 2cos)^2)^ - 1/4", alpha2 - 0.25, 0.05))

    dc = analytic.det_class_report("circle", "regular", grid=grid)
    rows.append(_row("circle verdicts: a-class and c-class true and equal",
                     0.0 if (dc["agree"] and dc["a_determinant_class"]) else 1.0, 0.5))
    dc2 = analytic.det_class_report("circle", "char:5,1", grid=grid)
    rows.append(_row("twisted circle verdicts true",
                     0.0 if (dc2["agree"] and dc2["a_determinant_class"]) else 1.0, 0.5))
    bad = analytic._model_log_integral_converges(analytic.non_det_class_example())
    rows.append(_row("synthetic slow spectrum flagged non-determinant-class",
                     0.0 if not bad["converges"] else 1.0, 0.5))
    return _finish("det-class", rows, {"grid": grid, "ns_grid": ns_grid})


SUITES = {
    "identities": identities_suite,
    "product-formulas": product_formulas_suite,
    "cheeger-mueller": cheeger_mueller_suite,
    "witten-gap": witten_gap_suite,
    "det-class": det_class_suite,
}


def run_suite(name: str, seed: int = 0) -> dict:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    fn = SUITES[name]
    if name in ("identities", "product-formulas"):
        return fn(seed=seed)
    return fn()
