"""Verification suites behind the command-line front end.

Every suite returns a :class:`~curvedqm.report.Report`.  Check names are a
family name optionally followed by an axis or operator suffix
(``ode_residual_z``, ``ordering_T1``); tolerance overrides are keyed by
family.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import replace
from typing import Mapping, Optional

import numpy as np

from .factors import (
    NotSeparable,
    SingularODE,
    factor_residual,
    residual_grid,
    solve_factors_revolution,
)
from .fields import Grid, PhysicalParams, make_grid, random_test_field
from .geometry import duality_defect, jet_at, mean_curvature_vector
from .operators import (
    DEFAULT_CLEARANCE,
    DEFAULT_PHYS,
    ORDERINGS,
    OrderingFactors,
    bare_cartesian_derivative,
    cartesian_momentum,
    first_order_coefficient,
    generalized_momentum,
    hermiticity_defect,
    kinetic_curved,
    kinetic_standard,
    laplace_beltrami,
    max_error,
    naive_p_squared,
)
from .report import Check, Report, write_csv
from .surfaces import SurfaceChart, reference_check

# "above" families are negative controls / convergence orders that must exceed the value
DEFAULT_TOLERANCES = {
    # geometry identities
    "duality": 1e-10,
    "mean_curvature_trace": 1e-10,
    "normal_orthogonality": 1e-10,
    "reference": 1e-10,
    "gamma_contracted": 1e-5,
    "weingarten": 1e-5,
    "laplacian_position": 1e-5,
    # orderings
    "ordering": 1e-4,
    "curved": 1e-4,
    "order": 3.5,
    "excess": 1e-4,
    "excess_profile": 1e-4,
    "first_order_coefficient": 1e-12,
    "constant_collapse": 1e-12,
    # factors
    "ode_residual": 1e-7,
    "closed_residual": 1e-6,
    "ratio": 1e-6,
    "trivial": 1e-10,
    "identity": 1e-4,
    # hermiticity
    "hermiticity": 1e-6,
    "bare_control": 1e-2,
}

# distance (chart units) kept from chart edges where the parametrization degenerates (sphere poles)
POLE_CLEARANCE = 0.3
# distance kept from singular lines of the factor equations in residual and ratio checks
RESIDUAL_CLEARANCE = 0.1
# below this relative error the scheme is exact up to rounding and a convergence order means nothing
ROUNDING_FLOOR = 1e-11


class Tolerances:
    """Family-keyed tolerances with validated overrides."""

    def __init__(self, overrides: Optional[Mapping] = None):
        overrides = dict(overrides or {})
        unknown = set(overrides) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise KeyError(f"unknown tolerance key(s): {', '.join(sorted(unknown))}")
        self.values = {**DEFAULT_TOLERANCES, **{k: float(v) for k, v in overrides.items()}}

    def __getitem__(self, family: str) -> float:
        return self.values[family]


def _peak(grid: Grid, err: np.ndarray, region: Optional[np.ndarray] = None):
    err = np.where(region, err, 0.0) if region is not None else err
    k = np.unravel_index(np.argmax(err), err.shape)
    return float(err[k]), grid.location(k)


def degenerate_edges(chart: SurfaceChart) -> list:
    """(axis, edge value) pairs on non-periodic axes where |r_xi x r_zeta| vanishes."""
    out = []
    for ax in (0, 1):
        if chart.periodic[ax]:
            continue
        other = chart.domain[1 - ax]
        t = np.linspace(other[0], other[1], 9)
        for edge in chart.domain[ax]:
            s = np.full_like(t, edge)
            jet = jet_at(chart, (s, t) if ax == 0 else (t, s))
            area = np.linalg.norm(np.cross(jet.d1[..., 0, :], jet.d1[..., 1, :]), axis=-1)
            if area.min() < 1e-8 * chart.length_scale**2:
                out.append((ax, float(edge)))
    return out


def pole_band(grid: Grid, clearance: float = POLE_CLEARANCE) -> np.ndarray:
    """Nodes at least ``clearance`` away from degenerate chart edges."""
    ok = np.ones(grid.shape, dtype=bool)
    coords = grid.mesh()
    for ax, edge in degenerate_edges(grid.chart):
        ok &= np.abs(coords[ax] - edge) >= clearance
    return ok


def _corrupted(frames):
    """Tilt the normal into the tangent plane by a position-dependent angle (fault injection)."""
    r0 = frames.r_cov[..., 0, :]
    t = r0 / np.linalg.norm(r0, axis=-1, keepdims=True)
    tilt = 0.1 * np.sin(frames.point[..., 0])[..., None] + 0.05
    n = frames.normal + tilt * t
    return replace(frames, normal=n / np.linalg.norm(n, axis=-1, keepdims=True))


# --- geometry -----------------------------------------------------------------------------


def geometry_suite(grid: Grid, tolerances: Optional[Mapping] = None, corrupt_normal: bool = False,
                   pole_clearance: float = POLE_CLEARANCE) -> Report:
    """Identity checks: duality, Gamma_mu, trace of b, H.r^mu, Weingarten, Laplacian of the position."""
    tol = Tolerances(tolerances)
    chart = grid.chart
    fr = _corrupted(grid.frames) if corrupt_normal else grid.frames
    fd_region = grid.interior(1) & pole_band(grid, pole_clearance)
    checks = []

    def below(name, family, err, region=None, note=""):
        val, loc = _peak(grid, err, region)
        checks.append(Check.below(name, val, tol[family], loc, note))

    below("duality", "duality", duality_defect(fr))

    shape_op = np.einsum("...mk,...kn->...mn", fr.metric_inv, fr.second_form)
    principal_sum = np.linalg.eigvals(shape_op).real.sum(axis=-1)
    below("mean_curvature_trace", "mean_curvature_trace", np.abs(principal_sum - 2 * fr.mean_curv),
          note="sum of principal curvatures vs 2H")

    Hn = fr.mean_curv[..., None] * fr.normal
    below("normal_orthogonality", "normal_orthogonality",
          np.abs(np.einsum("...i,...mi->...m", Hn, fr.r_contra)).max(axis=-1))

    sg = fr.sqrt_g
    gam = np.stack([grid.diff(sg, mu) / sg for mu in (0, 1)], axis=-1)
    below("gamma_contracted", "gamma_contracted", np.abs(gam - fr.gamma_contracted).max(axis=-1), fd_region)

    dn = [np.stack([grid.diff(fr.normal[..., k], mu) for k in range(3)], axis=-1) for mu in (0, 1)]
    trace = sum(np.einsum("...k,...k->...", fr.r_contra[..., mu, :], dn[mu]) for mu in (0, 1))
    below("weingarten", "weingarten", np.abs(trace + 2 * fr.mean_curv), fd_region,
          note="r^mu . d_mu n = -2H")

    lap = np.stack([laplace_beltrami(grid.field(fr.position[..., k])).values.real for k in range(3)], axis=-1)
    below("laplacian_position", "laplacian_position", np.linalg.norm(0.5 * lap - Hn, axis=-1), fd_region,
          note="1/2 Laplacian of r vs H n")

    if chart.reference is not None and not corrupt_normal:
        ref = reference_check(chart, grid, tol=tol["reference"])
        checks += [replace(c, name="reference_" + c.name) for c in ref.checks]
    return Report.build(checks)


def geometry_tables(grid: Grid) -> dict:
    """Per-node columns of the frame quantities, keyed by CSV file stem."""
    fr = grid.frames
    names = grid.chart.coord_names
    XI, ZE = grid.mesh()
    base = {names[0]: XI, names[1]: ZE}
    tables = {
        "mean_curvature": {**base, "H": fr.mean_curv},
        "normal": {**base, **{f"n_{c}": fr.normal[..., k] for k, c in enumerate("xyz")}},
        "sqrt_g": {**base, "sqrt_g": fr.sqrt_g},
    }
    for mu, nm in enumerate(names):
        tables[f"r_{nm}"] = {**base, **{f"{c}": fr.r_cov[..., mu, k] for k, c in enumerate("xyz")}}
        tables[f"r^{nm}"] = {**base, **{f"{c}": fr.r_contra[..., mu, k] for k, c in enumerate("xyz")}}
    return tables


def write_tables(tables: dict, csv_dir: str) -> None:
    os.makedirs(csv_dir, exist_ok=True)
    for stem, cols in tables.items():
        safe = stem.replace("^", "_up_")
        write_csv(os.path.join(csv_dir, f"{safe}.csv"), list(cols), list(cols.values()))


# --- orderings ----------------------------------------------------------------------------


def choose_factors(grid: Grid, kind: str) -> OrderingFactors:
    if kind == "ode":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SingularODE)
            return solve_factors_revolution(grid.chart, grid)
    if kind == "closed":
        return OrderingFactors.closed_form(grid)
    if kind == "constant":
        return OrderingFactors.constant(grid)
    raise ValueError(f"unknown factor kind {kind!r}; choose ode, closed or constant")


def nonvanishing_test_field(grid: Grid, seed: int, bandlimit: int = 2):
    """2 + r / max|r| for a seeded band-limited r: bounded away from zero, so pointwise ratios are defined."""
    r = random_test_field(grid, seed, bandlimit)
    return grid.field(2.0 + r.values / np.abs(r.values).max())


def _ordering_errors(grid: Grid, kind: str, seed: int, phys: PhysicalParams, clearance: float,
                     bandlimit: int) -> dict:
    f = choose_factors(grid, kind)
    psi = random_test_field(grid, seed, bandlimit)
    ref = kinetic_standard(psi, phys)
    mask = f.evaluation_mask(clearance)
    out = {name: max_error(op(psi, f, phys, clearance=clearance), ref) for name, op in ORDERINGS.items()}
    out["curved"] = max_error(kinetic_curved(psi, phys), ref, mask=mask)
    return out


def ordering_suite(grid: Grid, factors: str = "ode", seed: int = 0, phys: PhysicalParams = DEFAULT_PHYS,
                   clearance: float = DEFAULT_CLEARANCE, tolerances: Optional[Mapping] = None,
                   bandlimit: int = 2, refine: bool = True, csv_dir: Optional[str] = None) -> Report:
    """Compare T, T1, T2 and the g^{1/4} form with the Laplacian; check the H^2 excess of p^2.

    With ``refine`` the ordering errors are also measured on a grid with half
    the nodes per axis to estimate the convergence order.
    """
    tol = Tolerances(tolerances)
    chart = grid.chart
    checks = []
    H = grid.frames.mean_curv
    flat = float(np.abs(H).max()) < 1e-12
    errs = _ordering_errors(grid, factors, seed, phys, clearance, bandlimit)
    # constant factors reproduce the Laplacian only on minimal surfaces
    informative = factors != "constant" or flat
    for name, (err, k) in errs.items():
        fam = "curved" if name == "curved" else "ordering"
        label = "curved" if name == "curved" else f"ordering_{name}"
        if informative or name == "curved":
            checks.append(Check.below(label, err, tol[fam], grid.location(k)))
        else:
            checks.append(Check.info(label, err, grid.location(k), "constant factors on a curved surface"))
    if refine:
        coarse = make_grid(chart, tuple(s // 2 for s in grid.shape), margin=grid.margin, fd_order=grid.fd_order)
        cerrs = _ordering_errors(coarse, factors, seed, phys, clearance, bandlimit)
        for name in errs:
            e_fine, e_coarse = errs[name][0], cerrs[name][0]
            order = float(np.log2(e_coarse / e_fine)) if e_fine > 0 and e_coarse > 0 else float("inf")
            label = f"order_{name}"
            if e_fine < ROUNDING_FLOOR:
                checks.append(Check.info(label, order, note="error at rounding level; order undefined"))
            elif informative or name == "curved":
                checks.append(Check.above(label, order, tol["order"], note=f"{coarse.shape} -> {grid.shape}"))
            else:
                checks.append(Check.info(label, order, note=f"{coarse.shape} -> {grid.shape}"))

    # excess term: (p^2 psi + hbar^2/2m Lap psi) / psi against hbar^2/2m H^2
    c = phys.hbar**2 / (2 * phys.mass)
    region = grid.interior(2) & pole_band(grid)
    psi = nonvanishing_test_field(grid, seed, bandlimit)
    ratio = (naive_p_squared(psi, phys).values + c * laplace_beltrami(psi).values) / psi.values
    expected = c * H**2
    scale = np.abs(expected[region]).max() if not flat else c
    err, loc = _peak(grid, np.abs(ratio - expected) / scale, region)
    checks.append(Check.below("excess", err, tol["excess"], loc, "pointwise ratio, relative to max hbar^2 H^2/2m"))

    one = grid.field(np.ones(grid.shape))
    profile = naive_p_squared(one, phys).values.real / c
    err, loc = _peak(grid, np.abs(profile - H**2) / (np.abs(H[region]).max() ** 2 if not flat else 1.0), region)
    checks.append(Check.below("excess_profile", err, tol["excess_profile"], loc, "p^2 1 vs H^2"))

    err, loc = _peak(grid, np.abs(first_order_coefficient(grid)).max(axis=-1))
    checks.append(Check.below("first_order_coefficient", err, tol["first_order_coefficient"], loc))

    if factors == "constant":
        f = OrderingFactors.constant(grid)
        r = random_test_field(grid, seed, bandlimit)
        naive = naive_p_squared(r, phys)
        worst = max(max_error(op(r, f, phys, clearance=0.0), naive, depth=0)[0] for op in ORDERINGS.values())
        checks.append(Check.below("constant_collapse", worst, tol["constant_collapse"], note="T, T1, T2 vs p^2"))

    if csv_dir:
        names = chart.coord_names
        XI, ZE = grid.mesh()
        os.makedirs(csv_dir, exist_ok=True)
        write_csv(os.path.join(csv_dir, "excess_profile.csv"), [names[0], names[1], "measured", "analytic"],
                  [XI, ZE, profile, H**2])
    return Report.build(checks, extra={"factors": factors, "clearance": clearance})


# --- factors ------------------------------------------------------------------------------


def _closed_on(chart: SurfaceChart, i: int, coord: int, s: np.ndarray) -> np.ndarray:
    zeros = np.zeros_like(s)
    pt = (s, zeros) if coord == 0 else (zeros, s)
    with np.errstate(all="ignore"):
        return np.abs(np.asarray(chart.reference.factors(*pt)[i], dtype=float) + 0 * s)


def factors_suite(grid: Grid, tolerances: Optional[Mapping] = None, seed: int = 0,
                  phys: PhysicalParams = DEFAULT_PHYS, clearance: float = DEFAULT_CLEARANCE,
                  csv_dir: Optional[str] = None) -> Report:
    """Solve the factor ODEs, check R_i = H n_i, compare with closed forms, test the orderings."""
    tol = Tolerances(tolerances)
    chart = grid.chart
    if not chart.revolution:
        raise NotSeparable(f"{chart.name!r} is not a surface of revolution; the factor solver does not apply")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SingularODE)
        f = solve_factors_revolution(chart, grid)
    notes = sorted({str(w.message) for w in caught if issubclass(w.category, SingularODE)})
    checks = []

    fine = residual_grid(chart)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SingularODE)
        f_fine = solve_factors_revolution(chart, fine)
    res = factor_residual(f_fine)
    for i, c in enumerate("xyz"):
        region = f_fine.clear_of_singular(i, RESIDUAL_CLEARANCE)
        err, loc = _peak(fine, np.abs(res.residual[i]), res.axis_mask[i] & region)
        checks.append(Check.below(f"ode_residual_{c}", err, tol["ode_residual"], loc,
                                  f"{fine.shape} grid, FD order {fine.fd_order}"))

    ref = chart.reference
    has_closed = ref is not None and ref.factors is not None
    if has_closed:
        fc = OrderingFactors.closed_form(fine)
        cres = factor_residual(fc)
        for i, c in enumerate("xyz"):
            region = fc.clear_of_singular(i, RESIDUAL_CLEARANCE)
            err, loc = _peak(fine, np.abs(cres.residual[i]), cres.axis_mask[i] & region)
            if c == "z":
                checks.append(Check.below("closed_residual_z", err, tol["closed_residual"], loc))
            else:
                checks.append(Check.info(f"closed_residual_{c}", err, loc, "report-only"))

    curves = []
    for i, c in enumerate("xyz"):
        mu = f.depends_on[i]
        if mu is None:
            lnf = np.log(f.values[i])
            d = max(float(np.abs(grid.diff(lnf, ax)).max()) for ax in (0, 1))
            checks.append(Check.below(f"trivial_{c}", d, tol["trivial"], note="f constant: H n_i vanishes"))
            continue
        if not has_closed:
            continue
        worst = 0.0
        lo, hi = chart.domain[mu]
        for piece in f.profiles[i].pieces:
            a, b = piece.lo + RESIDUAL_CLEARANCE, piece.hi - RESIDUAL_CLEARANCE
            if not chart.periodic[mu]:
                a, b = max(a, lo + RESIDUAL_CLEARANCE), min(b, hi - RESIDUAL_CLEARANCE)
            if b <= a:
                continue
            s = np.linspace(a, b, 2001)
            d = piece(s) - np.log(_closed_on(chart, i, mu, s))
            worst = max(worst, float(np.expm1(d.max() - d.min())))
        checks.append(Check.below(f"ratio_{c}", worst, tol["ratio"],
                                  note="solved / closed-form factor, relative spread per interval"))

    psi = random_test_field(grid, seed)
    ref_T = kinetic_standard(psi, phys)
    for name, op in ORDERINGS.items():
        err, k = max_error(op(psi, f, phys, clearance=clearance), ref_T)
        checks.append(Check.below(f"identity_{name}", err, tol["identity"], grid.location(k)))

    if csv_dir:
        os.makedirs(csv_dir, exist_ok=True)
        for i, c in enumerate("xyz"):
            mu = f.depends_on[i] if f.depends_on[i] is not None else 0
            s = grid.coords[mu]
            line = f.values[i].take(0, axis=1 - mu)
            cols = {chart.coord_names[mu]: s, f"f_{c}": line}
            if has_closed:
                cols[f"closed_f_{c}"] = _closed_on(chart, i, mu, s)
            write_csv(os.path.join(csv_dir, f"factor_{c}.csv"), list(cols), list(cols.values()))
    return Report.build(checks, extra={"singular": notes, "clearance": clearance})


# --- Hermiticity --------------------------------------------------------------------------


def hermiticity_suite(grid: Grid, seed: int = 0, pairs: int = 10, phys: PhysicalParams = DEFAULT_PHYS,
                      tolerances: Optional[Mapping] = None, bandlimit: int = 2) -> Report:
    """Seeded Hermiticity defects of the momenta and Laplacians; the bare derivative as a negative control."""
    tol = Tolerances(tolerances)
    names = grid.chart.coord_names
    ops = {f"p_{c}": (lambda i: lambda p: cartesian_momentum(p, i, phys))(i) for i, c in enumerate("xyz")}
    ops.update({f"p_{names[mu]}": (lambda mu: lambda p: generalized_momentum(p, mu, phys))(mu) for mu in (0, 1)})
    ops["laplacian"] = laplace_beltrami
    ops["kinetic_curved"] = lambda p: kinetic_curved(p, phys)
    checks = []
    for name, op in ops.items():
        d = hermiticity_defect(op, grid, seed, pairs, bandlimit)
        checks.append(Check.below(f"hermiticity_{name}", d, tol["hermiticity"]))
    Hn = mean_curvature_vector(grid.frames)
    for i, c in enumerate("xyz"):
        d = hermiticity_defect(lambda p: bare_cartesian_derivative(p, i, phys), grid, seed, pairs, bandlimit)
        if np.abs(Hn[..., i]).max() < 1e-12:
            checks.append(Check.info(f"bare_control_{c}", d, note="H n_i = 0: bare derivative is already Hermitian"))
        else:
            checks.append(Check.above(f"bare_control_{c}", d, tol["bare_control"],
                                      note="negative control: must be far from Hermitian"))
    return Report.build(checks, extra={"pairs": pairs})
