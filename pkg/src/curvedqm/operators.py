"""Discrete momentum and kinetic-energy operators on a surface grid.

Every operator maps a :class:`~curvedqm.fields.ScalarField` to a new one.
Chart derivatives are finite differences (see :meth:`Grid.diff`); geometric
coefficients (r^mu, H n, sqrt(g), g^{mu nu}, Gamma_mu) are the exact node
values held by the grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .fields import Grid, PhysicalParams, ScalarField, inner_product, random_test_field
from .geometry import mean_curvature_vector

AXES = {"x": 0, "y": 1, "z": 2}
DEFAULT_PHYS = PhysicalParams()
# distance (chart units) kept from lines where an ordering factor vanishes or blows up;
# 1/f_i enters the orderings explicitly and ruins FD accuracy close to those lines
DEFAULT_CLEARANCE = 0.6


class FactorNonpositive(ValueError):
    """An ordering factor is <= 0 inside the evaluation subdomain."""


def _axis(i) -> int:
    return AXES[i] if isinstance(i, str) else int(i)


def _grad(grid: Grid, values: np.ndarray):
    return grid.diff(values, 0), grid.diff(values, 1)


def _directional(grid: Grid, values: np.ndarray, i: int, grad=None) -> np.ndarray:
    """x_i^mu d_mu applied to raw values."""
    d0, d1 = grad if grad is not None else _grad(grid, values)
    X = grid.frames.r_contra
    return X[..., 0, i] * d0 + X[..., 1, i] * d1


def _mcv(grid: Grid) -> np.ndarray:
    return mean_curvature_vector(grid.frames)


def _p(grid: Grid, values: np.ndarray, i: int, hbar: float) -> np.ndarray:
    return -1j * hbar * (_directional(grid, values, i) + _mcv(grid)[..., i] * values)


# --- first-order operators -------------------------------------------------------


def cartesian_momentum(psi: ScalarField, i, phys: PhysicalParams = DEFAULT_PHYS) -> ScalarField:
    """p_i psi = -i hbar (x_i^mu d_mu psi + H n_i psi)."""
    return psi._wrap(_p(psi.grid, psi.values, _axis(i), phys.hbar))


def bare_cartesian_derivative(psi: ScalarField, i, phys: PhysicalParams = DEFAULT_PHYS) -> ScalarField:
    """-i hbar x_i^mu d_mu psi, i.e. p_i without the constraint-induced term."""
    return psi._wrap(-1j * phys.hbar * _directional(psi.grid, psi.values, _axis(i)))


def generalized_momentum(psi: ScalarField, mu: int, phys: PhysicalParams = DEFAULT_PHYS) -> ScalarField:
    """p_mu psi = -i hbar (d_mu psi + Gamma_mu psi / 2)."""
    g = psi.grid
    gam = g.frames.gamma_contracted[..., mu]
    return psi._wrap(-1j * phys.hbar * (g.diff(psi.values, mu) + 0.5 * gam * psi.values))


# --- second-order operators --------------------------------------------------------


def laplace_beltrami(psi: ScalarField) -> ScalarField:
    """(1/sqrt g) d_mu (sqrt g g^{mu nu} d_nu psi)."""
    g = psi.grid
    fr = g.frames
    sg = fr.sqrt_g
    d = _grad(g, psi.values)
    out = 0.0
    for mu in (0, 1):
        flux = sg * (fr.metric_inv[..., mu, 0] * d[0] + fr.metric_inv[..., mu, 1] * d[1])
        out = out + g.diff(flux, mu)
    return psi._wrap(out / sg)


def kinetic_standard(psi: ScalarField, phys: PhysicalParams = DEFAULT_PHYS) -> ScalarField:
    """-(hbar^2 / 2m) Laplace-Beltrami."""
    return laplace_beltrami(psi) * (-(phys.hbar**2) / (2 * phys.mass))


def kinetic_curved(psi: ScalarField, phys: PhysicalParams = DEFAULT_PHYS) -> ScalarField:
    """(1/2m) g^{-1/4} p_mu g^{1/4} g^{mu nu} g^{1/4} p_nu g^{-1/4} psi, composed literally."""
    fr = psi.grid.frames
    q = fr.det_g**0.25
    u = psi / q
    pu = [generalized_momentum(u, nu, phys) for nu in (0, 1)]
    out = 0.0
    for mu in (0, 1):
        w = (pu[0] * fr.metric_inv[..., mu, 0] + pu[1] * fr.metric_inv[..., mu, 1]) * (q * q)
        out = generalized_momentum(w, mu, phys) + out
    return out / q / (2 * phys.mass)


def naive_p_squared(psi: ScalarField, phys: PhysicalParams = DEFAULT_PHYS) -> ScalarField:
    """(1/2m)(p_x^2 + p_y^2 + p_z^2) psi."""
    g, h = psi.grid, phys.hbar
    out = sum(_p(g, _p(g, psi.values, i, h), i, h) for i in range(3))
    return psi._wrap(out / (2 * phys.mass))


# --- ordering factors ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OrderingFactors:
    """The triple (f_x, f_y, f_z) sampled on a grid.

    ``values`` has shape (3,) + grid.shape.  ``support`` marks, per axis, the
    nodes where f_i is usable (finite and above the zero floor).  ``depends_on``
    records for separable factors which chart coordinate each f_i varies
    along (``None`` for constants), ``singular`` the coordinate values where
    the defining equation blows up, and ``profiles`` optional callables
    returning f_i along that coordinate.
    """

    values: np.ndarray
    grid: Grid
    origin: str
    support: np.ndarray
    depends_on: tuple = (None, None, None)
    singular: tuple = ((), (), ())
    profiles: tuple = (None, None, None)

    @classmethod
    def from_values(cls, grid: Grid, values, origin: str, floor: float = 1e-6, **kw) -> "OrderingFactors":
        values = np.asarray(values, dtype=float)
        values = np.broadcast_to(values, (3,) + grid.shape).copy()
        support = np.zeros(values.shape, dtype=bool)
        for i in range(3):
            v = values[i]
            fin = np.isfinite(v)
            if not fin.any():
                raise FactorNonpositive(f"f_{'xyz'[i]} has no finite samples")
            top = np.abs(v[fin]).max()
            support[i] = fin & (np.abs(v) >= floor * top)
        return cls(values, grid, origin, support, **kw)

    @classmethod
    def constant(cls, grid: Grid, value: float = 1.0) -> "OrderingFactors":
        return cls.from_values(grid, np.full((3,) + grid.shape, float(value)), "constant",
                               depends_on=(None, None, None))

    @classmethod
    def closed_form(cls, grid: Grid) -> "OrderingFactors":
        """Factors from the chart's closed-form reference, with singular lines from the chart geometry."""
        from .factors import singular_lines

        ref = grid.chart.reference
        if ref is None or ref.factors is None:
            from .surfaces import MissingReference

            raise MissingReference(f"{grid.chart.name} has no closed-form ordering factors")
        XI, ZE = grid.mesh()
        with np.errstate(all="ignore"):
            vals = np.stack([np.asarray(f, dtype=float) + 0 * XI for f in ref.factors(XI, ZE)])
        return cls.from_values(grid, vals, "closed_form", singular=singular_lines(grid.chart))

    def clear_of_singular(self, i: int, clearance: float) -> np.ndarray:
        """Nodes at chart distance >= ``clearance`` from every singular line of f_i."""
        g = self.grid
        ok = np.ones(g.shape, dtype=bool)
        if clearance <= 0:
            return ok
        coords = g.mesh()
        for ax, loc in self.singular[i]:
            dist = np.abs(coords[ax] - loc)
            if g.periodic[ax]:
                L = g.chart.period(ax)
                dist = np.minimum(dist % L, L - dist % L)
            ok &= dist >= clearance
        return ok

    def evaluation_mask(self, clearance: float = 0.0, depth: int = 2) -> np.ndarray:
        """Nodes where all three factors are usable, widened by the stencil reach and ``clearance``.

        ``clearance`` is a distance in chart coordinates kept from every
        singular line of the factor equations.
        """
        g = self.grid
        ok = np.all(self.support, axis=0)
        ok = _erode(ok, depth * g.radius, g.periodic)
        for i in range(3):
            ok &= self.clear_of_singular(i, clearance)
        return ok & g.interior(depth)

    def _checked(self, mask: np.ndarray) -> np.ndarray:
        bad = (self.values <= 0) & mask[None]
        if np.any(bad):
            i, a, b = np.argwhere(bad)[0]
            raise FactorNonpositive(
                f"f_{'xyz'[i]} = {self.values[i, a, b]:g} <= 0 at {self.grid.location((a, b))}"
            )
        # outside the support the intermediate products are discarded; keep them finite
        return np.where(self.support, self.values, 1.0)


def _erode(mask: np.ndarray, width: int, periodic) -> np.ndarray:
    out = mask.copy()
    for ax in (0, 1):
        for s in range(1, width + 1):
            for sgn in (1, -1):
                if periodic[ax]:
                    out &= np.roll(mask, sgn * s, axis=ax)
                else:
                    shifted = np.roll(mask, sgn * s, axis=ax)
                    # rolled-in edge values are not neighbours; treat as usable
                    sl = [slice(None), slice(None)]
                    sl[ax] = slice(0, s) if sgn > 0 else slice(-s, None)
                    shifted[tuple(sl)] = True
                    out &= shifted
    return out


def _ordered_kinetic(psi: ScalarField, f: OrderingFactors, phys: PhysicalParams, left: int, mid: int,
                     right: int, clearance: float) -> ScalarField:
    """(1/2m) sum_i f_i^left p_i f_i^mid p_i f_i^right psi, restricted to the evaluation mask."""
    g, h = psi.grid, phys.hbar
    mask = f.evaluation_mask(clearance)
    fv = f._checked(mask)
    out = 0.0
    for i in range(3):
        fi = fv[i]
        u = psi.values * fi**right
        u = _p(g, u, i, h) * fi**mid
        out = out + _p(g, u, i, h) * fi**left
    out = np.where(mask, out / (2 * phys.mass), 0.0)
    return ScalarField(out, g, mask)


def kinetic_T(psi: ScalarField, f: OrderingFactors, phys: PhysicalParams = DEFAULT_PHYS,
              clearance: float = DEFAULT_CLEARANCE) -> ScalarField:
    """(1/2m) sum_i (1/f_i) p_i f_i^2 p_i (1/f_i) psi."""
    return _ordered_kinetic(psi, f, phys, -1, 2, -1, clearance)


def kinetic_T1(psi: ScalarField, f: OrderingFactors, phys: PhysicalParams = DEFAULT_PHYS,
               clearance: float = DEFAULT_CLEARANCE) -> ScalarField:
    """(1/2m) sum_i (1/f_i) p_i f_i p_i psi."""
    return _ordered_kinetic(psi, f, phys, -1, 1, 0, clearance)


def kinetic_T2(psi: ScalarField, f: OrderingFactors, phys: PhysicalParams = DEFAULT_PHYS,
               clearance: float = DEFAULT_CLEARANCE) -> ScalarField:
    """(1/2m) sum_i p_i f_i p_i (1/f_i) psi."""
    return _ordered_kinetic(psi, f, phys, 0, 1, -1, clearance)


ORDERINGS = {"T": kinetic_T, "T1": kinetic_T1, "T2": kinetic_T2}


# --- Hermiticity -------------------------------------------------------------------------


def hermiticity_defect(op: Callable[[ScalarField], ScalarField], grid: Grid, seed: int = 0,
                       pairs: int = 10, bandlimit: int = 2) -> float:
    """max over seeded pairs of |<phi, A psi> - <A phi, psi>| / (|phi| |psi|)."""
    worst = 0.0
    for k in range(pairs):
        phi = random_test_field(grid, seed + 2 * k, bandlimit)
        psi = random_test_field(grid, seed + 2 * k + 1, bandlimit)
        d = inner_product(phi, op(psi)) - inner_product(op(phi), psi)
        worst = max(worst, abs(d) / (phi.norm() * psi.norm()))
    return worst


def assemble_matrix(op: Callable[[ScalarField], ScalarField], grid: Grid) -> np.ndarray:
    """Dense matrix of a linear operator on small grids (column j = op(e_j))."""
    n = grid.shape[0] * grid.shape[1]
    if n > 48 * 48:
        raise ValueError(f"dense assembly limited to 48x48 grids, got {grid.shape}")
    basis = np.eye(n, dtype=complex).reshape((n,) + grid.shape)
    cols = op(ScalarField(basis, grid)).values.reshape(n, n)
    return cols.T


def matrix_symmetry_defect(A: np.ndarray, grid: Grid) -> float:
    """||W A - (W A)^H|| / ||W A|| with W the quadrature weights; zero for a symmetric operator."""
    WA = grid.weights.ravel()[:, None] * A
    return float(np.abs(WA - WA.conj().T).max() / np.abs(WA).max())


def constraint_term(grid: Grid) -> np.ndarray:
    """H_i = H n_i at every node, shape grid.shape + (3,)."""
    return _mcv(grid)


def first_order_coefficient(grid: Grid) -> np.ndarray:
    """sum_i 2 H_i x_i^mu, the first-derivative coefficient that must vanish; shape (..., 2)."""
    return 2 * np.einsum("...i,...mi->...m", _mcv(grid), grid.frames.r_contra)


def max_error(result: ScalarField, reference: ScalarField, mask: Optional[np.ndarray] = None,
              depth: int = 2, relative: bool = True):
    """Max-norm error over the interior (and ``result.mask``), with its node index.

    With ``relative`` the error is divided by max |reference| on the same nodes.
    """
    g = result.grid
    m = g.interior(depth)
    if result.mask is not None:
        m = m & result.mask
    if mask is not None:
        m = m & mask
    if not m.any():
        raise ValueError("empty evaluation region")
    err = np.where(m, np.abs(result.values - reference.values), 0.0)
    k = np.unravel_index(np.argmax(err), err.shape)
    val = float(err[k])
    if relative:
        val /= float(np.abs(reference.values[m]).max())
    return val, k
