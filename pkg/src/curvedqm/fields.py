"""Structured chart grids, complex scalar fields, finite differences and quadrature."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Optional

import numpy as np
from scipy.special import bernoulli

from .geometry import GeomFrame, frame_at
from .surfaces import SurfaceChart

FD_ORDERS = (2, 4, 6)
MIN_POINTS = 16


class GridTooCoarse(ValueError):
    pass


class GridMismatch(ValueError):
    pass


@dataclass(frozen=True)
class PhysicalParams:
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if not (self.hbar > 0 and self.mass > 0):
            raise ValueError(f"hbar and mass must be positive (got hbar={self.hbar}, mass={self.mass})")


# --- finite-difference weights ---------------------------------------------------


@lru_cache(maxsize=None)
def fd_weights(offsets: tuple, deriv: int = 1) -> np.ndarray:
    """Weights w with sum_k w_k f(x + o_k h) = h^deriv f^(deriv)(x) + O(h^len(offsets))."""
    o = np.asarray(offsets, dtype=float)
    m = len(o)
    A = np.vander(o, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[deriv] = math.factorial(deriv)
    return np.linalg.solve(A, rhs)


@lru_cache(maxsize=None)
def gregory_corrections(order: int) -> np.ndarray:
    """End corrections c_j (j < order) added to trapezoid weights at each boundary.

    The corrected rule integrates polynomials of degree < order exactly; the
    conditions come from the Euler-Maclaurin boundary terms.
    """
    B = bernoulli(order + 1)
    j = np.arange(order, dtype=float)
    A = np.vander(j, order, increasing=True).T
    rhs = np.array([0.0] + [B[m + 1] / (m + 1) for m in range(1, order)])
    return np.linalg.solve(A, rhs)


def _diff_axis(f: np.ndarray, axis: int, h: float, periodic: bool, order: int) -> np.ndarray:
    """First derivative along ``axis`` with a centred stencil of the given order."""
    r = order // 2
    n = f.shape[axis]
    centred = fd_weights(tuple(range(-r, r + 1)))
    f = np.moveaxis(f, axis, -1)
    out = np.zeros_like(f)
    if periodic:
        for k, w in zip(range(-r, r + 1), centred):
            if k:
                out += w * np.roll(f, -k, axis=-1)
    else:
        if n < order + 1:
            raise GridTooCoarse(f"{n} points along axis {axis} cannot carry an order-{order} stencil")
        for k, w in zip(range(-r, r + 1), centred):
            if k:
                out[..., r:n - r] += w * f[..., r + k:n - r + k]
        for i in range(r):
            left = tuple(range(-i, order + 1 - i))
            out[..., i] = np.tensordot(f[..., : order + 1], fd_weights(left), axes=([-1], [0]))
            right = tuple(-o for o in reversed(left))
            out[..., n - 1 - i] = np.tensordot(f[..., n - order - 1:], fd_weights(right), axes=([-1], [0]))
    return np.moveaxis(out / h, -1, axis)


# --- grids ------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Grid:
    """Tensor-product grid over a chart, with geometry precomputed at every node.

    Periodic axes hold ``n`` nodes covering one period without repeating the
    end point; non-periodic axes hold ``n`` nodes spanning the chart interval
    shrunk by ``margin`` at both ends.
    """

    chart: SurfaceChart
    shape: tuple
    coords: tuple
    spacing: tuple
    periodic: tuple
    margin: float
    fd_order: int
    quad_order: int = 8
    frames: GeomFrame = field(repr=False, default=None)

    @property
    def radius(self) -> int:
        return self.fd_order // 2

    def mesh(self):
        return np.meshgrid(self.coords[0], self.coords[1], indexing="ij")

    def location(self, index) -> dict:
        names = self.chart.coord_names
        return {names[0]: float(self.coords[0][index[0]]), names[1]: float(self.coords[1][index[1]])}

    def interior(self, depth: int = 1) -> np.ndarray:
        """Nodes at least ``depth`` stencil radii away from non-periodic edges."""
        mask = np.ones(self.shape, dtype=bool)
        t = depth * self.radius
        for ax in (0, 1):
            if not self.periodic[ax] and t > 0:
                sl = [slice(None), slice(None)]
                sl[ax] = slice(0, t)
                mask[tuple(sl)] = False
                sl[ax] = slice(self.shape[ax] - t, None)
                mask[tuple(sl)] = False
        return mask

    def diff(self, values: np.ndarray, axis: int) -> np.ndarray:
        ax = values.ndim - 2 + axis
        return _diff_axis(values, ax, self.spacing[axis], self.periodic[axis], self.fd_order)

    def _axis_weights(self, axis: int) -> np.ndarray:
        n, h = self.shape[axis], self.spacing[axis]
        w = np.full(n, h)
        if self.periodic[axis]:
            return w
        order = min(self.quad_order, n // 2)
        c = gregory_corrections(order)
        w[0] = w[-1] = 0.5 * h
        w[:order] += h * c
        w[n - order:] += h * c[::-1]
        return w

    @cached_property
    def weights(self) -> np.ndarray:
        """Quadrature weights including the area density sqrt(g)."""
        return np.outer(self._axis_weights(0), self._axis_weights(1)) * self.frames.sqrt_g

    def same_as(self, other: "Grid") -> bool:
        return other is self or (
            other.chart is self.chart
            and other.shape == self.shape
            and all(np.array_equal(a, b) for a, b in zip(self.coords, other.coords))
        )

    def field(self, values) -> "ScalarField":
        return ScalarField(np.asarray(values, dtype=complex), self)


def make_grid(chart: SurfaceChart, n=128, margin: float = 0.05, fd_order: int = 4,
              quad_order: int = 8) -> Grid:
    """Grid over ``chart`` with ``n`` (or ``(n_xi, n_zeta)``) nodes."""
    shape = (int(n), int(n)) if np.isscalar(n) else tuple(int(k) for k in n)
    if fd_order not in FD_ORDERS:
        raise ValueError(f"fd_order must be one of {FD_ORDERS}, got {fd_order}")
    if min(shape) < MIN_POINTS:
        raise GridTooCoarse(f"grid needs at least {MIN_POINTS} points per axis, got {shape}")
    coords, spacing = [], []
    for ax in (0, 1):
        lo, hi = chart.domain[ax]
        k = shape[ax]
        if chart.periodic[ax]:
            h = (hi - lo) / k
            c = lo + h * np.arange(k)
        else:
            if hi - lo <= 2 * margin:
                raise ValueError(f"margin {margin} leaves no room on axis {ax}")
            c = np.linspace(lo + margin, hi - margin, k)
            h = c[1] - c[0]
        coords.append(c)
        spacing.append(float(h))
    XI, ZE = np.meshgrid(coords[0], coords[1], indexing="ij")
    frames = frame_at(chart, (XI, ZE))
    return Grid(chart, shape, tuple(coords), tuple(spacing), tuple(chart.periodic), float(margin),
                int(fd_order), int(quad_order), frames)


# --- fields -----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Complex samples on a grid.

    ``values`` has shape ``grid.shape`` (optionally with leading batch axes).
    ``mask`` marks the evaluation subdomain of operators that are only defined
    on part of the grid; ``None`` means everywhere.
    """

    values: np.ndarray
    grid: Grid
    mask: Optional[np.ndarray] = None

    def _wrap(self, values, mask=None):
        if mask is None:
            mask = self.mask
        return ScalarField(values, self.grid, mask)

    def _other(self, other):
        if isinstance(other, ScalarField):
            if not self.grid.same_as(other.grid):
                raise GridMismatch("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return self._wrap(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.values - self._other(other))

    def __rsub__(self, other):
        return self._wrap(self._other(other) - self.values)

    def __neg__(self):
        return self._wrap(-self.values)

    def __mul__(self, other):
        return self._wrap(self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._wrap(self.values / self._other(other))

    def norm(self) -> float:
        return math.sqrt(inner_product(self, self).real)

    def max_abs(self, mask=None) -> float:
        m = self.grid.interior() if mask is None else mask
        return float(np.abs(self.values[..., m]).max())

    def to_csv(self, path) -> None:
        """Write node coordinates with real and imaginary parts (17 significant digits)."""
        XI, ZE = self.grid.mesh()
        names = self.grid.chart.coord_names
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([names[0], names[1], "real", "imag"])
            for a, b, v in zip(XI.ravel(), ZE.ravel(), self.values.ravel()):
                w.writerow([f"{a:.17g}", f"{b:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])


def partial(psi: ScalarField, coord: int) -> ScalarField:
    """Finite-difference derivative of ``psi`` along chart coordinate ``coord`` (0 or 1)."""
    return psi._wrap(psi.grid.diff(psi.values, coord))


def inner_product(phi: ScalarField, psi: ScalarField) -> complex:
    """<phi, psi> = sum conj(phi) psi sqrt(g) dxi dzeta over the grid."""
    if not phi.grid.same_as(psi.grid):
        raise GridMismatch("inner product of fields on different grids")
    w = phi.grid.weights
    return complex(np.sum(np.conj(phi.values) * psi.values * w, axis=(-2, -1)))


# --- seeded test fields -------------------------------------------------------------


@dataclass(frozen=True)
class TrigPolynomial:
    """Band-limited test function on a grid's chart.

    Periodic axes use Fourier modes exp(2 pi i k s / L), |k| <= bandlimit;
    non-periodic axes use powers of cos(pi t) (t the position in the chart
    interval) times a sin(pi t')^4 window that vanishes at the grid edges.
    """

    grid: Grid
    modes: tuple
    coeffs: np.ndarray
    window: bool

    def _axis_basis(self, ax: int, s, deriv: int = 0):
        g = self.grid
        lo, hi = g.chart.domain[ax]
        if g.periodic[ax]:
            L = hi - lo
            k = np.asarray(self.modes[ax], dtype=float)
            om = 2 * np.pi * k / L
            return (1j * om) ** deriv * np.exp(1j * om * (s[..., None] - lo))
        if deriv:
            raise NotImplementedError("analytic derivatives only along periodic axes")
        t = (s - lo) / (hi - lo)
        u = np.cos(np.pi * t)
        return u[..., None] ** np.asarray(self.modes[ax], dtype=float)

    def _window(self, s0, s1):
        w = 1.0
        if not self.window:
            return w
        for ax, s in ((0, s0), (1, s1)):
            if not self.grid.periodic[ax]:
                c = self.grid.coords[ax]
                t = (s - c[0]) / (c[-1] - c[0])
                w = w * np.sin(np.pi * t) ** 4
        return w

    def evaluate(self, s0, s1, d=(0, 0)) -> np.ndarray:
        b0 = self._axis_basis(0, np.asarray(s0, dtype=float), d[0])
        b1 = self._axis_basis(1, np.asarray(s1, dtype=float), d[1])
        return np.einsum("...j,jk,...k->...", b0, self.coeffs, b1) * self._window(s0, s1)

    def on_grid(self) -> ScalarField:
        XI, ZE = self.grid.mesh()
        return ScalarField(self.evaluate(XI, ZE), self.grid)


def random_trig_polynomial(grid: Grid, seed: int, bandlimit: int) -> TrigPolynomial:
    modes = []
    for ax in (0, 1):
        if grid.periodic[ax]:
            if bandlimit > grid.shape[ax] // 4:
                raise ValueError(f"bandlimit {bandlimit} exceeds n/4 on periodic axis {ax}")
            modes.append(tuple(range(-bandlimit, bandlimit + 1)))
        else:
            modes.append(tuple(range(bandlimit + 1)))
    rng = np.random.default_rng(seed)
    shape = (len(modes[0]), len(modes[1]))
    coeffs = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2 * shape[0] * shape[1])
    return TrigPolynomial(grid, tuple(modes), coeffs, window=bandlimit > 0)


def random_test_field(grid: Grid, seed: int, bandlimit: int = 2) -> ScalarField:
    """Seeded, reproducible smooth test field (constant when ``bandlimit == 0``)."""
    return random_trig_polynomial(grid, seed, bandlimit).on_grid()
