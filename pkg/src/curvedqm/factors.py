"""Operator-ordering factors: residuals of R_i = H n_i and a solver for separable charts.

With R_i = x_i^mu d_mu ln f_i, the kinetic orderings reduce to the
Laplace-Beltrami operator exactly when R_i = H n_i.  On surfaces of
revolution (and the cylinder) each f_i can be taken to depend on one chart
coordinate only, which turns that condition into an ODE for ln f_i.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .fields import Grid, make_grid
from .geometry import frame_at, mean_curvature_vector
from .jets import Jet
from .ode import integrate_rate
from .operators import OrderingFactors
from .surfaces import MissingReference, SurfaceChart


class SingularODE(UserWarning):
    """The factor ODE has a pole (x_i^mu = 0 while H n_i != 0) inside the range."""


class NotSeparable(ValueError):
    """No single-coordinate ansatz solves R_i = H n_i on this chart."""


_PROBE = 41


def _probe_coords(chart: SurfaceChart, ax: int, n: int, eta: float) -> np.ndarray:
    lo, hi = chart.domain[ax]
    if chart.periodic[ax]:
        return lo + (hi - lo) * np.arange(n) / n
    span = hi - lo
    return np.linspace(lo + eta * span, hi - eta * span, n)


@dataclass(frozen=True)
class AxisProfile:
    """The one-dimensional factor equation d ln f_i / ds = rhs(s) along coordinate ``coord``."""

    chart: SurfaceChart
    axis: int
    coord: Optional[int]
    transverse: float

    def _point(self, s):
        s = np.asarray(s, dtype=float)
        t = np.full_like(s, self.transverse)
        return (s, t) if self.coord == 0 else (t, s)

    def coefficient(self, s) -> np.ndarray:
        fr = frame_at(self.chart, self._point(s))
        return fr.r_contra[..., self.coord, self.axis]

    def source(self, s) -> np.ndarray:
        fr = frame_at(self.chart, self._point(s))
        return mean_curvature_vector(fr)[..., self.axis]

    def rhs(self, s) -> np.ndarray:
        fr = frame_at(self.chart, self._point(s))
        return mean_curvature_vector(fr)[..., self.axis] / fr.r_contra[..., self.coord, self.axis]


def axis_profile(chart: SurfaceChart, axis: int, rtol: float = 1e-8) -> AxisProfile:
    """Find the chart coordinate a separable f_i must depend on.

    Returns a profile with ``coord=None`` when H n_i vanishes identically
    (f_i constant).  Raises :class:`NotSeparable` otherwise.
    """
    s0 = _probe_coords(chart, 0, _PROBE, 1e-3)
    s1 = _probe_coords(chart, 1, _PROBE, 1e-3)
    XI, ZE = np.meshgrid(s0, s1, indexing="ij")
    fr = frame_at(chart, (XI, ZE))
    src = mean_curvature_vector(fr)[..., axis]
    if np.abs(src).max() < 1e-12 / chart.length_scale:
        return AxisProfile(chart, axis, None, 0.0)
    for mu in (0, 1):
        X = fr.r_contra[..., mu, axis]
        big = np.abs(X) > 1e-6 * np.abs(X).max()
        if not big.any():
            continue
        ratio = np.where(big, src / np.where(big, X, 1.0), np.nan)
        if mu == 1:
            ratio, big, X = ratio.T, big.T, X.T
        rows = big.any(axis=1)
        if not rows.any():
            continue
        scale = np.nanmax(np.abs(ratio[rows]))
        spread = np.nanmax(np.nanmax(ratio[rows], axis=1) - np.nanmin(ratio[rows], axis=1))
        # where x_i^mu vanishes the source must vanish too (otherwise the line is a pole of the ODE;
        # poles are isolated in s, so only whole rows of small X count against separability)
        if spread <= rtol * max(scale, 1.0):
            best = int(np.argmax(np.median(np.abs(X), axis=0)))
            transverse = (s1 if mu == 0 else s0)[best]
            return AxisProfile(chart, axis, mu, float(transverse))
    raise NotSeparable(f"f_{'xyz'[axis]} on {chart.name!r} is not a function of one chart coordinate")


def _roots(prof: AxisProfile, n: int = 4001):
    """Zeros of the coefficient x_i^mu along the profile coordinate, split into poles and removable points."""
    chart, mu = prof.chart, prof.coord
    lo, hi = chart.domain[mu]
    periodic = chart.periodic[mu]
    eta = 0.0 if periodic else 1e-9 * (hi - lo)
    s = np.linspace(lo + eta, hi - eta, n)
    q = prof.coefficient(s)
    src = prof.source(s)
    qmax = np.abs(q).max()
    smax = np.abs(src).max()
    found = []
    tiny = 1e-13 * qmax
    for k in range(n - 1):
        if abs(q[k]) <= tiny:
            found.append(s[k])
        elif q[k] * q[k + 1] < 0 and abs(q[k + 1]) > tiny:
            found.append(brentq(lambda x: float(prof.coefficient(x)), s[k], s[k + 1], xtol=1e-15, rtol=4e-16))
    if abs(q[-1]) <= tiny:
        found.append(s[-1])
    if not periodic:
        # coefficient vanishing at a degenerate chart edge (e.g. the spheroid poles)
        for k, edge in ((0, lo), (-1, hi)):
            if abs(q[k]) < 1e-6 * qmax and edge not in found:
                found = [x for x in found if abs(x - edge) > 1e-6 * (hi - lo)] + [edge]
    if periodic:
        L = hi - lo
        found = sorted({round(((x - lo) % L) + lo, 13) for x in found})
        found = [x for i, x in enumerate(found) if i == 0 or x - found[i - 1] > 1e-9]
    poles, removable = [], []
    for r in sorted(found):
        probe = min(max(r, lo + 1e-9 * (hi - lo)), hi - 1e-9 * (hi - lo))
        (poles if abs(float(prof.source(probe))) > 1e-8 * smax else removable).append(float(r))
    return poles, removable


def singular_lines(chart: SurfaceChart) -> tuple:
    """Per Cartesian axis, the (coordinate index, value) pairs where the factor ODE has a pole."""
    out = []
    for i in range(3):
        try:
            prof = axis_profile(chart, i)
        except NotSeparable:
            out.append(())
            continue
        if prof.coord is None:
            out.append(())
            continue
        poles, _ = _roots(prof)
        out.append(tuple((prof.coord, p) for p in poles))
    return tuple(out)


@dataclass
class _Piece:
    lo: float
    hi: float
    sol: object

    def __call__(self, s):
        return self.sol(s)[0]


class FactorProfile:
    """Piecewise ln f_i(s): one ODE solution per interval between poles."""

    def __init__(self, pieces, period: Optional[float], origin: float):
        self.pieces = pieces
        self.period = period
        self.origin = origin

    def log(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.period is not None:
            s = self.origin + np.mod(s - self.origin, self.period)
        out = np.full(s.shape, np.nan)
        for p in self.pieces:
            for shift in (0.0,) if self.period is None else (0.0, self.period, -self.period):
                sel = (s + shift > p.lo) & (s + shift < p.hi) & np.isnan(out)
                if sel.any():
                    out[sel] = p(s[sel] + shift)
        return out

    def __call__(self, s) -> np.ndarray:
        return np.exp(self.log(s))


def _integrate(prof: AxisProfile, a: float, b: float, rtol: float, removable,
               period: Optional[float] = None) -> object:
    """ln f on (a, b) with ln f(midpoint) = 0; returns a callable over [a, b] minus endpoints."""
    mid = 0.5 * (a + b)
    width = b - a
    rem = np.asarray(removable, dtype=float)

    def rate(s):
        s = np.asarray(s, dtype=float)
        if rem.size == 0:
            return prof.rhs(s)
        d = np.abs(s[:, None] - rem[None, :])
        if period is not None:
            d = np.minimum(d % period, period - d % period)
        close = (d < 1e-7 * width).any(axis=1)
        out = np.empty_like(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            if (~close).any():
                out[~close] = prof.rhs(s[~close])
        if close.any():
            # 0/0 point: use the symmetric limit
            h = 1e-5 * width
            out[close] = 0.5 * (prof.rhs(s[close] - h) + prof.rhs(s[close] + h))
        return out

    # stay a hair off the poles; the solution diverges logarithmically there
    pad = 1e-9 * width
    fwd = integrate_rate(rate, mid, b - pad, rtol=rtol, atol=rtol)
    bwd = integrate_rate(rate, mid, a + pad, rtol=rtol, atol=rtol)

    def ln_f(s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty_like(s)
        up = s >= mid
        if up.any():
            out[up] = fwd(np.clip(s[up], mid, b - pad))
        if (~up).any():
            out[~up] = bwd(np.clip(s[~up], a + pad, mid))
        return out

    class _Sol:
        def __call__(self, s):
            return np.atleast_2d(ln_f(s))

    return _Sol()


def solve_factors_revolution(chart: SurfaceChart, grid: Grid, rtol: float = 1e-11) -> OrderingFactors:
    """Solve R_i = H n_i for f_i depending on a single chart coordinate.

    Each f_i is integrated from the middle of every pole-free interval with
    f_i = 1 there, so different intervals carry independent constants.  A
    :class:`SingularODE` warning names every pole that forced a restart.
    """
    if not chart.revolution:
        raise NotSeparable(f"{chart.name!r} is not a surface of revolution; only residual checks are available")
    XI, ZE = grid.mesh()
    values = np.ones((3,) + grid.shape)
    depends, singular, profiles = [], [], []
    for i in range(3):
        prof = axis_profile(chart, i)
        if prof.coord is None:
            depends.append(None)
            singular.append(())
            profiles.append(lambda s: np.ones_like(np.asarray(s, dtype=float)))
            continue
        mu = prof.coord
        poles, removable = _roots(prof)
        lo, hi = chart.domain[mu]
        periodic = chart.periodic[mu]
        nodes = grid.coords[mu]
        inside = poles if periodic else [p for p in poles if nodes[0] < p < nodes[-1]]
        if inside:
            warnings.warn(
                SingularODE(f"f_{'xyz'[i]} on {chart.name}: x_{'xyz'[i]}^{chart.coord_names[mu]} vanishes at "
                            + ", ".join(f"{chart.coord_names[mu]}={p:.6g}" for p in inside)
                            + "; restarting integration on each sub-interval"),
                stacklevel=2,
            )
        pieces = []
        period = (hi - lo) if periodic else None
        if periodic and not inside:
            # integrate a little past both ends of the period so every node is interior
            L = hi - lo
            sol = _integrate(prof, lo - 0.1 * L, hi + 0.1 * L, rtol, removable, period)
            mismatch = float(sol(hi)[0, 0] - sol(lo)[0, 0])
            if abs(mismatch) > 1e-8:
                warnings.warn(SingularODE(f"f_{'xyz'[i]} is not periodic (ln f jumps by {mismatch:.3g})"),
                              stacklevel=2)
            pieces.append(_Piece(lo - 0.1 * L, hi + 0.1 * L, sol))
        elif periodic:
            cuts = inside + [inside[0] + (hi - lo)]
            for a, b in zip(cuts[:-1], cuts[1:]):
                pieces.append(_Piece(a, b, _integrate(prof, a, b, rtol, removable, period)))
        else:
            # half a step of slack beyond the outer nodes, never reaching a pole or the chart edge
            ext_lo = 0.5 * min(grid.spacing[mu], nodes[0] - max([lo] + [p for p in poles if p <= nodes[0]]))
            ext_hi = 0.5 * min(grid.spacing[mu], min([hi] + [p for p in poles if p >= nodes[-1]]) - nodes[-1])
            cuts = [nodes[0] - ext_lo] + inside + [nodes[-1] + ext_hi]
            for a, b in zip(cuts[:-1], cuts[1:]):
                pieces.append(_Piece(a, b, _integrate(prof, a, b, rtol, removable, period)))
        profile = FactorProfile(pieces, (hi - lo) if periodic else None, lo)
        ln_nodes = profile.log(nodes)
        col = np.exp(ln_nodes)
        values[i] = col[:, None] if mu == 0 else col[None, :]
        depends.append(mu)
        singular.append(tuple((mu, p) for p in poles))
        profiles.append(profile)
    with np.errstate(invalid="ignore"):
        values = np.where(np.isfinite(values), values, np.nan)
    return OrderingFactors.from_values(grid, values, "ode_solved", depends_on=tuple(depends),
                                       singular=tuple(singular), profiles=tuple(profiles))


# --- residuals ------------------------------------------------------------------------------


@dataclass(frozen=True)
class FactorResidual:
    """R_i - H n_i per axis plus the scalar conditions of the three orderings.

    ``axis_mask`` (3, n0, n1) marks nodes where each per-axis residual is
    meaningful; ``mask`` is their intersection widened for the second
    derivative needed by the nonlinear conditions.
    """

    R: np.ndarray
    Hn: np.ndarray
    residual: np.ndarray
    axis_mask: np.ndarray
    symmetric_condition: np.ndarray
    tangential: np.ndarray
    t1_condition: np.ndarray
    t2_condition: np.ndarray
    mask: np.ndarray

    def axis_max(self, i: int, region: Optional[np.ndarray] = None) -> float:
        m = self.axis_mask[i] if region is None else self.axis_mask[i] & region
        return float(np.abs(self.residual[i][m]).max())


def closed_form_log_gradient(grid: Grid) -> np.ndarray:
    """d_mu ln f_i of the chart's closed-form factors by automatic differentiation, shape (3, n0, n1, 2)."""
    ref = grid.chart.reference
    if ref is None or ref.factors is None:
        raise MissingReference(f"{grid.chart.name} has no closed-form ordering factors")
    XI, ZE = grid.mesh()
    u, v = Jet.variable(XI, 0), Jet.variable(ZE, 1)
    out = np.zeros((3,) + grid.shape + (2,))
    with np.errstate(all="ignore"):
        for i, f in enumerate(ref.factors(u, v)):
            if isinstance(f, Jet):
                out[i] = f.grad / f.val[..., None]
    return out


def factor_residual(f: OrderingFactors, method: str = "fd") -> FactorResidual:
    """Evaluate R_i - H n_i and the ordering conditions for the factors ``f``.

    ``method="fd"`` differentiates ln f_i with the grid's finite differences;
    ``method="exact"`` uses automatic differentiation of the chart's closed-form
    factors (only meaningful for ``origin == "closed_form"``).
    """
    g = f.grid
    fr = g.frames
    X = fr.r_contra
    Hn = mean_curvature_vector(fr)
    safe = np.where(f.support, f.values, 1.0)
    lnf = np.log(safe)
    if method == "fd":
        grad = np.stack([g.diff(lnf, 0), g.diff(lnf, 1)], axis=-1)
        axis_mask = np.stack([_erode_support(f.support[i], g) for i in range(3)])
    elif method == "exact":
        grad = closed_form_log_gradient(g)
        axis_mask = f.support & np.isfinite(grad).all(axis=-1)
        grad = np.where(np.isfinite(grad), grad, 0.0)
    else:
        raise ValueError(f"unknown method {method!r}")
    R = np.stack([np.einsum("...m,...m->...", grad[i], X[..., :, i]) for i in range(3)])
    Hv = np.moveaxis(Hn, -1, 0)
    residual = R - Hv
    axis_mask = axis_mask & g.interior(1)[None]

    mask = _erode_support(np.all(axis_mask, axis=0), g) & g.interior(2)
    dH = [g.diff(Hv, mu) for mu in (0, 1)]
    dR = [g.diff(R, mu) for mu in (0, 1)]
    rdH = sum(np.einsum("i...,...i->...", dH[mu], X[..., mu, :]) for mu in (0, 1))
    rdR = sum(np.einsum("i...,...i->...", dR[mu], X[..., mu, :]) for mu in (0, 1))
    HH = np.sum(Hv * Hv, axis=0)
    RR = np.sum(R * R, axis=0)
    RH = np.sum(R * Hv, axis=0)
    tangential = np.stack([np.einsum("i...,...i->...", R, X[..., mu, :]) for mu in (0, 1)], axis=-1)
    return FactorResidual(
        R=R,
        Hn=Hv,
        residual=residual,
        axis_mask=axis_mask,
        symmetric_condition=rdH - rdR + HH - RR,
        tangential=tangential,
        t1_condition=-HH + RH,
        t2_condition=rdH - rdR + HH - RH,
        mask=mask,
    )


def _erode_support(mask: np.ndarray, g: Grid) -> np.ndarray:
    from .operators import _erode

    return _erode(mask, g.radius, g.periodic)


RESIDUAL_NODES = 4096
RESIDUAL_FD_ORDER = 6


def residual_grid(chart: SurfaceChart, n: int = RESIDUAL_NODES, transverse: int = 16) -> Grid:
    """A grid refined along the first chart coordinate for factor-residual checks.

    Separable factors vary along one coordinate only, but ln f_i has
    logarithmic singularities at the ends of each interval; resolving its
    derivative to 1e-8 at 0.1 from a singular line needs several thousand
    nodes and sixth-order differences.
    """
    return make_grid(chart, (n, transverse), fd_order=RESIDUAL_FD_ORDER)


def ratio_spread(profile, closed, s) -> float:
    """Relative spread max/min - 1 of profile(s) / closed(s); zero iff they differ by a constant."""
    r = np.asarray(profile(s)) / np.asarray(closed(s))
    return float(r.max() / r.min() - 1.0) if r.min() > 0 else math.inf
