"""Built-in surface charts and their closed-form reference geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, Optional

import numpy as np

from . import jets as J
from .geometry import Jet2
from .report import Check, Report

TWO_PI = 2.0 * math.pi

SURFACE_NAMES = ("plane", "monge", "sphere", "spheroid", "torus", "cylinder", "catenoid")
MONGE_HEIGHTS = ("quadratic", "sinusoid")


class InvalidParams(ValueError):
    """Surface parameters violate the chart's constraints."""


class MissingReference(LookupError):
    """The chart has no closed-form reference data to compare against."""


@dataclass(frozen=True)
class SurfaceReference:
    """Closed-form quantities of a chart, all evaluable on plain arrays.

    ``factors`` returns the ordering factors (f_x, f_y, f_z) and must also be
    evaluable in jet arithmetic so that their log-derivatives are exact.
    """

    mean_curv: Callable
    normal: Callable
    factors: Optional[Callable] = None
    extra: Mapping[str, Callable] = field(default_factory=dict)


@dataclass(frozen=True)
class SurfaceChart:
    """A parametrisation (xi, zeta) -> r in R^3 with its domain metadata.

    ``embed`` returns the three Cartesian components and is written with the
    dispatching functions of :mod:`curvedqm.jets`, so it works for floats,
    arrays and jets alike.
    """

    name: str
    params: Mapping[str, float]
    domain: tuple
    periodic: tuple
    embed: Callable
    coord_names: tuple = ("xi", "zeta")
    analytic_jet: Optional[Callable] = None
    reference: Optional[SurfaceReference] = None
    revolution: bool = False
    length_scale: float = 1.0

    def __call__(self, xi, zeta) -> np.ndarray:
        comps = self.embed(np.asarray(xi, dtype=float), np.asarray(zeta, dtype=float))
        return np.stack(np.broadcast_arrays(*[np.asarray(c, dtype=float) for c in comps]), -1)

    def period(self, axis: int) -> float:
        lo, hi = self.domain[axis]
        return hi - lo


def _scale(*lengths) -> float:
    return max([abs(x) for x in lengths] + [1.0])


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise InvalidParams(msg)


def _get(params, key, default=None):
    if key in params:
        return params[key]
    if default is None:
        raise InvalidParams(f"missing parameter {key!r}")
    return default


# --- torus -------------------------------------------------------------------


def _torus(a: float, b: float, strict: bool) -> SurfaceChart:
    if strict:
        _require(b > 0, f"torus requires b > 0, got b={b}")
        _require(a > b, f"torus requires a > b (got a={a}, b={b})")
    else:
        _require(b > 0 and a > 0, f"torus requires a, b > 0 (got a={a}, b={b})")

    def embed(t, p):
        rho = a + b * J.sin(t)
        return rho * J.cos(p), rho * J.sin(p), b * J.cos(t)

    def analytic_jet(t, p):
        st, ct, sp, cp = np.sin(t), np.cos(t), np.sin(p), np.cos(p)
        rho = a + b * st
        z0 = np.zeros_like(t)
        value = np.stack([rho * cp, rho * sp, b * ct], -1)
        r_t = np.stack([b * ct * cp, b * ct * sp, -b * st], -1)
        r_p = np.stack([-rho * sp, rho * cp, z0], -1)
        r_tt = np.stack([-b * st * cp, -b * st * sp, -b * ct], -1)
        r_tp = np.stack([-b * ct * sp, b * ct * cp, z0], -1)
        r_pp = np.stack([-rho * cp, -rho * sp, z0], -1)
        d1 = np.stack([r_t, r_p], -2)
        d2 = np.stack([np.stack([r_tt, r_tp], -2), np.stack([r_tp, r_pp], -2)], -3)
        return Jet2(value, d1, d2)

    def mean_curv(t, p):
        s = np.sin(t)
        return -(a + 2 * b * s) / (2 * b * (a + b * s)) + 0 * p

    def normal(t, p):
        return np.stack(np.broadcast_arrays(np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)), -1)

    ex = 0.5 * a**2 / (a**2 - b**2) if a != b else math.inf
    e1 = 0.25 * (a - 2 * b) / (a - b) if a != b else math.inf
    e2 = 0.25 * (a + 2 * b) / (a + b)

    def factors(t, p):
        # (sin t - 1)^e2 is written as (1 - sin t)^e2; the two differ by a constant phase
        s = J.sin(t)
        fx = (a + b * s) ** ex * (1.0 + s) ** e1 * (1.0 - s) ** e2
        fz = J.sqrt(J.absolute((a + b * s) * s))
        one = 1.0 + 0.0 * p
        return fx * one, fx * one, fz * one

    ref = SurfaceReference(
        mean_curv=mean_curv,
        normal=normal,
        factors=factors,
    )
    return SurfaceChart(
        name="torus",
        params=MappingProxyType({"a": a, "b": b}),
        domain=((0.0, TWO_PI), (0.0, TWO_PI)),
        periodic=(True, True),
        embed=embed,
        coord_names=("theta", "phi"),
        analytic_jet=analytic_jet,
        reference=ref,
        revolution=True,
        length_scale=_scale(a, b),
    )


# --- spheroid / sphere ---------------------------------------------------------


def spheroid_G(a, b, t):
    eps = b / a
    return 2.0 / (1 + eps**2 + (1 - eps**2) * np.cos(2 * t))


def spheroid_F(a, b, t):
    eps = b / a
    return eps**2 * (3 + eps**2 + (1 - eps**2) * np.cos(2 * t)) * spheroid_G(a, b, t) ** 2 / 4


def _spheroid(a: float, b: float, name: str) -> SurfaceChart:
    _require(a > 0 and b > 0, f"{name} requires a > 0 and b > 0 (got a={a}, b={b})")
    eps = b / a

    def embed(t, p):
        return a * J.sin(t) * J.cos(p), a * J.sin(t) * J.sin(p), b * J.cos(t)

    def mean_curv(t, p):
        G = spheroid_G(a, b, t)
        return -b / (4 * a**2) * (3 + eps**2 + (1 - eps**2) * np.cos(2 * t)) * G**1.5 + 0 * p

    def normal(t, p):
        rg = np.sqrt(spheroid_G(a, b, t))
        return np.stack(
            np.broadcast_arrays(
                rg * eps * np.sin(t) * np.cos(p), rg * eps * np.sin(t) * np.sin(p), rg * np.cos(t)
            ),
            -1,
        )

    ex = (a**2 + b**2) / (2 * a**2)

    def factors(t, p):
        G = 2.0 / (1 + eps**2 + (1 - eps**2) * J.cos(2.0 * t))
        g4 = G**0.25
        fx = g4 * J.absolute(J.cos(t)) ** ex
        fz = g4 * J.sin(t)
        one = 1.0 + 0.0 * p
        return fx * one, fx * one, fz * one

    ref = SurfaceReference(
        mean_curv=mean_curv,
        normal=normal,
        factors=factors,
        extra={
            "G": lambda t, p: spheroid_G(a, b, t) + 0 * p,
            "F": lambda t, p: spheroid_F(a, b, t) + 0 * p,
        },
    )
    params = {"a": a} if name == "sphere" else {"a": a, "b": b}
    return SurfaceChart(
        name=name,
        params=MappingProxyType(params),
        domain=((0.0, math.pi), (0.0, TWO_PI)),
        periodic=(False, True),
        embed=embed,
        coord_names=("theta", "phi"),
        reference=ref,
        revolution=True,
        length_scale=_scale(a, b),
    )


# --- flat and Monge patches ----------------------------------------------------


def _plane(L: float) -> SurfaceChart:
    _require(L > 0, f"plane requires L > 0, got {L}")

    def embed(x, y):
        return x, y, 0.0 * x

    def analytic_jet(x, y):
        value = np.stack([x, y, np.zeros_like(x)], -1)
        d1 = np.broadcast_to(np.array([[1.0, 0, 0], [0, 1.0, 0]]), x.shape + (2, 3)).copy()
        return Jet2(value, d1, np.zeros(x.shape + (2, 2, 3)))

    ref = SurfaceReference(
        mean_curv=lambda x, y: 0.0 * x * y,
        normal=lambda x, y: np.stack(np.broadcast_arrays(0.0 * x, 0.0 * y, 1.0 + 0 * x), -1),
        factors=lambda x, y: (1.0 + 0 * x * y,) * 3,
    )
    return SurfaceChart(
        name="plane",
        params=MappingProxyType({"L": L}),
        domain=((-L, L), (-L, L)),
        periodic=(False, False),
        embed=embed,
        coord_names=("x", "y"),
        analytic_jet=analytic_jet,
        reference=ref,
        length_scale=_scale(L),
    )


def _monge(height: str, c: float, L: float) -> SurfaceChart:
    _require(height in MONGE_HEIGHTS, f"monge height must be one of {MONGE_HEIGHTS}, got {height!r}")
    _require(L > 0, f"monge requires L > 0, got {L}")
    if height == "quadratic":
        # anisotropic so the patch is not a surface of revolution
        def h(x, y):
            return 0.5 * c * (x * x + 0.5 * y * y)
    else:
        def h(x, y):
            return c * J.sin(x) * J.sin(y)

    def embed(x, y):
        return x, y, h(x, y)

    return SurfaceChart(
        name="monge",
        params=MappingProxyType({"height": height, "c": c, "L": L}),
        domain=((-L, L), (-L, L)),
        periodic=(False, False),
        embed=embed,
        coord_names=("x", "y"),
        length_scale=_scale(L, c),
    )


# --- cylinder and catenoid -----------------------------------------------------


def _cylinder(a: float, L: float) -> SurfaceChart:
    _require(a > 0 and L > 0, f"cylinder requires a > 0 and L > 0 (got a={a}, L={L})")

    def embed(p, z):
        return a * J.cos(p), a * J.sin(p), z + 0.0 * p

    def factors(p, z):
        one = 1.0 + 0.0 * z
        return (
            J.sqrt(J.absolute(J.sin(p))) * one,
            J.sqrt(J.absolute(J.cos(p))) * one,
            1.0 + 0.0 * p * z,
        )

    ref = SurfaceReference(
        mean_curv=lambda p, z: -1.0 / (2 * a) + 0 * p * z,
        normal=lambda p, z: np.stack(np.broadcast_arrays(np.cos(p) + 0 * z, np.sin(p) + 0 * z, 0 * p * z), -1),
        factors=factors,
    )
    return SurfaceChart(
        name="cylinder",
        params=MappingProxyType({"a": a, "L": L}),
        domain=((0.0, TWO_PI), (-L, L)),
        periodic=(True, False),
        embed=embed,
        coord_names=("phi", "z"),
        reference=ref,
        revolution=True,
        length_scale=_scale(a, L),
    )


def _catenoid(a: float, L: float) -> SurfaceChart:
    _require(a > 0 and L > 0, f"catenoid requires a > 0 and L > 0 (got a={a}, L={L})")

    def embed(p, v):
        rho = a * J.cosh(v / a)
        return rho * J.cos(p), rho * J.sin(p), v + 0.0 * p

    def normal(p, v):
        s = 1.0 / np.cosh(v / a)
        return np.stack(np.broadcast_arrays(np.cos(p) * s, np.sin(p) * s, -np.tanh(v / a) + 0 * p), -1)

    ref = SurfaceReference(
        mean_curv=lambda p, v: 0.0 * p * v,
        normal=normal,
        factors=lambda p, v: (1.0 + 0 * p * v,) * 3,
    )
    return SurfaceChart(
        name="catenoid",
        params=MappingProxyType({"a": a, "L": L}),
        domain=((0.0, TWO_PI), (-L, L)),
        periodic=(True, False),
        embed=embed,
        coord_names=("phi", "v"),
        reference=ref,
        revolution=True,
        length_scale=_scale(a, L),
    )


SURFACE_PARAMS = {
    "plane": ("L",),
    "monge": ("height", "c", "L"),
    "sphere": ("a",),
    "spheroid": ("a", "b"),
    "torus": ("a", "b"),
    "cylinder": ("a", "L"),
    "catenoid": ("a", "L"),
}


def make_surface(name: str, params: Optional[Mapping] = None, *, strict: bool = True) -> SurfaceChart:
    """Build one of the compiled-in charts.

    ``strict=False`` relaxes the torus constraint a > b to a > 0 so that the
    horn/spindle limit a -> 0 can be probed; such charts self-intersect and
    are only meaningful where a + b sin(theta) > 0.
    """
    params = dict(params or {})
    if name not in SURFACE_NAMES:
        raise InvalidParams(f"unknown surface {name!r}; choose from {', '.join(SURFACE_NAMES)}")
    unknown = set(params) - set(SURFACE_PARAMS[name])
    if unknown:
        raise InvalidParams(f"{name} does not take parameter(s) {', '.join(sorted(unknown))}; "
                            f"accepted: {', '.join(SURFACE_PARAMS[name])}")
    try:
        if name == "torus":
            return _torus(float(_get(params, "a", 2.0)), float(_get(params, "b", 1.0)), strict)
        if name == "spheroid":
            return _spheroid(float(_get(params, "a", 1.0)), float(_get(params, "b", 2.0)), "spheroid")
        if name == "sphere":
            a = float(_get(params, "a", 1.0))
            return _spheroid(a, a, "sphere")
        if name == "plane":
            return _plane(float(_get(params, "L", 1.0)))
        if name == "monge":
            return _monge(str(_get(params, "height", "quadratic")), float(_get(params, "c", 0.5)),
                          float(_get(params, "L", 1.0)))
        if name == "cylinder":
            return _cylinder(float(_get(params, "a", 1.0)), float(_get(params, "L", 2.0)))
        return _catenoid(float(_get(params, "a", 1.0)), float(_get(params, "L", 1.0)))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidParams):
            raise
        raise InvalidParams(f"{name}: bad parameter value ({exc})") from exc


def reference_check(chart: SurfaceChart, grid, tol: float = 1e-10) -> Report:
    """Compare frame-derived H, n (and spheroid G, F) with the closed forms on ``grid``."""
    ref = chart.reference
    if ref is None:
        raise MissingReference(f"surface {chart.name!r} has no closed-form reference")
    frames = grid.frames
    XI, ZE = grid.mesh()
    checks = []

    def add(name, err):
        k = np.unravel_index(np.argmax(err), err.shape)
        checks.append(Check.below(name, float(err[k]), tol, location=grid.location(k)))

    add("mean_curvature", np.abs(frames.mean_curv - ref.mean_curv(XI, ZE)))
    add("normal", np.linalg.norm(frames.normal - ref.normal(XI, ZE), axis=-1))
    if "G" in ref.extra:
        a = chart.params["a"]
        eps = (chart.params.get("b", a)) / a
        G_frame = a**2 * frames.metric_inv[..., 0, 0]
        F_frame = -a * frames.mean_curv * np.sqrt(G_frame) * eps
        add("G", np.abs(G_frame - ref.extra["G"](XI, ZE)))
        add("F", np.abs(F_frame - ref.extra["F"](XI, ZE)))
    return Report.build(checks, config={"surface": chart.name, **dict(chart.params)})
