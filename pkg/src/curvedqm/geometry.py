"""Pointwise differential geometry of a surface embedded in R^3.

Everything here is computed from a second-order jet of the embedding, so the
results are exact up to floating point rounding.  All functions accept either
a single chart point or broadcastable arrays of points; array axes come first
and the geometric index axes (chart index mu, Cartesian index i) come last.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .jets import Jet

if TYPE_CHECKING:
    from .surfaces import SurfaceChart


class DegenerateChart(ValueError):
    """Raised when r_xi x r_zeta (numerically) vanishes at a requested point."""


@dataclass(frozen=True)
class Jet2:
    """Embedding value with all first and second partial derivatives.

    ``value`` has shape (..., 3), ``d1`` (..., 2, 3) and ``d2`` (..., 2, 2, 3).
    """

    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray

    @classmethod
    def from_components(cls, comps) -> "Jet2":
        value = np.stack([c.val for c in comps], axis=-1)
        d1 = np.stack([c.grad for c in comps], axis=-1)
        d2 = np.stack([c.hess for c in comps], axis=-1)
        # symmetrise exactly; AD already gives a symmetric Hessian up to rounding
        d2 = 0.5 * (d2 + np.swapaxes(d2, -2, -3))
        return cls(value, d1, d2)


@dataclass(frozen=True)
class GeomFrame:
    """The local geometric data of the surface at one point (or an array of points).

    Index layout: ``r_cov[..., mu, i]`` is the i-th Cartesian component of
    r_mu, ``christoffel[..., gamma, mu, nu]`` is Gamma^gamma_{mu nu}.
    """

    point: np.ndarray
    position: np.ndarray
    r_cov: np.ndarray
    r_contra: np.ndarray
    metric: np.ndarray
    metric_inv: np.ndarray
    det_g: np.ndarray
    normal: np.ndarray
    second_form: np.ndarray
    christoffel: np.ndarray
    gamma_contracted: np.ndarray
    mean_curv: np.ndarray
    gauss_curv: np.ndarray

    @property
    def sqrt_g(self) -> np.ndarray:
        return np.sqrt(self.det_g)

    @property
    def shape(self) -> tuple:
        return self.det_g.shape


def jet_at(chart: "SurfaceChart", point) -> Jet2:
    """Value, gradient and Hessian of the embedding at ``point``.

    Charts that ship analytic derivatives use them; otherwise the embedding is
    pushed through second-order forward-mode AD.
    """
    xi, zeta = np.broadcast_arrays(
        np.asarray(point[0], dtype=float), np.asarray(point[1], dtype=float)
    )
    if chart.analytic_jet is not None:
        return chart.analytic_jet(xi, zeta)
    u = Jet.variable(xi, 0)
    v = Jet.variable(zeta, 1)
    comps = chart.embed(u, v)
    shape = xi.shape
    comps = [c if isinstance(c, Jet) else Jet.constant(c, shape) for c in comps]
    comps = [c + Jet.constant(0.0, shape) for c in comps]
    return Jet2.from_components(comps)


def frame_from_jet(jet: Jet2, point, eps_reg: float = 1e-12) -> GeomFrame:
    """Assemble the full GeomFrame from a jet.  ``eps_reg`` bounds |r_xi x r_zeta|."""
    r_cov = jet.d1
    metric = np.einsum("...mi,...ni->...mn", r_cov, r_cov)
    cross = np.cross(r_cov[..., 0, :], r_cov[..., 1, :])
    area = np.linalg.norm(cross, axis=-1)
    bad = area < eps_reg
    if np.any(bad):
        where = np.argwhere(np.atleast_1d(bad))[0]
        raise DegenerateChart(
            f"|r_xi x r_zeta| < {eps_reg:g} (coordinate singularity) at index {tuple(where)}"
        )
    det_g = metric[..., 0, 0] * metric[..., 1, 1] - metric[..., 0, 1] * metric[..., 1, 0]
    metric_inv = np.empty_like(metric)
    metric_inv[..., 0, 0] = metric[..., 1, 1] / det_g
    metric_inv[..., 1, 1] = metric[..., 0, 0] / det_g
    metric_inv[..., 0, 1] = -metric[..., 0, 1] / det_g
    metric_inv[..., 1, 0] = -metric[..., 1, 0] / det_g
    r_contra = np.einsum("...mn,...ni->...mi", metric_inv, r_cov)
    normal = cross / area[..., None]
    second_form = np.einsum("...i,...mni->...mn", normal, jet.d2)
    christoffel = np.einsum("...gi,...mni->...gmn", r_contra, jet.d2)
    gamma_contracted = np.einsum("...nmn->...m", christoffel)
    mean_curv = 0.5 * np.einsum("...mn,...mn->...", metric_inv, second_form)
    det_b = (
        second_form[..., 0, 0] * second_form[..., 1, 1]
        - second_form[..., 0, 1] * second_form[..., 1, 0]
    )
    return GeomFrame(
        point=np.stack(np.broadcast_arrays(*point), axis=-1),
        position=jet.value,
        r_cov=r_cov,
        r_contra=r_contra,
        metric=metric,
        metric_inv=metric_inv,
        det_g=det_g,
        normal=normal,
        second_form=second_form,
        christoffel=christoffel,
        gamma_contracted=gamma_contracted,
        mean_curv=mean_curv,
        gauss_curv=det_b / det_g,
    )


def frame_at(chart: "SurfaceChart", point) -> GeomFrame:
    """Geometric frame of ``chart`` at ``point`` (scalars or arrays).

    The unit normal is r_xi x r_zeta normalised; built-in charts order their
    parameters so this reproduces the outward normals of the closed surfaces.
    """
    xi, zeta = np.broadcast_arrays(
        np.asarray(point[0], dtype=float), np.asarray(point[1], dtype=float)
    )
    jet = jet_at(chart, (xi, zeta))
    return frame_from_jet(jet, (xi, zeta), eps_reg=1e-12 * chart.length_scale**2)


def mean_curvature_vector(frame: GeomFrame) -> np.ndarray:
    """The mean curvature vector field H n, shape (..., 3)."""
    return frame.mean_curv[..., None] * frame.normal


def contracted_curvature(frame: GeomFrame) -> np.ndarray:
    """g^{mu nu} b_{mu nu}, evaluated independently of ``mean_curv``."""
    return np.trace(frame.metric_inv @ frame.second_form, axis1=-2, axis2=-1)


def duality_defect(frame: GeomFrame) -> np.ndarray:
    """Pointwise max |r^mu . r_nu - delta^mu_nu|."""
    pairing = np.einsum("...mi,...ni->...mn", frame.r_contra, frame.r_cov)
    return np.abs(pairing - np.eye(2)).max(axis=(-2, -1))
