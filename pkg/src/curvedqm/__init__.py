"""Constrained quantum mechanics operators on surfaces embedded in R^3."""

__version__ = "0.1.0"

from .geometry import DegenerateChart, GeomFrame, Jet2, frame_at, jet_at, mean_curvature_vector  # noqa: E402
from .surfaces import InvalidParams, MissingReference, SurfaceChart, make_surface, reference_check  # noqa: E402
from .fields import Grid, PhysicalParams, ScalarField, inner_product, make_grid, partial, random_test_field  # noqa: E402

__all__ = [
    "DegenerateChart",
    "GeomFrame",
    "Grid",
    "InvalidParams",
    "Jet2",
    "MissingReference",
    "PhysicalParams",
    "ScalarField",
    "SurfaceChart",
    "frame_at",
    "inner_product",
    "jet_at",
    "make_grid",
    "make_surface",
    "mean_curvature_vector",
    "partial",
    "random_test_field",
    "reference_check",
]
