import json
import math

import numpy as np
import pytest

from curvedqm import make_grid, make_surface
from curvedqm.checks import (
    DEFAULT_TOLERANCES,
    Tolerances,
    factors_suite,
    geometry_suite,
    hermiticity_suite,
    ordering_suite,
    pole_band,
)
from curvedqm.factors import NotSeparable
from curvedqm.report import Check, Report


def test_tolerance_overrides_and_unknown_family():
    tol = Tolerances({"duality": 1e-3})
    assert tol["duality"] == 1e-3
    assert tol["weingarten"] == DEFAULT_TOLERANCES["weingarten"]
    with pytest.raises(KeyError):
        Tolerances({"bogus": 1.0})


def test_check_kinds():
    assert Check.below("a", 1e-9, 1e-8).passed
    assert not Check.below("a", math.nan, 1e-8).passed
    assert Check.above("b", 0.2, 1e-2).passed and not Check.above("b", 1e-3, 1e-2).passed
    assert Check.info("c", 123.0).passed


def test_report_json_is_sorted_and_finite():
    r = Report.build([Check.below("z", 1.0, 2.0), Check.info("a", math.inf)], config={"n": 3})
    d = json.loads(r.to_json())
    assert [c["name"] for c in d["checks"]] == ["a", "z"]
    assert d["checks"][0]["residual"] == "inf"
    assert d["passed"] is True


@pytest.mark.parametrize("name", ["torus", "sphere", "spheroid", "plane", "monge", "cylinder", "catenoid"])
def test_geometry_suite_passes_on_every_chart(name):
    rep = geometry_suite(make_grid(make_surface(name), 128))
    assert rep.passed, [(c.name, c.residual) for c in rep.checks if not c.passed]


def test_corrupted_normal_is_caught(torus128):
    rep = geometry_suite(torus128, corrupt_normal=True)
    failed = {c.name for c in rep.checks if not c.passed}
    assert {"weingarten", "laplacian_position", "normal_orthogonality"} <= failed
    assert not any(c.name.startswith("reference") for c in rep.checks)


def test_pole_band_excludes_degenerate_edges(sphere128, torus128):
    th, _ = sphere128.mesh()
    band = pole_band(sphere128, 0.3)
    assert not band[(th < 0.3)].any() and band[(th > 0.31) & (th < math.pi - 0.31)].all()
    assert pole_band(torus128, 0.3).all()


def test_ordering_suite_on_torus(torus128):
    rep = ordering_suite(torus128, "ode")
    assert rep.passed, [(c.name, c.residual) for c in rep.checks if not c.passed]
    for name in ("T", "T1", "T2", "curved"):
        assert rep[f"order_{name}"].residual > 3.5


def test_ordering_suite_constant_factors_show_the_excess(torus64):
    rep = ordering_suite(torus64, "constant")
    assert rep["constant_collapse"].passed
    assert rep["ordering_T"].residual > 1e-2


def test_excess_profile_csv(tmp_path, torus64):
    ordering_suite(torus64, "ode", csv_dir=str(tmp_path))
    rows = np.genfromtxt(tmp_path / "excess_profile.csv", delimiter=",", names=True)
    assert len(rows) > 0


def test_factors_suite_on_torus(tmp_path, torus128):
    rep = factors_suite(torus128, csv_dir=str(tmp_path))
    assert rep.passed, [(c.name, c.residual) for c in rep.checks if not c.passed]
    assert any("f_z" in note for note in rep.extra["singular"])
    data = np.genfromtxt(tmp_path / "factor_z.csv", delimiter=",", names=True)
    assert set(data.dtype.names) == {"theta", "f_z", "closed_f_z"}


def test_factors_suite_refuses_monge():
    with pytest.raises(NotSeparable):
        factors_suite(make_grid(make_surface("monge"), 32))


def test_hermiticity_suite_on_torus(torus128):
    rep = hermiticity_suite(torus128, seed=0, pairs=10)
    assert rep.passed, [(c.name, c.residual) for c in rep.checks if not c.passed]
    assert rep["bare_control_z"].kind == "above"


def test_hermiticity_suite_plane_controls_are_informational():
    rep = hermiticity_suite(make_grid(make_surface("plane"), 64), pairs=3)
    assert rep["bare_control_x"].kind == "info"
