import math
import warnings

import numpy as np
import pytest

from curvedqm import make_grid, make_surface, mean_curvature_vector
from curvedqm.factors import (
    NotSeparable,
    SingularODE,
    axis_profile,
    factor_residual,
    ratio_spread,
    residual_grid,
    singular_lines,
    solve_factors_revolution,
)
from curvedqm.operators import OrderingFactors


def torus_fz(t, a=2.0, b=1.0):
    return np.sqrt(np.abs((a + b * np.sin(t)) * np.sin(t)))


def test_axis_profiles_on_torus(torus):
    assert axis_profile(torus, 0).coord == 0
    assert axis_profile(torus, 2).coord == 0


def test_constant_axes_are_detected():
    cyl = make_surface("cylinder")
    assert axis_profile(cyl, 2).coord is None
    cat = make_surface("catenoid")
    assert all(axis_profile(cat, i).coord is None for i in range(3))


def test_non_revolution_chart_is_rejected():
    monge = make_surface("monge")
    with pytest.raises(NotSeparable):
        solve_factors_revolution(monge, make_grid(monge, 16))


def test_singular_lines_of_torus_and_sphere(torus, sphere):
    lines = singular_lines(torus)
    assert sorted(round(v, 9) for _, v in lines[2]) == pytest.approx([0.0, math.pi])
    # x_x^theta vanishes on theta = pi/2 and 3pi/2, but for a = 2b so does H at 3pi/2
    assert [v for _, v in lines[0]] == pytest.approx([math.pi / 2])
    wide = make_surface("torus", {"a": 3.0, "b": 1.0})
    assert [v for _, v in singular_lines(wide)[0]] == pytest.approx([math.pi / 2, 3 * math.pi / 2])
    assert [round(v, 9) for _, v in singular_lines(sphere)[0]] == pytest.approx([math.pi / 2])


def test_singular_restart_is_announced(torus):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SingularODE)
        solve_factors_revolution(torus, make_grid(torus, 32))
    text = [str(w.message) for w in caught]
    assert any(t.startswith("f_z on torus") and "theta=0," in t and "theta=3.14159" in t for t in text)
    assert any(t.startswith("f_x on torus") and "theta=1.5708" in t for t in text)


def test_torus_fz_matches_closed_form_up_to_a_constant(solved):
    f = solved("torus", 128)
    s = np.linspace(0.1, math.pi - 0.1, 501)
    assert ratio_spread(f.profiles[2], torus_fz, s) < 1e-6
    s = np.linspace(math.pi + 0.1, 2 * math.pi - 0.1, 501)
    assert ratio_spread(f.profiles[2], torus_fz, s) < 1e-6


def test_sphere_factors_reduce_to_cos_and_sin(solved):
    f = solved("sphere", 128)
    s = np.linspace(0.1, math.pi / 2 - 0.1, 301)
    assert ratio_spread(f.profiles[0], np.cos, s) < 1e-6
    s = np.linspace(0.1, math.pi - 0.1, 301)
    assert ratio_spread(f.profiles[2], np.sin, s) < 1e-6


def test_catenoid_factors_are_constant(solved):
    f = solved("catenoid", 64)
    assert f.depends_on == (None, None, None)
    assert np.all(f.values == 1.0)


@pytest.mark.parametrize("name,tol", [("torus", 1e-8), ("spheroid", 1e-6), ("sphere", 1e-6), ("cylinder", 1e-6)])
def test_closed_form_residuals_on_refined_grid(name, tol):
    g = residual_grid(make_surface(name))
    fc = OrderingFactors.closed_form(g)
    res = factor_residual(fc)
    for i in range(3):
        region = fc.clear_of_singular(i, 0.1)
        assert res.axis_max(i, region) < tol


@pytest.mark.parametrize("name", ["torus", "spheroid"])
def test_exact_differentiation_of_closed_forms(name):
    g = make_grid(make_surface(name), 64)
    fc = OrderingFactors.closed_form(g)
    res = factor_residual(fc, method="exact")
    for i in range(3):
        assert res.axis_max(i, fc.clear_of_singular(i, 0.05)) < 1e-10


def test_ode_solution_residual_on_refined_grid(torus):
    g = residual_grid(torus)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SingularODE)
        f = solve_factors_revolution(torus, g)
    res = factor_residual(f)
    for i in range(3):
        assert res.axis_max(i, f.clear_of_singular(i, 0.1)) < 1e-7


def test_constant_factors_leave_minus_hn(torus64):
    res = factor_residual(OrderingFactors.constant(torus64))
    Hn = mean_curvature_vector(torus64.frames)
    m = res.axis_mask[0]
    np.testing.assert_allclose(res.residual[0][m], -Hn[..., 0][m], atol=1e-15)
    np.testing.assert_allclose(res.residual[2][m], -Hn[..., 2][m], atol=1e-15)


def test_symmetric_condition_holds_for_solved_factors(solved):
    f = solved("torus", 128)
    res = factor_residual(f)
    m = res.mask & f.clear_of_singular(0, 0.6) & f.clear_of_singular(2, 0.6)
    assert np.abs(res.tangential[m]).max() < 1e-3
    assert np.abs(res.symmetric_condition[m]).max() < 1e-2


def test_unknown_residual_method(torus64):
    with pytest.raises(ValueError):
        factor_residual(OrderingFactors.constant(torus64), method="spectral")
