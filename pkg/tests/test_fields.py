import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvedqm import PhysicalParams, inner_product, make_grid, make_surface, partial, random_test_field
from curvedqm.fields import GridMismatch, GridTooCoarse, fd_weights, gregory_corrections, random_trig_polynomial


def modified_wavenumber(k, h, order):
    """Exact response of the centred FD first derivative to exp(i k x)."""
    w = fd_weights(tuple(range(-(order // 2), order // 2 + 1)), 1)
    offs = np.arange(-(order // 2), order // 2 + 1)
    return complex(np.sum(w * np.exp(1j * k * offs * h)) / h) / 1j


def test_fourth_order_weights_are_textbook():
    np.testing.assert_allclose(fd_weights((-2, -1, 0, 1, 2), 1), [1 / 12, -8 / 12, 0, 8 / 12, -1 / 12], atol=1e-15)
    np.testing.assert_allclose(fd_weights((-1, 0, 1), 2), [1, -2, 1], atol=1e-14)


def test_gregory_rule_integrates_low_degree_polynomials_exactly():
    chart = make_surface("plane", {"L": 1.0})
    g = make_grid(chart, 33, margin=0.0)
    w = g._axis_weights(0)
    x = g.coords[0]
    for deg in range(8):
        exact = (1 - (-1) ** (deg + 1)) / (deg + 1)
        assert np.dot(w, x**deg) == pytest.approx(exact, abs=1e-13)
    assert len(gregory_corrections(8)) == 8


def test_periodic_spacing_covers_one_period(torus128):
    for ax in (0, 1):
        assert torus128.spacing[ax] * torus128.shape[ax] == pytest.approx(2 * math.pi, abs=1e-15)


def test_exp3iphi_derivative_is_the_modified_wavenumber(torus128):
    _, ph = torus128.mesh()
    psi = torus128.field(np.exp(3j * ph))
    d = partial(psi, 1).values
    h = torus128.spacing[1]
    predicted = 1j * modified_wavenumber(3, h, 4) * psi.values
    np.testing.assert_allclose(d, predicted, atol=1e-11)
    # fourth order leaves (3h)^4/30 relative error; sixth order reaches the 1e-6 level
    assert np.abs(d - 3j * psi.values).max() == pytest.approx(3 * (3 * h) ** 4 / 30, rel=0.01)
    g6 = make_grid(torus128.chart, 128, fd_order=6)
    d6 = partial(g6.field(np.exp(3j * g6.mesh()[1])), 1).values
    assert np.abs(d6 - 3j * np.exp(3j * g6.mesh()[1])).max() < 1e-6


def test_constant_field_has_zero_derivative(sphere128):
    psi = sphere128.field(np.full(sphere128.shape, 2.5))
    for mu in (0, 1):
        assert np.abs(partial(psi, mu).values).max() < 1e-12


def test_sin_theta_derivative_vanishes_at_equator():
    chart = make_surface("torus")
    g = make_grid(chart, 64)
    th, _ = g.mesh()
    d = partial(g.field(np.sin(th)), 0).values
    k = int(np.argmin(np.abs(g.coords[0] - math.pi / 2)))
    assert g.coords[0][k] == pytest.approx(math.pi / 2)
    assert abs(d[k, 0]) < 1e-8


def test_bandlimited_derivative_matches_the_trig_polynomial_exactly(torus128):
    tp = random_trig_polynomial(torus128, seed=3, bandlimit=4)
    psi = tp.on_grid()
    XI, ZE = torus128.mesh()
    h = torus128.spacing[1]
    # each mode exp(i k phi) is differentiated to i k_eff(k) exp(i k phi)
    b0 = tp._axis_basis(0, XI)
    k = np.asarray(tp.modes[1])
    keff = np.array([modified_wavenumber(m, h, 4) for m in k])
    b1 = np.exp(1j * k * ZE[..., None]) * (1j * keff)
    predicted = np.einsum("...j,jk,...k->...", b0, tp.coeffs, b1)
    np.testing.assert_allclose(partial(psi, 1).values, predicted, atol=1e-12)
    exact = tp.evaluate(XI, ZE, (0, 1))
    err = np.abs(partial(psi, 1).values - exact).max() / np.abs(exact).max()
    assert err < 1e-3


def test_mixed_partials_commute(torus128):
    psi = random_test_field(torus128, 5)
    a = partial(partial(psi, 0), 1).values
    b = partial(partial(psi, 1), 0).values
    assert np.abs(a - b).max() < 1e-6


def test_fourth_order_convergence_on_nonperiodic_axis():
    chart = make_surface("sphere")
    errs = []
    for n in (64, 128):
        g = make_grid(chart, n)
        th, _ = g.mesh()
        d = partial(g.field(np.sin(3 * th)), 0).values
        m = g.interior(1)
        errs.append(np.abs(d - 3 * np.cos(3 * th))[m].max())
    assert math.log2(errs[0] / errs[1]) > 3.5


def test_torus_area(torus128):
    one = torus128.field(np.ones(torus128.shape))
    assert inner_product(one, one).real == pytest.approx(8 * math.pi**2, rel=1e-10)


def test_sphere_area_minus_polar_caps(sphere128):
    one = sphere128.field(np.ones(sphere128.shape))
    delta = sphere128.margin
    assert inner_product(one, one).real == pytest.approx(4 * math.pi * math.cos(delta), rel=1e-8)


def test_fourier_modes_are_orthogonal(torus128):
    _, ph = torus128.mesh()
    a = torus128.field(np.exp(2j * ph))
    b = torus128.field(np.exp(5j * ph))
    assert abs(inner_product(a, b)) < 1e-12


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_inner_product_conjugate_symmetric_and_positive(s1, s2):
    g = make_grid(make_surface("spheroid"), 32)
    a, b = random_test_field(g, s1), random_test_field(g, s2)
    ab, ba = inner_product(a, b), inner_product(b, a)
    assert abs(ab - ba.conjugate()) <= 1e-14 * max(1.0, abs(ab))
    assert inner_product(a, a).real > 0
    assert abs(inner_product(a, a).imag) < 1e-14


def test_random_fields_are_deterministic(torus64):
    a = random_test_field(torus64, 42)
    b = random_test_field(torus64, 42)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, random_test_field(torus64, 43).values)
    c = random_test_field(torus64, 7, bandlimit=0)
    assert np.ptp(np.abs(c.values)) == 0


def test_bandlimit_too_high_is_rejected(torus64):
    with pytest.raises(ValueError):
        random_test_field(torus64, 0, bandlimit=17)


def test_grid_errors(torus, torus64):
    with pytest.raises(GridTooCoarse):
        make_grid(torus, 8)
    with pytest.raises(ValueError):
        make_grid(torus, 32, fd_order=3)
    other = make_grid(torus, 32)
    a = random_test_field(torus64, 0)
    b = random_test_field(other, 0)
    with pytest.raises(GridMismatch):
        a + b
    with pytest.raises(GridMismatch):
        inner_product(a, b)


def test_physical_params_validated():
    with pytest.raises(ValueError):
        PhysicalParams(hbar=0.0)
    with pytest.raises(ValueError):
        PhysicalParams(mass=-1.0)


def test_csv_export_has_17_digits(tmp_path):
    g = make_grid(make_surface("torus"), 16)
    psi = g.field(np.exp(1j * g.mesh()[1]) / 3)
    path = tmp_path / "psi.csv"
    psi.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["theta", "phi", "real", "imag"]
    assert len(rows) == 1 + 16 * 16
    back = complex(float(rows[2][2]), float(rows[2][3]))
    assert back == psi.values[0, 1]
