import math

import numpy as np
import pytest

from curvedqm import DegenerateChart, frame_at, jet_at, make_grid, make_surface, mean_curvature_vector
from curvedqm.geometry import contracted_curvature, duality_defect, frame_from_jet


def test_torus_jet_at_origin(torus):
    jet = jet_at(torus, (0.0, 0.0))
    np.testing.assert_allclose(jet.value, [2, 0, 1], atol=1e-15)
    np.testing.assert_allclose(jet.d1[0], [1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(jet.d1[1], [0, 2, 0], atol=1e-15)


def test_plane_jet_is_linear():
    jet = jet_at(make_surface("plane"), (0.3, -0.2))
    np.testing.assert_array_equal(jet.d1, [[1, 0, 0], [0, 1, 0]])
    np.testing.assert_array_equal(jet.d2, np.zeros((2, 2, 3)))


def test_spheroid_jet_at_equator():
    chart = make_surface("spheroid", {"a": 1.5, "b": 2.0})
    jet = jet_at(chart, (math.pi / 2, 0.0))
    np.testing.assert_allclose(jet.value, [1.5, 0, 0], atol=1e-15)
    np.testing.assert_allclose(jet.d1[1], [0, 1.5, 0], atol=1e-15)


@pytest.mark.parametrize("name", ["torus", "spheroid", "catenoid", "monge"])
def test_jets_agree_with_finite_differences(name):
    chart = make_surface(name)
    p = (0.7, 0.4) if name != "monge" else (0.2, -0.3)
    jet = jet_at(chart, p)
    h = 1e-3

    def r(a, b):
        return np.asarray(chart(a, b), dtype=float)

    for mu in (0, 1):
        e = np.eye(2)[mu] * h
        d1 = (-r(p[0] + 2 * e[0], p[1] + 2 * e[1]) + 8 * r(p[0] + e[0], p[1] + e[1])
              - 8 * r(p[0] - e[0], p[1] - e[1]) + r(p[0] - 2 * e[0], p[1] - 2 * e[1])) / (12 * h)
        np.testing.assert_allclose(jet.d1[mu], d1, atol=1e-10)
        d2 = (r(p[0] + e[0], p[1] + e[1]) - 2 * r(*p) + r(p[0] - e[0], p[1] - e[1])) / h**2
        np.testing.assert_allclose(jet.d2[mu, mu], d2, atol=1e-6)
    assert np.array_equal(jet.d2[0, 1], jet.d2[1, 0])


def test_torus_analytic_jet_matches_automatic_differentiation(torus):
    from dataclasses import replace

    ad_chart = replace(torus, analytic_jet=None)
    t = np.linspace(0, 2 * np.pi, 13)
    P = np.meshgrid(t, t, indexing="ij")
    a, b = jet_at(torus, P), jet_at(ad_chart, P)
    np.testing.assert_allclose(a.d1, b.d1, atol=1e-14)
    np.testing.assert_allclose(a.d2, b.d2, atol=1e-14)


def test_torus_mean_curvature_at_equator_and_principal_curvatures(torus):
    fr = frame_at(torus, (math.pi / 2, np.linspace(0, 2 * math.pi, 7)))
    np.testing.assert_allclose(fr.mean_curv, -2 / 3, atol=1e-14)
    # principal curvatures (with the outward normal) are -sin(theta)/(a + b sin(theta)) and -1/b
    shape_op = np.einsum("...mk,...kn->...mn", fr.metric_inv, fr.second_form)
    k = np.sort(np.linalg.eigvals(shape_op).real, axis=-1)
    np.testing.assert_allclose(k, np.broadcast_to([-1.0, -1 / 3], k.shape), atol=1e-14)
    np.testing.assert_allclose(fr.gauss_curv, 1 / 3, atol=1e-14)


def test_torus_normal_at_equator(torus):
    phi = np.linspace(0, 2 * math.pi, 9)
    fr = frame_at(torus, (np.full_like(phi, math.pi / 2), phi))
    np.testing.assert_allclose(fr.normal, np.stack([np.cos(phi), np.sin(phi), 0 * phi], -1), atol=1e-15)


def test_unit_sphere_frame():
    fr = frame_at(make_surface("sphere"), (np.array([0.4, 1.1, 2.5]), np.array([0.0, 1.0, 4.0])))
    np.testing.assert_allclose(fr.mean_curv, -1.0, atol=1e-14)
    np.testing.assert_allclose(fr.gauss_curv, 1.0, atol=1e-14)


def test_plane_frame_is_flat():
    fr = frame_at(make_surface("plane"), (0.1, 0.2))
    assert fr.mean_curv == 0 and fr.gauss_curv == 0
    np.testing.assert_array_equal(fr.metric, np.eye(2))
    np.testing.assert_array_equal(fr.normal, [0, 0, 1])


def test_mean_curvature_vector_examples(torus):
    assert np.array_equal(mean_curvature_vector(frame_at(make_surface("plane"), (0.0, 0.0))), [0, 0, 0])
    phi = 0.8
    np.testing.assert_allclose(mean_curvature_vector(frame_at(torus, (math.pi / 2, phi))),
                               [-2 / 3 * math.cos(phi), -2 / 3 * math.sin(phi), 0], atol=1e-15)
    np.testing.assert_allclose(mean_curvature_vector(frame_at(make_surface("sphere"), (math.pi / 2, 0.0))),
                               [-1, 0, 0], atol=1e-15)


def test_catenoid_is_minimal_but_curved():
    g = make_grid(make_surface("catenoid"), 64)
    assert np.abs(g.frames.mean_curv).max() < 1e-12
    assert g.frames.gauss_curv.max() < 0


@pytest.mark.parametrize("name", ["torus", "spheroid", "monge", "catenoid", "cylinder"])
def test_frame_invariants(name):
    g = make_grid(make_surface(name), 32)
    fr = g.frames
    assert duality_defect(fr).max() < 1e-12
    np.testing.assert_allclose(np.linalg.norm(fr.normal, axis=-1), 1.0, atol=1e-12)
    assert np.abs(np.einsum("...i,...mi->...m", fr.normal, fr.r_cov)).max() < 1e-12
    np.testing.assert_allclose(contracted_curvature(fr), 2 * fr.mean_curv, atol=1e-12)
    assert np.all(fr.det_g > 0)


def test_pole_is_a_degenerate_chart():
    with pytest.raises(DegenerateChart):
        frame_at(make_surface("spheroid"), (0.0, 0.3))


def test_degenerate_jet_rejected_with_threshold():
    jet = jet_at(make_surface("sphere"), (1e-9, 0.0))
    with pytest.raises(DegenerateChart):
        frame_from_jet(jet, (1e-9, 0.0), eps_reg=1e-6)
