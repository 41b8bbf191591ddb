import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from flexbie.geometry import (
    TrigCurve,
    build_panelization,
    check_disjoint,
    curve_circle,
    curve_droplet,
    curve_starfish,
    frenet_at,
    inside,
)

# droplet perimeter, mpmath quadrature at 30 digits (trapezoid rule agrees)
DROPLET_LENGTH = 9.8053583054741220894


def test_circle_weights_sum_to_circumference():
    p = build_panelization(curve_circle(), 8, 16)
    np.testing.assert_allclose(p.weights.sum(), 2 * np.pi, rtol=1e-12)
    np.testing.assert_allclose(p.length, 2 * np.pi, rtol=1e-12)


@pytest.mark.parametrize("n_panels,order", [(2, 4), (5, 8), (8, 16)])
def test_circle_curvature_is_one(n_panels, order):
    p = build_panelization(curve_circle(), n_panels, order)
    np.testing.assert_allclose(p.kappa, 1.0, atol=1e-13)
    np.testing.assert_allclose(p.dkappa, 0.0, atol=1e-12)


def test_droplet_finest_grid_has_256_nodes():
    p = build_panelization(curve_droplet(), 16, 16)
    assert p.n == 256
    assert p.pts.shape == (256, 2)


@pytest.mark.parametrize("t,expected", [(0.0, (2.0, -0.4)), (np.pi / 2, (0.0, 1.0)), (np.pi, (-2.0, -0.4))])
def test_droplet_positions(t, expected):
    np.testing.assert_allclose(curve_droplet().position(t)[0], expected, atol=1e-15)


def test_starfish_degenerate_and_tip():
    t = np.linspace(0, 2 * np.pi, 17)
    z = curve_starfish(0.0, 5).position(t)
    np.testing.assert_allclose(z, np.stack([np.cos(t), np.sin(t)], -1), atol=1e-15)
    np.testing.assert_allclose(curve_starfish(0.3, 3).position(0.0)[0], (1.3, 0.0), atol=1e-15)


def test_starfish_rotation():
    t = np.linspace(0, 2 * np.pi, 9)
    a = curve_starfish(0.3, 3).position(t)
    b = curve_starfish(0.3, 3, rotation=np.pi / 3).position(t)
    c, s = np.cos(np.pi / 3), np.sin(np.pi / 3)
    np.testing.assert_allclose(b, a @ np.array([[c, s], [-s, c]]), atol=1e-14)


@pytest.mark.parametrize("A", [1.0, -1.2])
def test_starfish_rejects_large_amplitude(A):
    with pytest.raises(ValueError):
        curve_starfish(A, 3)


def test_frenet_circle_radius_two():
    pos, tau, nrm, kappa, dkappa = frenet_at(curve_circle(2.0), np.array([0.0, 1.0]))
    np.testing.assert_allclose(kappa, 0.5, atol=1e-15)
    np.testing.assert_allclose(dkappa, 0.0, atol=1e-15)
    np.testing.assert_allclose(nrm, pos / 2.0, atol=1e-15)


def test_droplet_tangent_matches_finite_difference():
    c = curve_droplet()
    t = np.array([0.3, 1.7, 4.0])
    _, tau, *_ = frenet_at(c, t)
    errs = []
    for h in (1e-3, 1e-4):
        fd = (c.position(t + h) - c.position(t)) / h
        fd /= np.linalg.norm(fd, axis=1, keepdims=True)
        errs.append(np.max(np.linalg.norm(fd - tau, axis=1)))
    assert errs[0] < 1e-2
    assert 5 < errs[0] / errs[1] < 20  # O(h)


def test_frames_unit_and_orthogonal_and_outward():
    for c in (curve_droplet(), curve_starfish(0.3, 3, center=(1.0, -2.0), scale=0.7)):
        p = build_panelization(c, 8, 16)
        np.testing.assert_allclose(np.linalg.norm(p.tau, axis=1), 1.0, atol=1e-14)
        np.testing.assert_allclose(np.linalg.norm(p.nrm, axis=1), 1.0, atol=1e-14)
        np.testing.assert_allclose(np.sum(p.tau * p.nrm, axis=1), 0.0, atol=1e-14)
        assert not inside(p, p.pts + 1e-3 * p.nrm).any()
        assert inside(p, p.pts - 1e-3 * p.nrm).all()


def _param_at_arclength(c, t, s):
    x, w = np.polynomial.legendre.leggauss(30)

    def arc(u):
        th = t + 0.5 * (u - t) * (x + 1)
        return 0.5 * (u - t) * np.sum(w * np.abs(c.zderivs(th, 1)[1]))

    return brentq(lambda u: arc(u) - s, t, t + 1.0, xtol=1e-16, rtol=1e-15)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 2 * np.pi))
def test_taylor_expansion_fourth_order(t):
    c = curve_droplet()
    pos, tau, nrm, kappa, dkappa = frenet_at(c, np.array([t]))

    def resid(s):
        x = c.position(_param_at_arclength(c, t, s))[0]
        model = pos[0] + s * tau[0] - s**2 / 2 * kappa[0] * nrm[0] - s**3 / 6 * (
            dkappa[0] * nrm[0] + kappa[0] ** 2 * tau[0])
        return np.linalg.norm(x - model)

    r1, r2 = resid(1e-2), resid(5e-3)
    # C s^4 with C from the ratio test; the ratio should be close to 16
    assert r1 < 1e-6
    assert 12.0 < r1 / r2 < 20.0


def test_taylor_expansion_ratio_on_smooth_arc():
    # exact arc-length parameter on a circle of radius 2: gamma(s) = 2 e^{i s/2}
    c = curve_circle(2.0)
    pos, tau, nrm, kappa, dkappa = frenet_at(c, np.array([0.4]))

    def resid(s):
        x = c.position(0.4 + s / 2.0)[0]
        model = pos[0] + s * tau[0] - s**2 / 2 * kappa[0] * nrm[0] - s**3 / 6 * (
            dkappa[0] * nrm[0] + kappa[0] ** 2 * tau[0])
        return np.linalg.norm(x - model)

    ratio = resid(1e-2) / resid(5e-3)
    np.testing.assert_allclose(ratio, 16.0, rtol=0.01)


def test_panel_interpolation_accuracy():
    c = curve_droplet()
    p = build_panelization(c, 16, 16)
    theta = np.random.default_rng(1).uniform(0, 2 * np.pi, 300)
    E = p.interp_matrix(theta)
    np.testing.assert_allclose(E @ p.pts, c.position(theta), atol=1e-10)


def test_length_refinement_convergence():
    errs = [abs(build_panelization(curve_droplet(), n, 4).length - DROPLET_LENGTH) for n in (2, 4, 8, 16)]
    for a, b in zip(errs, errs[1:]):
        assert a / b >= 10.0
    np.testing.assert_allclose(build_panelization(curve_droplet(), 16, 16).length, DROPLET_LENGTH, rtol=1e-12)


def test_periodicity_of_derivatives():
    c = curve_starfish(0.25, 5)
    np.testing.assert_allclose(c.zderivs(0.0, 4), c.zderivs(2 * np.pi, 4), atol=1e-12)


def test_rejects_bad_discretization_and_degenerate_curve():
    with pytest.raises(ValueError):
        build_panelization(curve_circle(), 1, 16)
    with pytest.raises(ValueError):
        build_panelization(curve_circle(), 4, 3)
    with pytest.raises(ValueError):
        build_panelization(TrigCurve({0: 1.0}), 4, 16)


def test_overlapping_components_rejected():
    a = build_panelization(curve_circle(1.0), 4, 16)
    b = build_panelization(curve_circle(1.0, center=(1.5, 0.0)), 4, 16)
    with pytest.raises(ValueError):
        check_disjoint([a, b])
    check_disjoint([a, build_panelization(curve_circle(1.0, center=(3.0, 0.0)), 4, 16)])


def test_inside_near_boundary_uses_projection():
    p = build_panelization(curve_droplet(), 8, 16)
    x = p.pts[::7]
    n = p.nrm[::7]
    for h in (1e-2, 1e-6, 1e-10):
        assert not inside(p, x + h * n).any()
        assert inside(p, x - h * n).all()


def test_circle_centre_is_inside():
    # every boundary point is equidistant from the centre
    p = build_panelization(curve_circle(), 4, 16)
    assert inside(p, np.zeros((1, 2)))[0]
