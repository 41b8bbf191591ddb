import numpy as np
import pytest
from scipy import special

from flexbie.geometry import build_panelization, curve_circle, curve_droplet, curve_starfish
from flexbie.kernels import MaterialParams
from flexbie.potential import (
    ExtrapolationFailure,
    FarField,
    boundary_trace_limit,
    eval_field,
    far_field,
    jump_probe,
    plane_wave,
    plane_wave_data,
    point_source_data,
    richardson,
)
from flexbie.scenarios import jump_density
from flexbie.system import BVProblem, DensitySolution, solve

MP = MaterialParams(8.0, 1 / 3)
SRC = np.array([1.35, 0.0])


def g_oracle(x, k, src=SRC):
    z = k * np.linalg.norm(np.atleast_2d(x) - src, axis=-1)
    return (0.25j * special.hankel1(0, z) - special.k0(z) / (2 * np.pi)) / (2 * k * k)


def second_directional(f, x, d, h=1e-2):
    """Fourth-order central second difference of f along unit d."""
    s = [f(x + j * h * d) for j in (-2, -1, 0, 1, 2)]
    return (-s[0] + 16 * s[1] - 30 * s[2] + 16 * s[3] - s[4]) / (12 * h * h)


def first_directional(f, x, d, h=1e-3):
    s = [f(x + j * h * d) for j in (-2, -1, 1, 2)]
    return (s[0] - 8 * s[1] + 8 * s[2] - s[3]) / (12 * h)


@pytest.fixture(scope="module")
def droplet():
    return build_panelization(curve_droplet(), 8, 16)


def test_clamped_point_source_data_is_green_function(droplet):
    d = point_source_data("clamped", MP, SRC, droplet)
    np.testing.assert_allclose(d.f1, g_oracle(droplet.pts, MP.k), rtol=1e-13, atol=1e-16)
    f = lambda x: g_oracle(x, MP.k)
    fd = np.array([first_directional(f, x, n)[0] for x, n in zip(droplet.pts[::9], droplet.nrm[::9])])
    np.testing.assert_allclose(d.f2[::9], fd, atol=1e-9)


def test_supported_moment_trace_matches_finite_differences(droplet):
    nu = MP.nu
    d = point_source_data("supported", MP, SRC, droplet)
    f = lambda x: g_oracle(x, MP.k)
    ex, ey = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    for i in range(0, droplet.n, 11):
        x, n = droplet.pts[i], droplet.nrm[i]
        lap = second_directional(f, x, ex) + second_directional(f, x, ey)
        fd = nu * lap + (1 - nu) * second_directional(f, x, n)
        assert abs(d.f2[i] - fd[0]) <= 1e-6 * max(1.0, abs(fd[0]))


def test_point_source_side_checks(droplet):
    with pytest.raises(ValueError):
        point_source_data("clamped", MP, (5.0, 0.0), droplet, "exterior")
    with pytest.raises(ValueError):
        point_source_data("clamped", MP, (0.0, 0.0), droplet, "interior")


def test_plane_wave_clamped_data(droplet):
    d = np.array([np.cos(0.3), np.sin(0.3)])
    data = plane_wave_data("clamped", MP, d, droplet)
    u = np.exp(1j * MP.k * droplet.pts @ d)
    np.testing.assert_allclose(data.f1, -u, rtol=1e-14)
    np.testing.assert_allclose(data.f2, -1j * MP.k * (droplet.nrm @ d) * u, rtol=1e-13, atol=1e-14)
    with pytest.raises(ValueError):
        plane_wave_data("clamped", MP, (1.0, 1.0), droplet)
    np.testing.assert_allclose(plane_wave(2.0, (0.0, 1.0), [[0.0, np.pi / 4]]), [1j], atol=1e-15)


def _random_solution(p, seed):
    rng = np.random.default_rng(seed)
    r1 = rng.normal(size=p.n) + 1j * rng.normal(size=p.n)
    r2 = rng.normal(size=p.n) + 1j * rng.normal(size=p.n)
    return DensitySolution((r1,), (r2,), 0.0, None)


@pytest.mark.parametrize("bc", ["clamped", "supported", "free"])
def test_field_is_linear_in_densities(droplet, bc):
    pts = np.array([[3.0, 0.5], [0.0, 2.0], [2.05, -0.4]])
    a, b = _random_solution(droplet, 1), _random_solution(droplet, 2)
    ab = DensitySolution((2 * a.rho1[0] - 1j * b.rho1[0],), (2 * a.rho2[0] - 1j * b.rho2[0],), 0.0, None)
    ua = eval_field(a, bc, MP, "exterior", droplet, pts)
    ub = eval_field(b, bc, MP, "exterior", droplet, pts)
    np.testing.assert_allclose(eval_field(ab, bc, MP, "exterior", droplet, pts), 2 * ua - 1j * ub, rtol=1e-12)
    zero = DensitySolution((0 * a.rho1[0],), (0 * a.rho2[0],), 0.0, None)
    np.testing.assert_array_equal(eval_field(zero, bc, MP, "exterior", droplet, pts), 0.0)


def test_scattered_field_satisfies_plate_equation():
    mp = MaterialParams(1.5, 0.3)
    p = build_panelization(curve_starfish(0.3, 3), 8, 16)
    data = plane_wave_data("free", mp, (1.0, 0.0), p)
    _, sol = solve(BVProblem((p,), "free", "exterior", mp, data.rhs()))
    x0, h = np.array([2.5, 0.7]), 0.05
    offs = [(i, j) for i in range(-2, 3) for j in range(-2, 3) if abs(i) + abs(j) <= 2]
    pts = np.array([x0 + h * np.array(o) for o in offs])
    u = dict(zip(offs, eval_field(sol, "free", mp, "exterior", p, pts)))
    bih = (20 * u[0, 0] - 8 * (u[1, 0] + u[-1, 0] + u[0, 1] + u[0, -1])
           + 2 * (u[1, 1] + u[1, -1] + u[-1, 1] + u[-1, -1])
           + u[2, 0] + u[-2, 0] + u[0, 2] + u[0, -2]) / h**4
    np.testing.assert_allclose(bih, mp.k**4 * u[0, 0], rtol=5e-3)


def test_far_field_radiates_and_rejects_interior():
    mp = MaterialParams(3.0, 1 / 3)
    p = build_panelization(curve_circle(), 6, 16)
    data = plane_wave_data("clamped", mp, (1.0, 0.0), p)
    _, sol = solve(BVProblem((p,), "clamped", "exterior", mp, data.rhs()))
    f500 = far_field(sol, "clamped", mp, "exterior", p, 16, 500.0)
    f1000 = far_field(sol, "clamped", mp, "exterior", p, 16, 1000.0)
    np.testing.assert_allclose(f500.magnitude, f1000.magnitude, rtol=1e-2)
    np.testing.assert_allclose(f500.f, f1000.f, rtol=1e-2, atol=1e-3 * np.abs(f1000.f).max())
    # circle symmetry: f(theta) = f(-theta)
    np.testing.assert_allclose(f1000.f[1:], f1000.f[1:][::-1], rtol=1e-9)
    with pytest.raises(ValueError):
        far_field(sol, "clamped", mp, "interior", p)


def test_far_field_phase_convention():
    ff = FarField(np.zeros(3), np.array([-1.0 + 0j, 1j, -1j]), 1.0)
    np.testing.assert_allclose(ff.phase, [np.pi, np.pi / 2, -np.pi / 2])


def test_richardson_exact_for_quadratic():
    h = np.array([0.1, 0.05, 0.025])
    np.testing.assert_allclose(richardson(3.0 - 2.0 * h + 5.0 * h**2), 3.0, rtol=1e-13)


def test_clamped_jump_probe_on_droplet():
    p = build_panelization(curve_droplet(), 16, 16)
    res = jump_probe("clamped", MP, p, jump_density(p.t), p.n // 3)
    assert len(res) == 8
    for key, (meas, exp) in res.items():
        assert abs(meas - exp) <= 1e-4, (key, meas, exp)


def test_extrapolation_failure_and_bad_sequences():
    mp = MaterialParams(8.0, 1 / 3)
    p = build_panelization(curve_droplet(), 4, 16)
    sigma = np.cos(7 * p.t)
    with pytest.raises(ExtrapolationFailure):
        boundary_trace_limit("clamped", mp, "exterior", p, sigma, 0 * sigma, 5, 1, "K1",
                             h_sequence=[1.6, 0.8, 0.4, 0.2])
    with pytest.raises(ValueError):
        boundary_trace_limit("clamped", mp, "exterior", p, sigma, 0 * sigma, 5, 1, "K1", [0.1, 0.05, 0.02])
    with pytest.raises(ValueError):
        boundary_trace_limit("clamped", mp, "exterior", p, sigma, 0 * sigma, 5, 1, "K1",
                             [0.1, 0.2, 0.05, 0.01])
