import numpy as np
import pytest

from flexbie.geometry import build_panelization, curve_circle, curve_droplet, curve_starfish
from flexbie.kernels import BCKind, MaterialParams, boundary_kernel, frames_of, pair_geometry
from flexbie.potential import plane_wave_data, point_source_data
from flexbie.system import (
    BVProblem,
    SolverFailure,
    assemble,
    interleave,
    solve,
    solve_dense,
    solve_iterative,
    split_density,
)

MP = MaterialParams(8.0, 1 / 3)


def _droplet_problem(bc, n_panels=8, mp=MP):
    p = build_panelization(curve_droplet(), n_panels, 16)
    data = point_source_data(bc, mp, (1.35, 0.0), p, "exterior")
    return BVProblem((p,), bc, "exterior", mp, data.rhs())


@pytest.fixture(scope="module")
def clamped_system():
    prob = _droplet_problem("clamped")
    return prob, assemble(prob)


def test_zero_density_maps_to_zero(clamped_system):
    _, A = clamped_system
    np.testing.assert_array_equal(A @ np.zeros(A.shape[1]), 0.0)


def test_far_entry_is_kernel_times_weight():
    p = build_panelization(curve_circle(), 8, 16)
    prob = BVProblem((p,), "clamped", "exterior", MP, np.zeros(2 * p.n))
    A = assemble(prob)
    i, j = 3, p.panel_slice(4).start + 7
    f = frames_of(p)
    pg = pair_geometry(f.take([i]), f.take([j]))
    for row, col, name in ((0, 0, "cl11"), (0, 1, "cl12"), (1, 0, "cl21"), (1, 1, "cl22")):
        expect = boundary_kernel(name, pg, MP)[0] * p.weights[j]
        np.testing.assert_allclose(A[2 * i + row, 2 * j + col], expect, rtol=1e-14)


@pytest.mark.parametrize("bc", ["clamped", "supported", "free"])
def test_dense_residual(bc):
    prob = _droplet_problem(bc)
    A, sol = solve(prob)
    assert sol.residual <= 1e-12
    assert sol.condition is not None and sol.condition > 1.0
    np.testing.assert_allclose(A @ sol.x, prob.rhs, atol=1e-11 * np.abs(prob.rhs).max())


def test_identity_solve_returns_rhs():
    b = np.arange(6) + 1j
    sol = solve_dense(np.eye(6), b)
    np.testing.assert_array_equal(sol.x, b)
    np.testing.assert_allclose(sol.condition, 1.0)


def test_iterative_agrees_with_dense(clamped_system):
    prob, A = clamped_system
    xd = solve_dense(A, prob.rhs).x
    it = solve_iterative(A, prob.rhs, tol=1e-12)
    assert it.residual <= 1e-12
    assert np.max(np.abs(it.x - xd)) <= 1e-9 * np.max(np.abs(xd))


@pytest.mark.parametrize("bc,panels", [("clamped", (8, 16)), ("free", (16, 32))])
def test_iteration_count_bounded_under_refinement(bc, panels):
    counts = []
    for n in panels:
        prob = _droplet_problem(bc, n)
        counts.append(solve_iterative(assemble(prob), prob.rhs, tol=1e-12).iterations)
    assert abs(counts[1] - counts[0]) <= 0.2 * counts[0], counts


def test_zero_rhs_takes_no_iterations(clamped_system):
    _, A = clamped_system
    sol = solve_iterative(A, np.zeros(A.shape[0]))
    assert sol.iterations == 0
    assert not sol.x.any()


def test_singular_matrix_raises():
    with pytest.raises(SolverFailure):
        solve_dense(np.zeros((4, 4)), np.ones(4))
    A = np.diag(np.r_[np.ones(5), 0.0])
    with pytest.raises(SolverFailure):
        solve_iterative(A, np.ones(6), tol=1e-12, max_iter=2)
    with pytest.raises(ValueError):
        solve_iterative(np.eye(3), np.ones(3), tol=1e-14)
    with pytest.raises(ValueError):
        solve_dense(np.ones((2, 3)), np.ones(2))


def test_problem_validation():
    p = build_panelization(curve_circle(), 4, 16)
    q = build_panelization(curve_circle(1.0, center=(1.2, 0.0)), 4, 16)
    with pytest.raises(ValueError):
        BVProblem((p, q), "clamped", "exterior", MP, np.zeros(4 * p.n))
    with pytest.raises(ValueError):
        BVProblem((p,), "clamped", "exterior", MP, np.zeros(p.n))
    with pytest.raises(ValueError):
        BVProblem((p,), "supported", "exterior", MaterialParams(8.0, -1.0), np.zeros(2 * p.n))


def test_interleave_and_split_roundtrip():
    a = build_panelization(curve_circle(), 2, 4)
    b = build_panelization(curve_circle(0.5, center=(3.0, 0.0)), 2, 4)
    f1, f2 = np.arange(16.0), -np.arange(16.0)
    x = interleave(f1, f2)
    np.testing.assert_array_equal(x[:4], [0, 0, 1, -1])
    r1, r2 = split_density(x, (a, b))
    np.testing.assert_array_equal(np.concatenate(r1), f1)
    np.testing.assert_array_equal(np.concatenate(r2), f2)


def test_component_order_permutes_solution():
    mp = MaterialParams(3.0, 0.3)
    a = build_panelization(curve_starfish(0.3, 3, center=(-1.5, 0.0), scale=0.6), 6, 16)
    b = build_panelization(curve_droplet(component_id=1).transformed(translate=(1.8, 0.5), scale=0.5), 6, 16)
    sols = []
    for parts in ((a, b), (b, a)):
        data = plane_wave_data("free", mp, (np.cos(0.4), np.sin(0.4)), parts)
        sols.append(solve(BVProblem(parts, "free", "exterior", mp, data.rhs()))[1])
    ab, ba = sols
    for i, j in ((0, 1), (1, 0)):
        np.testing.assert_allclose(ab.rho1[i], ba.rho1[j], rtol=1e-11, atol=1e-13)
        np.testing.assert_allclose(ab.rho2[i], ba.rho2[j], rtol=1e-11, atol=1e-13)
    # same ordering is bit-for-bit repeatable
    data = plane_wave_data("free", mp, (np.cos(0.4), np.sin(0.4)), (a, b))
    again = solve(BVProblem((a, b), "free", "exterior", mp, data.rhs()))[1]
    np.testing.assert_array_equal(again.x, ab.x)


def test_unknown_method_rejected(clamped_system):
    prob, _ = clamped_system
    with pytest.raises(ValueError):
        solve(prob, method="qr")
