import numpy as np
import pytest

from conftest import random_F
from mdem.fem import (FemMesh, NoConvergence, PointOutsideMesh, assemble_residual_and_tangent, element_fields,
                      mesh_from_problem, potential_energy, sample_solution, solve_static)
from mdem.geometry import CircleHole, DomainSpec, SegmentSpec, sample_grid, triangulate
from mdem.mechanics import MaterialParams, first_pk_stress, kinematics
from mdem.network import OutputTransform
from mdem.solvers import ProblemDefinition

MAT = MaterialParams.from_engineering(1000.0, 0.3)


def grid_mesh(n, m=None):
    return triangulate(sample_grid(DomainSpec(), n, m or n))


def problem(segments, holes=()):
    return ProblemDefinition(DomainSpec(holes=holes, segments=tuple(segments)), MAT,
                             OutputTransform(mode="trained"))


def roller_problem(t):
    return problem([SegmentSpec("l", "left", "dirichlet", displacement=("0", "free")),
                    SegmentSpec("b", "bottom", "dirichlet", displacement=("free", "0")),
                    SegmentSpec("r", "right", "traction", traction=(str(t), "0"))])


def clamped_problem(t, start=None, end=None):
    return problem([SegmentSpec("l", "left", "dirichlet", displacement=("0", "0")),
                    SegmentSpec("r", "right", "traction", start, end, (str(t), "0"))])


def test_zero_state_has_zero_residual():
    tri = grid_mesh(4)
    mesh = FemMesh(tri.vertices, tri.triangles, np.array([0, 1]), np.zeros(2))
    R, K = assemble_residual_and_tangent(mesh, np.zeros(mesh.n_dof), MAT)
    assert np.abs(R).max() == 0.0
    assert abs(K - K.T).max() <= 1e-8 * abs(K).max()


def test_single_element_reproduces_affine_field(rng):
    nodes = np.array([[0.0, 0.0], [1.0, 0.2], [0.3, 0.9]])
    mesh = FemMesh(nodes, [[0, 1, 2]], np.arange(6), np.zeros(6))
    A = 0.1 * rng.standard_normal((2, 2))
    F, *_ = element_fields(mesh, nodes @ A.T, MAT)
    np.testing.assert_allclose(F[0], np.eye(2) + A, atol=1e-15)


def test_tangent_matches_residual_finite_differences(rng):
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    mesh = FemMesh(nodes, [[0, 1, 2], [0, 2, 3]], np.array([0, 1]), np.zeros(2))
    for _ in range(5):
        u = 0.1 * rng.standard_normal(8)
        _, K = assemble_residual_and_tangent(mesh, u, MAT)
        K = K.toarray()
        fd = np.zeros_like(K)
        h = 1e-6
        for j in range(8):
            e = np.zeros(8)
            e[j] = h
            fd[:, j] = (assemble_residual_and_tangent(mesh, u + e, MAT)[0]
                        - assemble_residual_and_tangent(mesh, u - e, MAT)[0]) / (2 * h)
        assert np.linalg.norm(K - fd) / np.linalg.norm(fd) < 1e-5


def test_patch_test_random_affine_fields(rng):
    tri = grid_mesh(7)
    nodes = tri.vertices
    on_b = np.flatnonzero((nodes.min(axis=1) < 1e-12) | (nodes.max(axis=1) > 1 - 1e-12))
    dofs = np.sort(np.concatenate([2 * on_b, 2 * on_b + 1]))
    for F in random_F(10, rng, 0.7, 1.4):
        A = F - np.eye(2)
        u_exact = nodes @ A.T
        mesh = FemMesh(nodes, tri.triangles, dofs, u_exact.ravel()[dofs])
        sol = solve_static(mesh, MAT, load_steps=2, tol_r=1e-14)
        assert np.abs(sol.u - u_exact).max() < 1e-10
        assert np.abs(sol.F - F).max() < 1e-10
        assert np.abs(sol.P - first_pk_stress(kinematics(F), MAT)).max() < 1e-10 * max(1.0, np.abs(sol.P).max())


def test_linearized_uniaxial_matches_plane_strain_analytic():
    t = 1e-2
    tri = grid_mesh(9)
    sol = solve_static(mesh_from_problem(roller_problem(t), tri), MAT)
    E, nu = 1000.0, 0.3
    exx, eyy = (1 - nu ** 2) * t / E, -nu * (1 + nu) * t / E
    x = tri.vertices
    np.testing.assert_allclose(sol.u[:, 0], exx * x[:, 0], rtol=1e-2, atol=1e-2 * exx)
    np.testing.assert_allclose(sol.u[:, 1], eyy * x[:, 1], rtol=1e-2, atol=1e-2 * abs(eyy))


def test_newton_converges_quadratically():
    sol = solve_static(mesh_from_problem(clamped_problem(50.0), grid_mesh(15)), MAT, load_steps=1)
    r = [rec["residual"] for rec in sol.log]
    assert r[-1] <= 1e-9 * r[0]
    ratios = [r[k + 1] / r[k] ** 2 for k in range(len(r) - 1) if r[k] < 1e-2 * r[0] and r[k + 1] > 1e-13 * r[0]]
    assert ratios and max(ratios) < 10.0 / r[0]
    # super-linear: each late step shrinks the residual much faster than a fixed ratio
    late = [r[k + 1] / r[k] for k in range(len(r) - 1) if r[k] < 1e-2 * r[0]]
    assert max(late) < 0.05


def test_solution_is_energy_minimum():
    mesh = mesh_from_problem(clamped_problem(20.0), grid_mesh(7))
    sol = solve_static(mesh, MAT)
    u = sol.u.ravel()
    pi0 = potential_energy(mesh, u, MAT)
    for d in mesh.free_dofs:
        for s in (1e-4, -1e-4):
            v = u.copy()
            v[d] += s
            assert potential_energy(mesh, v, MAT) >= pi0 - 1e-12


def test_refinement_converges():
    diffs = []
    prev = None
    coarse_pts = sample_grid(DomainSpec(), 5, 5).points
    for n in (5, 9, 17, 33):
        sol = solve_static(mesh_from_problem(clamped_problem(10.0), grid_mesh(n)), MAT)
        u, _ = sample_solution(sol, coarse_pts)
        if prev is not None:
            diffs.append(np.linalg.norm(u - prev))
        prev = u
    assert diffs[0] > diffs[1] > diffs[2]


def test_partial_traction_is_integrated_exactly():
    mesh = mesh_from_problem(clamped_problem(3.0, 0.4, 0.6), grid_mesh(11))
    f = mesh.f_ext.reshape(-1, 2)
    assert f[:, 0].sum() == pytest.approx(3.0 * 0.2, rel=1e-14)
    assert not np.any(f[:, 1])
    mesh = mesh_from_problem(clamped_problem(3.0, 0.43, 0.61), grid_mesh(11))
    assert mesh.f_ext.reshape(-1, 2)[:, 0].sum() == pytest.approx(3.0 * 0.18, rel=1e-12)


def test_sample_solution():
    spec_h = problem([SegmentSpec("l", "left", "dirichlet", displacement=("0", "0")),
                      SegmentSpec("r", "right", "traction", traction=("5", "1"))], holes=(CircleHole((0.5, 0.5), 0.2),))
    tri = triangulate(sample_grid(spec_h.domain, 15, 15))
    sol = solve_static(mesh_from_problem(spec_h, tri), MAT)
    u, P = sample_solution(sol, tri.vertices)
    np.testing.assert_array_equal(u, sol.u)
    e = sol.mesh.elements[:20]
    cent = tri.vertices[e].mean(axis=1)
    u, P = sample_solution(sol, cent)
    np.testing.assert_allclose(u, sol.u[e].mean(axis=1), atol=1e-14)
    np.testing.assert_array_equal(P, sol.P[:20])
    with pytest.raises(PointOutsideMesh):
        sample_solution(sol, [[0.5, 0.5]])


def test_no_convergence_after_bisections():
    mesh = mesh_from_problem(clamped_problem(-1e5), grid_mesh(5))
    with pytest.raises(NoConvergence):
        solve_static(mesh, MAT, load_steps=1, max_bisections=2)


def test_mesh_validation():
    with pytest.raises(ValueError, match="Dirichlet"):
        FemMesh(np.eye(3)[:, :2], [[0, 1, 2]], [], [])
    with pytest.raises(ValueError, match="counter-clockwise"):
        FemMesh(np.array([[0, 0], [0, 1.0], [1.0, 0]]), [[0, 1, 2]], [0], [0.0])
