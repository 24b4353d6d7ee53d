import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from whomog.errors import ConsistencyError, EvaluationError, SolverDivergence
from whomog.fem import (
    CoupledDofMap,
    DiffusionSpec,
    SpaceNorms,
    assemble_bulk_stiffness,
    assemble_mass,
    assemble_surface_stiffness,
    calibrate_trace_constant,
    embed,
    gradients,
    solve_spd,
    trace_inequality_check,
)
from whomog.geometry import Y1, Y2, extract_surface_mesh, unit_square_mesh

UNIT = DiffusionSpec()


@pytest.fixture(scope="module")
def side(cell):
    sub, _ = cell.side(Y1)
    return sub, extract_surface_mesh(sub)


def test_mass_integrates_constants_and_linears(side):
    mesh, s = side
    M = assemble_mass(mesh)
    one = np.ones(mesh.n_vertices)
    assert one @ M @ one == pytest.approx(mesh.area(), rel=1e-13)
    x = mesh.vertices[:, 0]
    # int x over the perforated cell equals 0.5 |Y1| by symmetry
    assert one @ M @ x == pytest.approx(0.5 * mesh.area(), rel=1e-12)
    Ms = assemble_mass(s)
    assert np.ones(s.n_nodes) @ Ms @ np.ones(s.n_nodes) == pytest.approx(s.length, rel=1e-13)
    lumped = assemble_mass(mesh, lumped=True)
    assert abs(lumped - sp.diags(lumped.diagonal())).max() == 0


def test_stiffness_kernel_and_symmetry(side):
    mesh, s = side
    K = assemble_bulk_stiffness(mesh, None, UNIT)
    assert abs(K - K.T).max() < 1e-13
    assert np.abs(K @ np.ones(mesh.n_vertices)).max() < 1e-11
    Ks = assemble_surface_stiffness(s, 1.0)
    assert np.abs(Ks @ np.ones(s.n_nodes)).max() < 1e-11


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), c=st.floats(-3, 3))
def test_p1_reproduces_affine_energy(a, b, c):
    mesh = unit_square_mesh(6)
    u = a * mesh.vertices[:, 0] + b * mesh.vertices[:, 1] + c
    K = assemble_bulk_stiffness(mesh, None, UNIT)
    assert u @ K @ u == pytest.approx(a * a + b * b, rel=1e-10, abs=1e-12)
    _, g, tris = gradients(mesh)
    grad = np.einsum("tai,ta->ti", g, u[tris])
    assert np.allclose(grad, [a, b], atol=1e-11)


def test_anisotropic_tensor_energy():
    mesh = unit_square_mesh(4)
    D = np.array([[2.0, 0.5], [0.5, 1.0]])
    K = assemble_bulk_stiffness(mesh, None, DiffusionSpec(D1=D, D2=D))
    xi = np.array([1.0, -2.0])
    u = mesh.vertices @ xi
    assert u @ K @ u == pytest.approx(xi @ D @ xi, rel=1e-12)


def test_surface_stiffness_on_linear_trace(side):
    _, s = side
    xi = np.array([0.3, -0.7])
    u = s.nodes @ xi
    Ks = assemble_surface_stiffness(s, 2.0)
    # polygon edge energy: sum of DG * (t . xi)^2 * length
    assert u @ Ks @ u == pytest.approx(2.0 * np.sum(s.lengths * (s.tangents @ xi) ** 2), rel=1e-12)


def test_embed_restricts_to_interface(side):
    mesh, s = side
    E = embed(assemble_mass(s), s, mesh.n_vertices)
    u = np.random.default_rng(0).standard_normal(mesh.n_vertices)
    t = u[s.node_ids]
    assert u @ E @ u == pytest.approx(t @ assemble_mass(s) @ t, rel=1e-13)


def test_solve_spd_and_divergence():
    mesh = unit_square_mesh(8)
    A = (assemble_mass(mesh) + assemble_bulk_stiffness(mesh, None, UNIT)).tocsr()
    x = np.random.default_rng(1).standard_normal(mesh.n_vertices)
    assert np.allclose(solve_spd(A, A @ x, rtol=1e-13), x, atol=1e-9)
    with pytest.raises(SolverDivergence):
        solve_spd(A, A @ x, rtol=1e-14, maxiter=2)


def test_diffusion_check():
    assert DiffusionSpec().check()
    with pytest.raises(EvaluationError):
        DiffusionSpec(D1=np.array([[1.0, 0.3], [0.0, 1.0]])).check()
    with pytest.raises(EvaluationError):
        DiffusionSpec(DG2=0.5, c0=1.0).check()
    with pytest.raises(EvaluationError):
        DiffusionSpec(D1=lambda y: np.full((len(y), 2, 2), np.nan)).bulk(1, np.zeros((3, 2)))


def test_scaled_spec_scales_stiffness(side):
    mesh, _ = side
    K1 = assemble_bulk_stiffness(mesh, None, UNIT)
    K3 = assemble_bulk_stiffness(mesh, None, UNIT.scaled(3.0))
    assert abs(K3 - 3 * K1).max() < 1e-12


def test_space_norms_and_trace_consistency(side):
    mesh, s = side
    n = SpaceNorms.build(mesh, s, 0.25)
    u = np.ones(mesh.n_vertices)
    assert n.lje(u) ** 2 == pytest.approx(mesh.area() + 0.25 * s.length, rel=1e-12)
    assert n.hje(u) == pytest.approx(n.lje(u), rel=1e-12)
    with pytest.raises(ConsistencyError):
        n.hje(u, trace=np.zeros(s.n_nodes))


def test_trace_inequality_calibration(side):
    mesh, s = side
    norms = SpaceNorms.build(mesh, s, 1.0)
    rng = np.random.default_rng(3)
    fields = [rng.standard_normal(mesh.n_vertices) for _ in range(10)] + [np.ones(mesh.n_vertices)]
    C = calibrate_trace_constant([(norms, fields)], theta=1.0)
    assert C > 0
    assert all(trace_inequality_check(f, norms, 1.0, C).holds for f in fields)
    with pytest.raises(ValueError):
        trace_inequality_check(fields[0], norms, 0.0, C)


def test_dof_map(cell):
    sub, _ = cell.side(Y1)
    s = extract_surface_mesh(sub)
    d = CoupledDofMap.for_cell({1: sub, 2: cell.side(Y2)[0]}, {1: s})
    assert d.is_idempotent() and d.interface_is_subset()
    R, free = d.reduction()
    assert R.shape == (sub.n_vertices, len(free))
    assert np.array_equal(np.asarray(R.sum(axis=1)).ravel(), np.ones(sub.n_vertices))
