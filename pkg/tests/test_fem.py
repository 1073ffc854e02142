import numpy as np
import pytest

from buckopt.fem import FemProblem
from buckopt.mesh import build_rect_domain, edge_load, nodes_on_edge


def _clamped_plate(n=6):
    mesh = build_rect_domain(n, n, 1.0)
    f = edge_load(mesh, "right", 0.5, 0.5, 1e-3, (-1.0, 0.0))
    left = nodes_on_edge(mesh, "left", 0.0, 1.0)
    fixed = np.unique(np.concatenate([2 * left, 2 * left + 1]))
    return mesh, FemProblem(mesh, fixed, f)


def test_element_kernels_symmetric_psd():
    mesh, prob = _clamped_plate(2)
    for K0 in (prob.kernels.K0_mu, prob.kernels.K0_kappa):
        assert np.allclose(K0, K0.T)
        w = np.linalg.eigvalsh(K0)
        assert w.min() > -1e-12


def test_rigid_modes_in_kernel_nullspace():
    mesh, prob = _clamped_plate(2)
    xy = mesh.coords[mesh.conn[0]]
    tx = np.array([1.0, 0.0] * 4)
    ty = np.array([0.0, 1.0] * 4)
    rot = np.stack([-xy[:, 1], xy[:, 0]], axis=1).ravel()
    K0 = 0.7 * prob.kernels.K0_mu + 1.3 * prob.kernels.K0_kappa
    for mode in (tx, ty, rot):
        assert np.abs(K0 @ mode).max() < 1e-12


@pytest.mark.parametrize("a, b, c", [(1e-3, 0.0, 0.0), (2e-3, -1e-3, 0.0),
                                     (0.0, 0.0, 4e-3)])
def test_centroid_stress_linear_patch(a, b, c):
    # u = (a X + c Y, b Y) is reproduced exactly by bilinear elements
    mesh, prob = _clamped_plate(5)
    mu = np.full(mesh.n_elem, 0.3)
    kappa = np.full(mesh.n_elem, 0.5)
    u = np.empty(mesh.n_dof)
    u[0::2] = a * mesh.coords[:, 0] + c * mesh.coords[:, 1]
    u[1::2] = b * mesh.coords[:, 1]
    sig = prob.centroid_stress(mu, kappa, u)
    sxx = 0.5 * (a + b) + 0.3 * (a - b)
    syy = 0.5 * (a + b) - 0.3 * (a - b)
    sxy = 0.3 * c
    assert sig[:, 0] == pytest.approx(sxx, abs=1e-14)
    assert sig[:, 1] == pytest.approx(syy, abs=1e-14)
    assert sig[:, 2] == pytest.approx(sxy, abs=1e-14)


def test_equilibrium_residual_and_compliance():
    mesh, prob = _clamped_plate(6)
    rng = np.random.default_rng(0)
    mu = rng.uniform(0.1, 0.4, mesh.n_elem)
    kappa = rng.uniform(0.2, 0.7, mesh.n_elem)
    K = prob.assemble_stiffness(mu, kappa)
    lu = prob.factorize(K)
    u = prob.solve_equilibrium(lu)
    res = K @ u[prob.free] - prob.f_free
    assert np.abs(res).max() < 1e-14
    assert prob.compliance(u) == pytest.approx(u[prob.free] @ K @ u[prob.free])


def test_stiffness_products_consistent_with_assembly():
    mesh, prob = _clamped_plate(4)
    rng = np.random.default_rng(1)
    mu = rng.uniform(0.1, 0.4, mesh.n_elem)
    kappa = rng.uniform(0.2, 0.7, mesh.n_elem)
    a = rng.standard_normal(mesh.n_dof)
    b = rng.standard_normal(mesh.n_dof)
    a[prob.fixed_dofs] = 0.0
    b[prob.fixed_dofs] = 0.0
    K = prob.assemble_stiffness(mu, kappa)
    pm, pk = prob.elem_stiffness_products(a, b)
    total = np.dot(mu, pm) + np.dot(kappa, pk)
    assert total == pytest.approx(a[prob.free] @ K @ b[prob.free], rel=1e-12)


def test_mode_contraction_consistent_with_geometric_assembly():
    # two independent code paths for phi^T G phi must agree
    mesh, prob = _clamped_plate(5)
    rng = np.random.default_rng(2)
    mu = rng.uniform(0.1, 0.4, mesh.n_elem)
    kappa = rng.uniform(0.2, 0.7, mesh.n_elem)
    K = prob.assemble_stiffness(mu, kappa)
    u = prob.solve_equilibrium(prob.factorize(K))
    G = prob.assemble_geometric(mu, kappa, u)
    phi = rng.standard_normal(mesh.n_dof)
    phi[prob.fixed_dofs] = 0.0
    r_mu, r_kappa = prob.mode_contraction(phi)
    rows = mu[:, None] * r_mu + kappa[:, None] * r_kappa
    via_rows = np.sum(rows * u[mesh.elem_dofs])
    via_matrix = phi[prob.free] @ G @ phi[prob.free]
    assert via_rows == pytest.approx(via_matrix, rel=1e-12)


def test_scatter_rows_is_gather_transpose():
    mesh, prob = _clamped_plate(4)
    rng = np.random.default_rng(3)
    rows = rng.standard_normal((mesh.n_elem, 8))
    v = rng.standard_normal(mesh.n_dof)
    v[prob.fixed_dofs] = 0.0
    lhs = np.dot(prob.scatter_rows(rows), v)
    rhs = np.sum(rows * v[mesh.elem_dofs])
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_strain_energy_density_sums_to_total():
    mesh, prob = _clamped_plate(5)
    rng = np.random.default_rng(4)
    mu = rng.uniform(0.1, 0.4, mesh.n_elem)
    kappa = rng.uniform(0.2, 0.7, mesh.n_elem)
    phi = rng.standard_normal(mesh.n_dof)
    phi[prob.fixed_dofs] = 0.0
    K = prob.assemble_stiffness(mu, kappa)
    dens = prob.strain_energy_density(mu, kappa, phi)
    assert dens.sum() == pytest.approx(
        0.5 * phi[prob.free] @ K @ phi[prob.free], rel=1e-12)
    assert np.all(dens >= -1e-15)


def test_geometric_matrix_traceless_in_pure_shear():
    # G depends on u only through the stress field; zero load, zero G
    mesh, prob = _clamped_plate(4)
    mu = np.full(mesh.n_elem, 0.3)
    kappa = np.full(mesh.n_elem, 0.5)
    G = prob.assemble_geometric(mu, kappa, np.zeros(mesh.n_dof))
    assert G.nnz == 0 or np.abs(G.data).max() < 1e-18
