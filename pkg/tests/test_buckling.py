import numpy as np
import pytest
from hypothesis import given, strategies as st

from buckopt.buckling import (
    ks_aggregate,
    solve_buckling,
    solve_buckling_lobpcg,
)
from buckopt.fem import FemProblem
from buckopt.material import BaseMaterial, interpolate_moduli
from buckopt.problems import euler_strip_problem

MAT = BaseMaterial()


def _strip_system(nx=80, ny=8, flip_load=False):
    prob = euler_strip_problem(nx=nx, ny=ny)
    f = -prob.boundary.f if flip_load else prob.boundary.f
    fem = FemProblem(prob.mesh, prob.boundary.fixed_dofs, f)
    rho = np.ones(prob.mesh.n_elem)
    mu, kappa, _, _ = interpolate_moduli(rho, MAT, "hs", floor=True)
    mu_g, kappa_g, _, _ = interpolate_moduli(rho, MAT, "hs", floor=False)
    K = fem.assemble_stiffness(mu, kappa)
    lu = fem.factorize(K)
    u = fem.solve_equilibrium(lu)
    G = fem.assemble_geometric(mu_g, kappa_g, u)
    return fem, K, G, lu


# -- KS aggregate -------------------------------------------------------------

def test_ks_identical_eigenvalues():
    g = np.full(5, -0.4)
    J, w = ks_aggregate(g, gamma0=-0.4, P=160.0)
    assert J == pytest.approx(-0.404023594781, abs=1e-10)
    assert w == pytest.approx(np.full(5, 0.2))


def test_ks_weights_sum_to_one_and_favor_critical():
    g = np.array([-0.5, -0.4, -0.1])
    J, w = ks_aggregate(g, gamma0=-0.5, P=160.0)
    assert w.sum() == pytest.approx(1.0)
    assert w[0] > 0.99
    assert J <= g[0]


@given(st.integers(0, 10**6))
def test_ks_bounds_critical_eigenvalue(seed):
    rng = np.random.default_rng(seed)
    g = -np.sort(rng.uniform(0.05, 2.0, rng.integers(1, 15)))[::-1]
    J, _ = ks_aggregate(g, gamma0=g[0], P=160.0)
    assert abs(J) >= abs(g[0]) - 1e-12


def test_ks_tightens_with_penalty():
    g = np.array([-0.5, -0.45, -0.3])
    errs = [abs(ks_aggregate(g, -0.5, P)[0] - g[0]) for P in (40.0, 160.0, 640.0)]
    assert errs[0] > errs[1] > errs[2]


def test_ks_gradient_matches_fd():
    g = np.array([-0.52, -0.44, -0.31, -0.08])
    J, w = ks_aggregate(g, gamma0=-0.52, P=160.0)
    h = 1e-7
    for i in range(g.size):
        gp, gm = g.copy(), g.copy()
        gp[i] += h
        gm[i] -= h
        fd = (ks_aggregate(gp, -0.52, 160.0)[0]
              - ks_aggregate(gm, -0.52, 160.0)[0]) / (2 * h)
        assert w[i] == pytest.approx(fd, rel=1e-5, abs=1e-10)


def test_ks_input_validation():
    with pytest.raises(ValueError):
        ks_aggregate(np.array([-0.4]), gamma0=0.0, P=160.0)
    with pytest.raises(ValueError):
        ks_aggregate(np.array([]), gamma0=-0.4, P=160.0)
    with pytest.raises(ValueError):
        ks_aggregate(np.array([0.4]), gamma0=-0.4, P=160.0)


# -- eigensolvers -------------------------------------------------------------

def test_column_critical_load():
    # fixed-free column, lambda1 within FE discretization error of
    # pi^2 E I / (4 L^2) / F
    fem, K, G, lu = _strip_system()
    res = solve_buckling(K, G, 6, fem.free, fem.mesh.n_dof, lu=lu)
    assert not res.degenerate
    lam1 = -1.0 / res.gammas[0]
    assert lam1 == pytest.approx(2.056168, rel=0.05)


def test_buckling_modes_k_normalized_and_sorted():
    fem, K, G, lu = _strip_system()
    res = solve_buckling(K, G, 5, fem.free, fem.mesh.n_dof, lu=lu)
    assert np.all(np.diff(res.gammas) >= 0.0)
    assert np.all(res.gammas < 0.0)
    for i in range(res.gammas.size):
        phi = res.phis[fem.free, i]
        assert phi @ K @ phi == pytest.approx(1.0, rel=1e-8)


def test_tension_is_degenerate():
    fem, K, G, lu = _strip_system(flip_load=True)
    res = solve_buckling(K, G, 4, fem.free, fem.mesh.n_dof, lu=lu)
    assert res.degenerate
    assert res.gammas.size == 0


def test_zero_stress_is_degenerate():
    fem, K, _, lu = _strip_system()
    G0 = 0.0 * K
    res = solve_buckling(K, G0, 4, fem.free, fem.mesh.n_dof, lu=lu)
    assert res.degenerate


def test_lobpcg_agrees_with_arpack():
    fem, K, G, lu = _strip_system(nx=60, ny=6)
    ref = solve_buckling(K, G, 4, fem.free, fem.mesh.n_dof, lu=lu)
    coords_free = fem.mesh.coords[fem.free // 2]
    alt = solve_buckling_lobpcg(K, G, 4, fem.free, fem.mesh.n_dof,
                                coords_free=coords_free)
    assert alt.gammas[:3] == pytest.approx(ref.gammas[:3], rel=1e-5)


def test_warm_start_reproduces_eigenvalues():
    fem, K, G, lu = _strip_system(nx=40, ny=4)
    first = solve_buckling(K, G, 4, fem.free, fem.mesh.n_dof, lu=lu)
    again = solve_buckling(K, G, 4, fem.free, fem.mesh.n_dof, lu=lu,
                           v0=first.phis[:, 0])
    assert again.gammas == pytest.approx(first.gammas, rel=1e-7)
