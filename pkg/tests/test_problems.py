import numpy as np
import pytest

from buckopt.problems import (
    PROBLEMS,
    compliance_reference,
    euler_strip_problem,
    final_metrics,
    lbeam_problem,
    make_spec,
    omega_sweep,
    rect_problem,
    uniaxial_problem,
)


def test_registry_presets():
    assert set(PROBLEMS) == {"uniaxial", "lbeam", "rect"}


def test_uniaxial_setup():
    # n large enough that the load strip spans at least one element row
    p = uniaxial_problem(n=50)
    assert p.mesh.n_elem == 2500
    # self-equilibrated squeeze: no net force
    assert p.boundary.f[0::2].sum() == pytest.approx(0.0, abs=1e-18)
    assert p.boundary.f[1::2].sum() == pytest.approx(0.0, abs=1e-18)
    assert np.abs(p.boundary.f).sum() > 0.0
    assert p.boundary.fixed_dofs.size == 5
    assert len(p.boundary.symmetry_maps) == 2
    assert p.mesh.passive_solid.sum() > 0
    assert not p.mesh.passive_void.any()


def test_lbeam_setup():
    p = lbeam_problem(n=20)
    assert p.mesh.passive_void.mean() == pytest.approx(0.25)
    assert p.boundary.f[1::2].sum() == pytest.approx(-1e-3)
    fixed_nodes = np.unique(p.boundary.fixed_dofs // 2)
    assert np.all(p.mesh.coords[fixed_nodes, 0] == 0.0)
    assert p.x_min == pytest.approx(0.27)
    assert p.delta_eta == pytest.approx(0.1)


def test_rect_setup():
    p = rect_problem(n=10)
    assert p.boundary.fixed_dofs.size == 2 * 11
    assert p.boundary.f[0::2].sum() == pytest.approx(-1e-3)


def test_euler_strip_geometry():
    p = euler_strip_problem(nx=40, ny=4, length=10.0)
    assert p.mesh.dx == pytest.approx(0.25)
    assert p.mesh.coords[:, 1].max() == pytest.approx(1.0)
    assert p.boundary.fixed_dofs.size == 2 * 5
    assert p.boundary.f[0::2].sum() == pytest.approx(-1e-3)


def test_make_spec_inherits_problem_fields():
    p = lbeam_problem(n=10)
    spec = make_spec(p, max_iterations=5)
    assert spec.volume_target == p.volume_target
    assert spec.delta_eta == p.delta_eta
    assert spec.x_min == p.x_min
    spec2 = make_spec(p, volume_target=0.33)
    assert spec2.volume_target == 0.33


def test_final_metrics_keys():
    p = rect_problem(n=8, volume_target=0.4)
    spec = make_spec(p, omega=0.5, max_iterations=3, n_eig=4)
    from buckopt.optimizer import Optimizer
    res = Optimizer(p.mesh, p.boundary, spec).run()
    diag = final_metrics(p, spec, res.x, res.s)
    for key in ("lambda1_b", "lambda1_e", "compliance_e", "volume_b", "gv"):
        assert key in diag and np.isfinite(diag[key])


def test_compliance_reference_positive():
    p = rect_problem(n=8, volume_target=0.4)
    res, c_e = compliance_reference(p, "simp", iterations=3, n_eig=4)
    assert c_e > 0.0
    assert len(res.history) == 3


def test_omega_sweep_warm_chains():
    p = rect_problem(n=8, volume_target=0.4)
    out = omega_sweep(p, omegas=(1.0, 0.5), iterations=(2, 2),
                      interpolation="hs", n_eig=4)
    assert [o for o, _, _ in out] == [1.0, 0.5]
    (_, _, r1), (_, _, r2) = out
    assert not np.array_equal(r1.x, r2.x)
    assert len(r2.history) == 2
