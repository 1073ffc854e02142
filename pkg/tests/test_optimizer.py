import numpy as np
import pytest

from buckopt.optimizer import (
    Optimizer,
    ProblemSpec,
    retarget_dilated_volume,
)
from buckopt.problems import make_spec, rect_problem, uniaxial_problem

REALIZATIONS = ("e", "b", "d")


def _small(**over):
    prob = rect_problem(n=8, volume_target=0.4)
    defaults = dict(objective="weighted", omega=0.5, max_iterations=6,
                    n_eig=4, interpolation="hs")
    defaults.update(over)
    spec = make_spec(prob, **defaults)
    return prob, spec


# -- spec validation ----------------------------------------------------------

@pytest.mark.parametrize("bad", [
    {"objective": "both"},
    {"omega": 1.5},
    {"volume_target": 0.0},
    {"delta_eta": 0.6},
    {"interpolation": "ramp"},
    {"ks_penalty": 0.0},
    {"pnorm_exponent": 0.5},
    {"max_iterations": 0},
    {"objective": "blf", "compliance_cap": None},
])
def test_spec_validation_rejects(bad):
    with pytest.raises(ValueError):
        ProblemSpec(**bad).validate()


def test_retarget_scales_with_measured_ratio():
    assert retarget_dilated_volume(0.2, 0.24, 0.15) == pytest.approx(0.18)
    assert retarget_dilated_volume(0.2, 0.2, 0.15) == pytest.approx(0.15)
    with pytest.raises(ValueError):
        retarget_dilated_volume(0.0, 0.2, 0.15)


# -- evaluation structure -------------------------------------------------------

def test_row_layout_weighted_with_stress():
    prob, spec = _small(stress_constraint=True, stress_start_iter=0)
    opt = Optimizer(prob.mesh, prob.boundary, spec)
    x, s = opt.fields.initial_fields(spec.volume_target)
    ev = opt.evaluate_design(x, s, beta=2.0, stress_active=True)
    names = [r.name for r in ev.rows]
    assert names == ["gw_e", "gw_b", "gw_d", "gv",
                     "gs_e", "gs_b", "gs_d"]
    assert [r.bound for r in ev.rows] == [True] * 3 + [False] * 4
    for r in ev.rows:
        assert np.isfinite(r.value)
        assert r.grad_x.shape == (prob.mesh.n_elem,)
        assert r.grad_s.shape == (prob.mesh.n_elem,)


def test_normalizers_frozen_after_first_evaluation():
    prob, spec = _small()
    opt = Optimizer(prob.mesh, prob.boundary, spec)
    x, s = opt.fields.initial_fields(spec.volume_target)
    opt.evaluate_design(x, s, beta=2.0)
    frozen = dict(opt.refs.compliance)
    rng = np.random.default_rng(0)
    x2 = np.clip(x + rng.uniform(-0.05, 0.05, x.size), spec.x_min, 1.0)
    ev2 = opt.evaluate_design(x2, s, beta=2.0)
    assert opt.refs.compliance == frozen
    # objective rows renormalize against the frozen values
    assert ev2.diagnostics["compliance_b"] != frozen["b"]


def test_weighted_bound_rows_start_at_one():
    prob, spec = _small(omega=0.3)
    opt = Optimizer(prob.mesh, prob.boundary, spec)
    x, s = opt.fields.initial_fields(spec.volume_target)
    ev = opt.evaluate_design(x, s, beta=2.0)
    for r in ev.rows:
        if r.bound:
            assert r.value == pytest.approx(1.0, rel=1e-12)


def test_skip_eigen_when_compliance_only():
    prob, spec = _small(omega=1.0)
    opt = Optimizer(prob.mesh, prob.boundary, spec)
    x, s = opt.fields.initial_fields(spec.volume_target)
    ev = opt.evaluate_design(x, s, beta=2.0)
    assert np.isnan(ev.diagnostics["ks_b"])
    assert np.isnan(ev.diagnostics["lambda1_b"])
    assert opt.refs.ks == {}


# -- full runs ------------------------------------------------------------------

def test_run_smoke_and_volume_feasibility():
    prob, spec = _small(max_iterations=10)
    opt = Optimizer(prob.mesh, prob.boundary, spec)
    res = opt.run()
    assert len(res.history) == 10
    last = res.history[-1]
    for key in ("objective", "gv", "lambda1_b", "compliance_e"):
        assert np.isfinite(last[key])
    assert last["gv"] < 0.05
    assert last["lambda1_b"] > 0.0
    assert np.all(res.x >= spec.x_min - 1e-12) and np.all(res.x <= 1.0)
    assert np.all(res.s >= 0.0) and np.all(res.s <= 1.0)


def test_run_deterministic():
    prob, spec = _small()
    r1 = Optimizer(prob.mesh, prob.boundary, spec).run()
    r2 = Optimizer(prob.mesh, prob.boundary, spec).run()
    assert np.array_equal(r1.x, r2.x)
    assert np.array_equal(r1.s, r2.s)


def test_threaded_solves_match_sequential():
    prob, spec = _small(max_iterations=4)
    r1 = Optimizer(prob.mesh, prob.boundary, spec, threads=1).run()
    r3 = Optimizer(prob.mesh, prob.boundary, spec, threads=3).run()
    assert np.array_equal(r1.x, r3.x)
    assert np.array_equal(r1.s, r3.s)


def test_symmetry_enforced_on_design():
    prob = uniaxial_problem(n=12, x_min=0.27, volume_target=0.3)
    spec = make_spec(prob, omega=0.5, max_iterations=4, n_eig=4)
    opt = Optimizer(prob.mesh, prob.boundary, spec)
    res = opt.run()
    for perm in prob.boundary.symmetry_maps:
        assert np.allclose(res.x, res.x[perm])
        assert np.allclose(res.s, res.s[perm])


def test_beta_override_and_offset():
    prob, spec = _small(beta_override=8.0, max_iterations=2)
    opt = Optimizer(prob.mesh, prob.boundary, spec)
    assert opt._beta(0) == 8.0
    prob2, spec2 = _small(beta_offset=200, max_iterations=2)
    opt2 = Optimizer(prob2.mesh, prob2.boundary, spec2)
    assert opt2._beta(0) == 8.0
    assert opt2._beta(75) == 16.0


def test_stress_rows_appear_at_start_iteration():
    prob, spec = _small(stress_constraint=True, stress_start_iter=2,
                        max_iterations=4)
    opt = Optimizer(prob.mesh, prob.boundary, spec)
    res = opt.run()
    assert "gs_b" not in res.history[1]
    assert "gs_b" in res.history[2]
    # first active iteration runs with raw correction factor 1
    assert res.history[2]["c_b"] == pytest.approx(1.0)
    assert np.isfinite(res.history[3]["c_b"])
    assert res.refs.stress_norm["b"] > 0.0


def test_blf_mode_has_cap_row():
    prob = rect_problem(n=8, volume_target=0.4)
    spec = make_spec(prob, objective="blf", compliance_cap=1.0,
                     max_iterations=3, n_eig=4)
    opt = Optimizer(prob.mesh, prob.boundary, spec)
    res = opt.run()
    assert "gc" in res.history[-1]
    names = {r.name for r in opt.evaluate_design(res.x, res.s, 2.0).rows}
    assert {"glam_e", "glam_b", "glam_d", "gc", "gv"} <= names
