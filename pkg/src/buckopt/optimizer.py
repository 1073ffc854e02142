"""Robust three-realization optimization loop.

Couples the field composition (eroded/blueprint/dilated), the FEM and
buckling solves, the stress aggregation and all adjoint gradients into an
MMA-driven design update. Two problem formulations are supported:

* "weighted": minimize max_m [omega C(rho^m)/C_0^m + (1-omega) J^m/J_0^m]
* "blf":      minimize max_m [J^m/J_0^m] subject to an eroded-compliance cap

both subject to a dilated volume bound and, optionally, per-realization
stress constraints. Normalizers (C_0, J_0, gamma_0, stress norm) are
captured the first time the corresponding quantity is evaluated within a
run and never move afterwards, so every gradient treats them as constants.
"""

from dataclasses import dataclass, field

import numpy as np

from .buckling import ks_aggregate, solve_buckling
from .fem import FemProblem, SolverFailure
from .fields import REALIZATIONS, DesignFields, continuation_beta
from .material import BaseMaterial, StrengthFit, interpolate_moduli
from .mesh import symmetrize
from .mma import MmaOptions, MmaState, mma_update as mma_step
from .sensitivity import (SolvedRealization, compliance_gradient, ks_gradient,
                          stress_constraint_gradient)
from .stress import (constraint_value, equivalent_stress, pnorm_aggregate,
                     update_correction)

OBJECTIVE_MODES = ("weighted", "blf")


@dataclass
class ProblemSpec:
    objective: str = "weighted"
    omega: float = 0.0
    volume_target: float = 0.15        # blueprint target V*_b
    compliance_cap: float = None       # absolute eroded cap, blf mode only
    delta_eta: float = 0.25
    x_min: float = 0.0
    n_eig: int = 12
    ks_penalty: float = 160.0
    pnorm_exponent: float = 8.0
    interpolation: str = "hs"
    simp_penalty: float = 3.0
    stress_constraint: bool = False
    stress_start_iter: int = 0
    max_iterations: int = 300
    move: float = 0.2
    retarget_every: int = 20
    correction_blend: float = 0.1
    beta_offset: int = 0               # shifts the continuation clock
    beta_override: float = None        # constant beta when set
    seed: int = 0

    def validate(self):
        if self.objective not in OBJECTIVE_MODES:
            raise ValueError(f"unknown objective mode {self.objective!r}")
        if not 0.0 <= self.omega <= 1.0:
            raise ValueError("omega must lie in [0, 1]")
        if not 0.0 < self.volume_target < 1.0:
            raise ValueError("volume_target must lie in (0, 1)")
        if not 0.0 <= self.delta_eta < 0.5:
            raise ValueError("delta_eta must lie in [0, 0.5)")
        if self.objective == "blf":
            if self.compliance_cap is None or self.compliance_cap <= 0:
                raise ValueError("blf mode requires a positive compliance_cap")
        if self.interpolation not in ("hs", "simp"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")
        if self.ks_penalty <= 0 or self.pnorm_exponent < 1:
            raise ValueError("ks_penalty must be > 0 and pnorm_exponent >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        return self


@dataclass
class Row:
    """One response: value plus gradients w.r.t. the raw design fields."""

    name: str
    value: float
    grad_x: np.ndarray = None
    grad_s: np.ndarray = None
    bound: bool = False    # True -> row bounds the min-max objective


@dataclass
class Evaluation:
    state: object
    rows: list
    diagnostics: dict


class FrozenRefs:
    """Normalizers captured on first evaluation and frozen thereafter."""

    def __init__(self):
        self.compliance = {}
        self.ks = {}
        self.gamma0 = {}
        self.stress_norm = {}

    def capture(self, store, key, value):
        if key not in store:
            store[key] = value
        return store[key]


@dataclass
class OptimizationResult:
    x: np.ndarray
    s: np.ndarray
    history: list
    refs: FrozenRefs
    correction: dict
    vstar_d: float


def retarget_dilated_volume(volume_blueprint, volume_dilated, target_blueprint):
    """V*_d <- V*_b * V(rho^d)/V(rho^b), clamped into (0, 1]."""
    if volume_blueprint <= 0.0:
        raise ValueError("blueprint volume is zero; cannot retarget")
    ratio = volume_dilated / volume_blueprint
    return float(min(max(target_blueprint * ratio, 1e-9), 1.0))


class Optimizer:
    def __init__(self, mesh, boundary, spec, material=None, strength=None,
                 threads=1):
        self.mesh = mesh
        self.boundary = boundary
        self.spec = spec.validate()
        self.threads = max(int(threads), 1)
        self.material = material if material is not None else BaseMaterial()
        self.strength = strength if strength is not None else StrengthFit(
            E0=self.material.E0)
        self.fields = DesignFields(mesh, spec.delta_eta, x_min=spec.x_min)
        self.problem = FemProblem(mesh, boundary.fixed_dofs, boundary.f)
        self.refs = FrozenRefs()
        self.correction = {m: 1.0 for m in REALIZATIONS}
        self.vstar_d = spec.volume_target
        # volume bookkeeping excludes passive void; passive solid counts
        self._vol_mask = ~mesh.passive_void
        self._v_domain = float(mesh.volumes[self._vol_mask].sum())
        self._v0 = {}

    # -- helpers -----------------------------------------------------------

    def _sym(self, values, transpose=False):
        maps = self.boundary.symmetry_maps
        if not maps:
            return values
        return symmetrize(values, maps[::-1] if transpose else maps)

    def _beta(self, iteration):
        if self.spec.beta_override is not None:
            return float(self.spec.beta_override)
        return continuation_beta(iteration + self.spec.beta_offset)

    def measured_volume(self, rho):
        v = self.mesh.volumes
        return float(np.sum(v[self._vol_mask] * rho[self._vol_mask]))

    def _solve_realization(self, name, rho, need_eigen):
        spec, mat = self.spec, self.material
        mu, kappa, dmu, dkappa = interpolate_moduli(
            rho, mat, spec.interpolation, p=spec.simp_penalty, floor=True)
        mu_g, kappa_g, dmu_g, dkappa_g = interpolate_moduli(
            rho, mat, spec.interpolation, p=spec.simp_penalty, floor=False)
        try:
            K = self.problem.assemble_stiffness(mu, kappa)
            lu = self.problem.factorize(K)
            u = self.problem.solve_equilibrium(lu)
            result = None
            if need_eigen:
                G = self.problem.assemble_geometric(mu_g, kappa_g, u)
                result = solve_buckling(
                    K, G, spec.n_eig, self.problem.free, self.mesh.n_dof,
                    lu=lu, v0=self._v0.get(name), seed=spec.seed)
                if result.degenerate:
                    raise SolverFailure("no destabilizing buckling modes")
                self._v0[name] = result.phis[self.problem.free, 0]
        except SolverFailure as err:
            raise SolverFailure(f"realization '{name}': {err}") from err
        sigma = self.problem.centroid_stress(mu, kappa, u)
        return SolvedRealization(
            name=name, rho=rho, u=u, sigma=sigma, lu=lu,
            mu=mu, kappa=kappa, dmu=dmu, dkappa=dkappa,
            mu_g=mu_g, kappa_g=kappa_g, dmu_g=dmu_g, dkappa_g=dkappa_g,
            result=result)

    # -- main responses ----------------------------------------------------

    def evaluate_design(self, x, s, beta, *, stress_active=False,
                        with_gradients=True, update_correction_factor=True,
                        force_eigen=False):
        """All response rows and gradients at one design point.

        Normalizers are captured on first sight via `self.refs` and treated
        as constants afterwards; the stress correction factor is blended
        against the committed value only when `update_correction_factor`
        (finite-difference probes must pass False to keep c frozen).
        force_eigen computes buckling diagnostics even where the objective
        would let the eigensolve be skipped.
        """
        spec = self.spec
        state = self.fields.compose(x, s, beta)
        active = self.mesh.active
        skip_eigen = (spec.objective == "weighted" and spec.omega == 1.0
                      and not stress_active and not force_eigen)

        solved = {}
        if self.threads > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                futures = {
                    m: pool.submit(self._solve_realization, m, state.rho[m],
                                   not skip_eigen)
                    for m in REALIZATIONS
                }
            solved = {m: futures[m].result() for m in REALIZATIONS}
        else:
            for m in REALIZATIONS:
                solved[m] = self._solve_realization(m, state.rho[m],
                                                    need_eigen=not skip_eigen)

        rows = []
        diag = {"beta": beta}
        refs = self.refs
        for m in REALIZATIONS:
            sr = solved[m]
            C = self.problem.compliance(sr.u)
            refs.capture(refs.compliance, m, C)
            diag[f"compliance_{m}"] = C
            if not skip_eigen:
                gamma0 = refs.capture(refs.gamma0, m, sr.result.gammas[0])
                j, w = ks_aggregate(sr.result.gammas, gamma0, spec.ks_penalty)
                sr.j_ks, sr.ks_weights = j, w
                refs.capture(refs.ks, m, j)
                diag[f"ks_{m}"] = j
                diag[f"lambda1_{m}"] = sr.result.lambdas[0]
            else:
                diag[f"ks_{m}"] = np.nan
                diag[f"lambda1_{m}"] = np.nan

        # objective bound rows
        for m in REALIZATIONS:
            sr = solved[m]
            C = diag[f"compliance_{m}"]
            if spec.objective == "weighted":
                value = spec.omega * C / refs.compliance[m]
                if spec.omega < 1.0:
                    value += (1.0 - spec.omega) * sr.j_ks / refs.ks[m]
                name = f"gw_{m}"
            else:
                value = sr.j_ks / refs.ks[m]
                name = f"glam_{m}"
            gx = gs = None
            if with_gradients:
                drho = np.zeros(self.mesh.n_elem)
                if spec.objective == "weighted":
                    drho += (spec.omega / refs.compliance[m]
                             * compliance_gradient(self.problem, sr))
                    if spec.omega < 1.0:
                        drho += ((1.0 - spec.omega) / refs.ks[m]
                                 * ks_gradient(self.problem, sr))
                else:
                    drho = ks_gradient(self.problem, sr) / refs.ks[m]
                gx, gs = self.fields.backprop(state, {m: drho})
            rows.append(Row(name, float(value), gx, gs, bound=True))

        # eroded compliance cap
        if spec.objective == "blf":
            C_e = diag["compliance_e"]
            value = C_e / spec.compliance_cap - 1.0
            gx = gs = None
            if with_gradients:
                drho = compliance_gradient(self.problem, solved["e"])
                gx, gs = self.fields.backprop(
                    state, {"e": drho / spec.compliance_cap})
            rows.append(Row("gc", float(value), gx, gs))
            diag["gc"] = float(value)

        # dilated volume bound
        vol_d = self.measured_volume(state.rho["d"])
        denom = self.vstar_d * self._v_domain
        value = vol_d / denom - 1.0
        gx = gs = None
        if with_gradients:
            drho = np.where(self._vol_mask, self.mesh.volumes, 0.0) / denom
            gx, gs = self.fields.backprop(state, {"d": drho})
        rows.append(Row("gv", float(value), gx, gs))
        diag["gv"] = float(value)
        diag["volume_d"] = vol_d
        diag["volume_b"] = self.measured_volume(state.rho["b"])
        diag["vstar_d"] = self.vstar_d

        # per-realization stress constraints
        if stress_active:
            for m in REALIZATIONS:
                sr = solved[m]
                eq = equivalent_stress(sr.sigma, state.x_tilde, self.strength)
                sig = np.where(active, eq.value, 0.0)
                sigma_pn, w_pn = pnorm_aggregate(sig, p=spec.pnorm_exponent)
                first = m not in refs.stress_norm
                if first:
                    c_m = 1.0
                else:
                    c_m = self.correction[m]
                    if update_correction_factor:
                        c_m = update_correction(
                            c_m, sig[active], sigma_pn,
                            blend=spec.correction_blend)
                if update_correction_factor:
                    self.correction[m] = c_m
                norm0 = refs.capture(
                    refs.stress_norm, m, -sigma_pn / sr.j_ks)
                if norm0 <= 0.0:
                    raise SolverFailure(
                        f"realization '{m}': nonpositive stress normalizer")
                value = constraint_value(sigma_pn, c_m, sr.j_ks) / norm0
                gx = gs = None
                if with_gradients:
                    drho, dxt = stress_constraint_gradient(
                        self.problem, sr, eq, w_pn, sigma_pn, c_m, norm0)
                    gx, gs = self.fields.backprop(
                        state, {m: drho}, dx_tilde_direct=dxt)
                rows.append(Row(f"gs_{m}", float(value), gx, gs))
                diag[f"gs_{m}"] = float(value)
                diag[f"c_{m}"] = c_m
                diag[f"sigma_pn_{m}"] = sigma_pn
        return Evaluation(state=state, rows=rows, diagnostics=diag)

    # -- MMA packing -------------------------------------------------------

    def mma_update(self, mma_state, x, s, evaluation):
        """Pack active design variables, step MMA, unpack and symmetrize."""
        spec = self.spec
        mask = self.mesh.active
        nd = int(mask.sum())
        xvec = np.concatenate([x[mask], s[mask]])
        lo = np.concatenate([np.full(nd, spec.x_min), np.zeros(nd)])
        hi = np.ones(2 * nd)

        rows = evaluation.rows
        fval = np.array([r.value for r in rows])
        dfdx = np.empty((len(rows), 2 * nd))
        for i, r in enumerate(rows):
            gx = self._sym(r.grad_x, transpose=True)
            gs = self._sym(r.grad_s, transpose=True)
            dfdx[i, :nd] = gx[mask]
            dfdx[i, nd:] = gs[mask]
        a = np.array([1.0 if r.bound else 0.0 for r in rows])
        options = MmaOptions(move=spec.move, a=a,
                             c=np.full(len(rows), 1000.0),
                             d=np.ones(len(rows)))
        xnew = mma_step(mma_state, xvec, lo, hi, fval, dfdx, options)

        x_out, s_out = x.copy(), s.copy()
        x_out[mask] = xnew[:nd]
        s_out[mask] = xnew[nd:]
        x_out = np.clip(self._sym(x_out), spec.x_min, 1.0)
        s_out = np.clip(self._sym(s_out), 0.0, 1.0)
        return x_out, s_out

    # -- driver ------------------------------------------------------------

    def run(self, x0=None, s0=None, callback=None):
        """Full optimization phase; fresh normalizers, fresh continuation."""
        spec = self.spec
        n = self.mesh.n_elem
        x = np.full(n, spec.volume_target) if x0 is None else x0.copy()
        s = np.ones(n) if s0 is None else s0.copy()
        x = np.clip(self._sym(x), spec.x_min, 1.0)
        s = np.clip(self._sym(s), 0.0, 1.0)

        self.refs = FrozenRefs()
        self.correction = {m: 1.0 for m in REALIZATIONS}
        self.vstar_d = spec.volume_target
        self._v0 = {}
        mma_state = MmaState()
        history = []
        for it in range(spec.max_iterations):
            beta = self._beta(it)
            stress_active = (spec.stress_constraint
                             and it >= spec.stress_start_iter)
            if it > 0 and it % spec.retarget_every == 0:
                st = self.fields.compose(x, s, beta)
                self.vstar_d = retarget_dilated_volume(
                    self.measured_volume(st.rho["b"]),
                    self.measured_volume(st.rho["d"]), spec.volume_target)
            ev = self.evaluate_design(x, s, beta, stress_active=stress_active)
            x_new, s_new = self.mma_update(mma_state, x, s, ev)
            change = max(np.abs(x_new - x).max(), np.abs(s_new - s).max())
            record = {"iteration": it, "beta": beta,
                      "objective": max(r.value for r in ev.rows if r.bound),
                      "change": float(change)}
            record.update(ev.diagnostics)
            history.append(record)
            if callback is not None:
                callback(it, x, s, ev)
            x, s = x_new, s_new
        return OptimizationResult(x=x, s=s, history=history, refs=self.refs,
                                  correction=dict(self.correction),
                                  vstar_d=self.vstar_d)
