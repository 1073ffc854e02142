"""Central-difference check of evaluate_design gradients w.r.t. raw x, s.

Throwaway verification harness mirroring the acceptance gradient test:
random 6x6 design, both objective modes, stress constraint on, c and all
normalizers frozen by the first evaluation.
"""

import sys
import time

import numpy as np

sys.path.insert(0, "src")

from buckopt.mesh import BoundarySpec, build_rect_domain, edge_load, nodes_on_edge  # noqa: E402
from buckopt.optimizer import Optimizer, ProblemSpec  # noqa: E402


def small_problem():
    mesh = build_rect_domain(6, 6, 1.0)
    clamped = nodes_on_edge(mesh, "left")
    fixed = np.concatenate([2 * clamped, 2 * clamped + 1])
    f = edge_load(mesh, "right", 0.5, 0.5, 1e-3, (-1.0, 0.0))
    return mesh, BoundarySpec(fixed_dofs=fixed, f=f)


def check(objective, interpolation, beta, seed):
    mesh, boundary = small_problem()
    kwargs = dict(objective=objective, omega=0.4, interpolation=interpolation,
                  volume_target=0.5, delta_eta=0.15, x_min=0.0,
                  n_eig=6, stress_constraint=True, beta_override=beta)
    if objective == "blf":
        kwargs["compliance_cap"] = 1.0   # placeholder, reset below
    spec = ProblemSpec(**kwargs)
    opt = Optimizer(mesh, boundary, spec)

    rng = np.random.default_rng(seed)
    x = rng.uniform(0.3, 0.9, mesh.n_elem)
    s = rng.uniform(0.4, 1.0, mesh.n_elem)

    if objective == "blf":
        probe = opt.evaluate_design(x, s, beta, stress_active=True,
                                    with_gradients=False)
        spec.compliance_cap = 1.3 * probe.diagnostics["compliance_e"]
        opt = Optimizer(mesh, boundary, spec)

    base = opt.evaluate_design(x, s, beta, stress_active=True)

    h = 1e-6
    worst = {}
    for row in base.rows:
        grads = np.concatenate([row.grad_x, row.grad_s])
        idx = np.argsort(-np.abs(grads))[:30]
        errs = []
        for k in idx:
            is_x = k < mesh.n_elem
            j = k if is_x else k - mesh.n_elem
            vals = []
            for sgn in (+1.0, -1.0):
                xp, sp = x.copy(), s.copy()
                if is_x:
                    xp[j] += sgn * h
                else:
                    sp[j] += sgn * h
                ev = opt.evaluate_design(xp, sp, beta, stress_active=True,
                                         with_gradients=False,
                                         update_correction_factor=False)
                vals.append({r.name: r.value for r in ev.rows}[row.name])
            fd = (vals[0] - vals[1]) / (2 * h)
            denom = max(abs(fd), abs(grads[k]), 1e-12)
            errs.append(abs(fd - grads[k]) / denom)
        worst[row.name] = max(errs)
    return worst


t0 = time.time()
for objective in ("weighted", "blf"):
    for interpolation in ("hs", "simp"):
        for beta in (2.0, 64.0):
            worst = check(objective, interpolation, beta, seed=11)
            flat = max(worst.values())
            tag = f"{objective:8s} {interpolation:4s} beta={beta:<4.0f}"
            print(f"{tag} worst rel err {flat:.3e}  "
                  + " ".join(f"{k}={v:.1e}" for k, v in worst.items()))
print(f"total {time.time() - t0:.1f}s")
