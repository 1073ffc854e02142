"""Command-line entry points: optimize, dehomogenize, verify.

Exit codes: 0 success, 2 config error, 3 solver/resolution failure,
4 verification failure.
"""

import argparse
import inspect
import itertools
import json
import os
import sys

import numpy as np

from . import __version__
from .config import ConfigError, load_config, phase_plan
from .dehom import (ResolutionError, build_lattice, close_shell,
                    validate_fine)
from .fem import SolverFailure
from .fields import REALIZATIONS, DesignFields
from .io_utils import (load_checkpoint, save_checkpoint, write_history_csv,
                       write_manifest, write_pbm, write_pgm, write_sweep_csv,
                       write_vtk)
from .material import BaseMaterial, StrengthFit
from .optimizer import Optimizer
from .problems import (PROBLEMS, euler_strip_problem, final_metrics,
                       make_spec, rect_problem)
from .stress import equivalent_stress

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ResolutionError as err:
        print(f"resolution failure: {err}", file=sys.stderr)
        return EXIT_SOLVER
    except SolverFailure as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER


def _parser():
    parser = argparse.ArgumentParser(
        prog="buckopt",
        description="Buckling-aware multiscale topology optimization.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(required=True)

    opt = sub.add_parser("optimize", help="run an optimization config")
    opt.add_argument("config")
    opt.add_argument("--dry-run", action="store_true",
                     help="print the resolved config and exit")
    opt.add_argument("--restart", metavar="CHECKPOINT",
                     help="warm-start from a checkpoint's design fields")
    opt.set_defaults(func=cmd_optimize)

    deh = sub.add_parser("dehomogenize",
                         help="render + validate a finished design")
    deh.add_argument("config")
    deh.add_argument("fields", nargs="?",
                     help="checkpoint file (default: <output>/checkpoint.npz)")
    deh.add_argument("--shell", action=argparse.BooleanOptionalAction,
                     default=None, help="override the config's shell switch")
    deh.set_defaults(func=cmd_dehomogenize)

    ver = sub.add_parser("verify", help="run the fast invariant suite")
    ver.add_argument("--filter", default="",
                     help="run only checks whose name contains this")
    ver.set_defaults(func=cmd_verify)
    return parser


def _build_problem(cfg, resolution=None):
    p = cfg.problem
    builder = PROBLEMS[p.preset]
    kwargs = {
        "n": resolution if resolution is not None else p.resolution,
        "volume_target": p.volume_target,
        "delta_eta": p.delta_eta,
        "x_min": p.x_min,
    }
    accepted = inspect.signature(builder).parameters
    for key in ("load_width", "load_magnitude", "load_center", "solid_depth"):
        value = getattr(p, key)
        if value is None:
            continue
        if key not in accepted:
            raise ConfigError(
                f"[problem] {key} is not supported by preset {p.preset!r}"
            )
        kwargs[key] = value
    return builder(**kwargs)


def _material(cfg):
    m = cfg.material
    return BaseMaterial(E0=m.E0, nu0=m.nu0, E_min_ratio=m.E_min_ratio)


def _spec_overrides(cfg):
    o = cfg.optimizer
    over = dict(
        interpolation=o.interpolation,
        simp_penalty=o.simp_penalty,
        n_eig=o.n_eig,
        ks_penalty=o.ks_penalty,
        pnorm_exponent=o.pnorm_exponent,
        move=o.move,
        retarget_every=o.retarget_every,
        correction_blend=o.correction_blend,
        seed=o.seed,
    )
    if o.beta_override > 0:
        over["beta_override"] = o.beta_override
    return over


def _run_phase(problem, spec, material, threads, warm):
    opt = Optimizer(problem.mesh, problem.boundary, spec, material=material,
                    threads=threads)
    x0 = s0 = None
    if warm is not None:
        x0, s0 = warm
    result = opt.run(x0=x0, s0=s0)
    return opt, result


def _save_phase(outdir, tag, spec, opt, result):
    beta = opt._beta(spec.max_iterations - 1)
    save_checkpoint(
        os.path.join(outdir, f"checkpoint_{tag}.npz"),
        result.x, result.s, spec.max_iterations, beta,
        result.correction, result.vstar_d, result.refs,
    )


def cmd_optimize(args):
    cfg = load_config(args.config)
    if args.dry_run:
        print(json.dumps(cfg.as_dict(), indent=2, sort_keys=True))
        return EXIT_OK
    problem = _build_problem(cfg)
    material = _material(cfg)
    o = cfg.optimizer
    outdir = cfg.output.directory
    os.makedirs(outdir, exist_ok=True)

    warm = None
    if args.restart:
        ck = load_checkpoint(args.restart)
        warm = (ck["x"], ck["s"])

    history = []
    phases = []
    if o.objective == "weighted":
        for omega, iters in phase_plan(o):
            spec = make_spec(problem, objective="weighted", omega=omega,
                             max_iterations=iters,
                             stress_constraint=o.stress_constraint,
                             stress_start_iter=o.stress_start_iter,
                             **_spec_overrides(cfg))
            opt, result = _run_phase(problem, spec, material, o.threads, warm)
            warm = (result.x, result.s)
            tag = f"omega{omega:g}"
            phases.append((tag, spec, opt, result))
            for rec in result.history:
                history.append({"phase": tag, **rec})
    else:
        cap = o.compliance_cap
        if cap <= 0:
            ref_spec = make_spec(problem, objective="weighted", omega=1.0,
                                 max_iterations=o.reference_iterations,
                                 **_spec_overrides(cfg))
            opt, result = _run_phase(problem, ref_spec, material, o.threads,
                                     None)
            ref = final_metrics(problem, ref_spec, result.x, result.s)
            cap = (1.0 + o.compliance_relaxation) * ref["compliance_e"]
            phases.append(("reference", ref_spec, opt, result))
            for rec in result.history:
                history.append({"phase": "reference", **rec})
            print(f"reference eroded compliance {ref['compliance_e']:.6e} "
                  f"-> cap {cap:.6e}")
        iters = o.iterations if isinstance(o.iterations, int) \
            else o.iterations[-1]
        spec = make_spec(problem, objective="blf", compliance_cap=cap,
                         max_iterations=iters,
                         stress_constraint=o.stress_constraint,
                         stress_start_iter=o.stress_start_iter,
                         **_spec_overrides(cfg))
        opt, result = _run_phase(problem, spec, material, o.threads, warm)
        phases.append(("blf", spec, opt, result))
        for rec in result.history:
            history.append({"phase": "blf", **rec})

    for tag, spec, opt, result in phases:
        _save_phase(outdir, tag, spec, opt, result)
    tag, spec, opt, result = phases[-1]
    beta = opt._beta(spec.max_iterations - 1)
    save_checkpoint(os.path.join(outdir, "checkpoint.npz"),
                    result.x, result.s, spec.max_iterations, beta,
                    result.correction, result.vstar_d, result.refs)
    write_history_csv(os.path.join(outdir, "history.csv"), history)

    metrics = final_metrics(problem, spec, result.x, result.s,
                            stress_active=spec.stress_constraint)
    _write_field_artifacts(cfg, problem, spec, opt, result, outdir)
    summary = {k: v for k, v in metrics.items()
               if isinstance(v, (int, float)) and np.isfinite(v)}
    write_manifest(os.path.join(outdir, "manifest.json"), {
        "config": cfg.as_dict(),
        "versions": _versions(),
        "final": summary,
    })
    lam = metrics.get("lambda1_b", float("nan"))
    print(f"done: lambda1(blueprint) = {lam:.4f}, "
          f"C_e = {metrics['compliance_e']:.6e}, "
          f"V_b = {metrics['volume_b']:.4f}")
    return EXIT_OK


def _write_field_artifacts(cfg, problem, spec, opt, result, outdir):
    state = opt.fields.compose(result.x, result.s,
                               opt._beta(spec.max_iterations - 1))
    if cfg.output.save_fields:
        cell = {"x_tilde": state.x_tilde}
        for m in REALIZATIONS:
            cell[f"rho_{m}"] = state.rho[m]
            cell[f"sbar_{m}"] = state.sbar[m]
        point = {}
        if cfg.output.save_modes:
            sr = opt._solve_realization("b", state.rho["b"], need_eigen=True)
            point["mode1"] = sr.result.phis[:, 0]
            cell["mode1_energy"] = opt.problem.strain_energy_density(
                sr.mu, sr.kappa, sr.result.phis[:, 0])
        write_vtk(os.path.join(outdir, "fields.vtk"), problem.mesh,
                  cell_fields=cell, point_fields=point)
    if cfg.output.save_images:
        write_pgm(os.path.join(outdir, "rho_b.pgm"), problem.mesh,
                  state.rho["b"])
        write_pgm(os.path.join(outdir, "x_tilde.pgm"), problem.mesh,
                  state.x_tilde)


def _versions():
    import scipy

    return {"buckopt": __version__, "numpy": np.__version__,
            "scipy": scipy.__version__}


def cmd_dehomogenize(args):
    cfg = load_config(args.config)
    problem = _build_problem(cfg)
    d = cfg.dehom
    outdir = cfg.output.directory
    os.makedirs(outdir, exist_ok=True)
    fields_path = args.fields or os.path.join(outdir, "checkpoint.npz")
    try:
        ck = load_checkpoint(fields_path)
    except OSError as err:
        raise ConfigError(f"cannot read fields {fields_path}: {err}") from err

    fields = DesignFields(problem.mesh, cfg.problem.delta_eta,
                          x_min=cfg.problem.x_min)
    state = fields.compose(ck["x"], ck["s"], ck["beta"])
    fine_problem = _build_problem(
        cfg, resolution=cfg.problem.resolution * d.refinement)
    use_shell = d.shell if args.shell is None else args.shell
    shell_radius = d.shell_radius if d.shell_radius > 0 else None

    rows = []
    for eps in d.epsilons:
        lam1 = []
        for ox, oy in itertools.product(d.offsets, d.offsets):
            lat = build_lattice(state.rho["b"], problem.mesh,
                                fine_problem.mesh, eps, offset=(ox, oy),
                                x_min=cfg.problem.x_min)
            if use_shell:
                lat = close_shell(lat, state.sbar["b"], problem.mesh,
                                  shell_radius or eps)
            val = validate_fine(lat.indicator, fine_problem.mesh,
                                fine_problem.boundary, n_eig=d.n_eig,
                                seed=cfg.optimizer.seed)
            rows.append({
                "epsilon": eps, "x_off": ox, "y_off": oy,
                "lambdas": val.lambdas, "compliance": val.compliance,
                "volume_fraction": val.volume_fraction,
                "local_mode": val.local_mode,
            })
            lam1.append(val.lambdas[0])
            if (ox, oy) == (0.0, 0.0):
                suffix = "_shell" if use_shell else ""
                write_pbm(
                    os.path.join(outdir, f"lattice_eps{eps:g}{suffix}.pbm"),
                    fine_problem.mesh, lat.indicator)
        lam1 = np.array(lam1)
        print(f"eps={eps:g}: lambda1 mean {lam1.mean():.4f} "
              f"min {lam1.min():.4f} max {lam1.max():.4f}")

    suffix = "_shell" if use_shell else ""
    write_sweep_csv(os.path.join(outdir, f"dehom_sweep{suffix}.csv"),
                    rows, d.n_eig)
    write_manifest(os.path.join(outdir, f"dehom_manifest{suffix}.json"), {
        "config": cfg.as_dict(),
        "fields": os.path.basename(fields_path),
        "shell": bool(use_shell),
        "versions": _versions(),
    })
    return EXIT_OK


# -- verification suite ----------------------------------------------------

def _check_gradient_fd():
    problem = rect_problem(n=5, volume_target=0.5)
    spec = make_spec(problem, objective="weighted", omega=0.4, n_eig=4,
                     stress_constraint=True, beta_override=2.0)
    opt = Optimizer(problem.mesh, problem.boundary, spec)
    rng = np.random.default_rng(3)
    x = rng.uniform(0.3, 0.9, problem.mesh.n_elem)
    s = rng.uniform(0.4, 1.0, problem.mesh.n_elem)
    ev = opt.evaluate_design(x, s, 2.0, stress_active=True)

    h = 1e-6
    worst = 0.0
    for row in ev.rows:
        grad = np.concatenate([row.grad_x, row.grad_s])
        idx = np.argsort(np.abs(grad))[-8:]
        for k in idx:
            xp, sp = x.copy(), s.copy()
            xm, sm = x.copy(), s.copy()
            if k < x.size:
                xp[k] += h
                xm[k] -= h
            else:
                sp[k - x.size] += h
                sm[k - x.size] -= h
            kw = dict(stress_active=True, with_gradients=False,
                      update_correction_factor=False)
            fp = _row_value(opt.evaluate_design(xp, sp, 2.0, **kw), row.name)
            fm = _row_value(opt.evaluate_design(xm, sm, 2.0, **kw), row.name)
            fd = (fp - fm) / (2 * h)
            err = abs(fd - grad[k]) / max(abs(fd), abs(grad[k]), 1e-12)
            worst = max(worst, err)
    return worst < 1e-3, f"worst rel err {worst:.3e}"


def _row_value(evaluation, name):
    for row in evaluation.rows:
        if row.name == name:
            return row.value
    raise KeyError(name)


def _check_ww_calibration():
    fit = StrengthFit(E0=1.0)
    worst = 0.0
    for xt in np.linspace(0.1, 0.9, 9):
        sc, st, sb = (float(fit.raw(xt, k)[0]) for k in "ctb")
        states = np.array([
            [-sc, 0.0, 0.0],
            [st, 0.0, 0.0],
            [-sb, -sb, 0.0],
        ])
        eq = equivalent_stress(states, np.full(3, xt), fit, relax=False)
        worst = max(worst, float(np.abs(eq.value - 1.0).max()))
    return worst < 1e-8, f"worst |sigma_eq - 1| = {worst:.3e}"


def _check_euler_column():
    problem = euler_strip_problem()
    val = validate_fine(np.ones(problem.mesh.n_elem), problem.mesh,
                        problem.boundary, n_eig=3)
    oracle = np.pi**2 / 12.0 / (4 * 10.0**2) / 1e-3
    rel = abs(val.lambdas[0] - oracle) / oracle
    return rel < 0.02, f"lambda1 {val.lambdas[0]:.4f} vs {oracle:.4f} " \
                       f"({rel:.2%})"


def _check_areal_fraction():
    from .mesh import build_rect_domain

    coarse = build_rect_domain(8, 8, 1.0)
    fine = build_rect_domain(512, 512, 1.0)
    worst = 0.0
    for rho in (0.3, 0.5, 0.75):
        lat = build_lattice(np.full(coarse.n_elem, rho), coarse, fine,
                            epsilon=0.11)
        worst = max(worst, abs(lat.volume_fraction - rho) / rho)
    return worst < 0.02, f"worst areal error {worst:.2%}"


_CHECKS = (
    ("gradient-fd", _check_gradient_fd),
    ("ww-calibration", _check_ww_calibration),
    ("euler-column", _check_euler_column),
    ("areal-fraction", _check_areal_fraction),
)


def cmd_verify(args):
    selected = [(n, f) for n, f in _CHECKS if args.filter in n]
    if not selected:
        print(f"no checks match filter {args.filter!r}", file=sys.stderr)
        return EXIT_VERIFY
    failed = 0
    for name, fn in selected:
        ok, detail = fn()
        print(f"{'PASS' if ok else 'FAIL'}  {name:<16} {detail}")
        failed += 0 if ok else 1
    if failed:
        print(f"{failed} of {len(selected)} checks failed")
        return EXIT_VERIFY
    print(f"all {len(selected)} checks passed")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
