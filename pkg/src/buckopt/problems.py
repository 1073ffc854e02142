"""Benchmark problem setups and their optimization protocols.

Two domains: a square plate under opposed inward edge loads (design
symmetric about both center axes, physics unsymmetric), and an L-beam
bracket loaded downward on the top edge. The module also provides the
multi-phase drivers used by both benchmarks: the omega sweep that trades
compliance against buckling, and the two-phase compliance-reference /
BLF-maximization protocol.
"""

from dataclasses import dataclass, replace

import numpy as np

from .mesh import (BoundarySpec, StructuredMesh, build_lbeam_domain,
                   build_rect_domain, build_strip_domain, edge_load,
                   mirror_map, nearest_node, nodes_on_edge)
from .optimizer import Optimizer, ProblemSpec


@dataclass(frozen=True)
class BenchmarkProblem:
    name: str
    mesh: StructuredMesh
    boundary: BoundarySpec
    volume_target: float
    delta_eta: float
    x_min: float


def uniaxial_problem(n=200, load_width=0.04, load_magnitude=1e-3,
                     solid_depth=0.025, volume_target=0.15, delta_eta=0.25,
                     x_min=0.0):
    """Square plate squeezed by two opposed horizontal edge loads.

    Mid-edge nodes are held vertically, the center node horizontally; the
    load strips carry passive solid pads of depth `solid_depth`.
    """
    base = build_rect_domain(n, n, 1.0)
    c = base.elem_centers
    half = load_width / 2.0
    at_load_height = np.abs(c[:, 1] - 0.5) < half
    solid = ((c[:, 0] < solid_depth) | (c[:, 0] > 1.0 - solid_depth)) \
        & at_load_height
    mesh = replace(base, passive_solid=solid)

    f = edge_load(mesh, "left", 0.5, load_width, load_magnitude, (1.0, 0.0))
    f += edge_load(mesh, "right", 0.5, load_width, load_magnitude, (-1.0, 0.0))

    fixed = []
    for xy in ((0.0, 0.5), (1.0, 0.5), (0.5, 0.0), (0.5, 1.0)):
        fixed.append(2 * nearest_node(mesh, *xy) + 1)   # v = 0
    fixed.append(2 * nearest_node(mesh, 0.5, 0.5))      # u = 0 at center
    boundary = BoundarySpec(
        fixed_dofs=np.unique(np.array(fixed, dtype=np.int64)), f=f,
        symmetry_maps=(mirror_map(mesh, "h"), mirror_map(mesh, "v")))
    return BenchmarkProblem("uniaxial", mesh, boundary,
                            volume_target, delta_eta, x_min)


def lbeam_problem(n=100, load_width=0.1, load_center=0.75,
                  load_magnitude=1e-3, volume_target=0.2, delta_eta=0.1,
                  x_min=0.27):
    """L-beam bracket: upper-left quadrant void, downward load on top edge.

    The active left boundary (y <= 0.5) is held horizontally; the strip
    covered by the lower-left passive solid is also held vertically.
    """
    mesh = build_lbeam_domain(n)
    f = edge_load(mesh, "top", load_center, load_width, load_magnitude,
                  (0.0, -1.0))
    left_all = nodes_on_edge(mesh, "left", 0.0, 0.5)
    left_low = nodes_on_edge(mesh, "left", 0.0, 0.05)
    fixed = np.concatenate([2 * left_all, 2 * left_low + 1])
    boundary = BoundarySpec(fixed_dofs=np.unique(fixed), f=f)
    return BenchmarkProblem("lbeam", mesh, boundary,
                            volume_target, delta_eta, x_min)


def rect_problem(n=100, load_width=0.5, load_magnitude=1e-3,
                 volume_target=0.3, delta_eta=0.25, x_min=0.0):
    """Plain square sandbox: clamped left edge, compressive load on the
    right edge. No passive regions, no symmetry."""
    mesh = build_rect_domain(n, n, 1.0)
    f = edge_load(mesh, "right", 0.5, load_width, load_magnitude, (-1.0, 0.0))
    left = nodes_on_edge(mesh, "left", 0.0, 1.0)
    fixed = np.concatenate([2 * left, 2 * left + 1])
    boundary = BoundarySpec(fixed_dofs=np.unique(fixed), f=f)
    return BenchmarkProblem("rect", mesh, boundary,
                            volume_target, delta_eta, x_min)


def euler_strip_problem(nx=160, ny=16, length=10.0, load_magnitude=1e-3):
    """Fixed-free solid strip under a consistent end traction.

    The classic quarter-wave column: lambda_1 * load should approach
    pi^2 E I / (4 L^2) with I = b^3/12 for the unit-thickness cross
    section of in-plane width b = ny*dx.
    """
    mesh = build_strip_domain(nx, ny, length)
    b = mesh.ny * mesh.dx
    f = edge_load(mesh, "right", b / 2.0, b, load_magnitude, (-1.0, 0.0))
    left = nodes_on_edge(mesh, "left", 0.0, b)
    fixed = np.concatenate([2 * left, 2 * left + 1])
    boundary = BoundarySpec(fixed_dofs=np.unique(fixed), f=f)
    return BenchmarkProblem("euler_strip", mesh, boundary, 1.0, 0.0, 0.0)


PROBLEMS = {
    "uniaxial": uniaxial_problem,
    "lbeam": lbeam_problem,
    "rect": rect_problem,
}


def make_spec(problem, **overrides):
    base = dict(volume_target=problem.volume_target,
                delta_eta=problem.delta_eta, x_min=problem.x_min)
    base.update(overrides)
    return ProblemSpec(**base)


def final_metrics(problem, spec, x, s, *, stress_active=False):
    """Re-evaluate a finished design at the phase's final beta.

    The run loop records evaluations before each update, so the last
    iterate itself is never measured inside run(); this closes that gap.
    Uses a fresh Optimizer so no stale normalizers leak in.
    """
    opt = Optimizer(problem.mesh, problem.boundary, spec)
    beta = opt._beta(spec.max_iterations - 1)
    ev = opt.evaluate_design(x, s, beta, stress_active=stress_active,
                             with_gradients=False, force_eigen=True)
    return ev.diagnostics


def omega_sweep(problem, omegas, iterations, interpolation,
                warm=None, stress=False, **spec_overrides):
    """Sequence of weighted-objective phases with decreasing omega.

    Each phase warm-starts from the previous one (or from `warm`), with a
    fresh continuation and fresh normalizers. Returns the list of
    (omega, spec, result) in execution order.
    """
    x = s = None
    if warm is not None:
        x, s = warm
    phases = []
    for omega, iters in zip(omegas, iterations):
        spec = make_spec(problem, objective="weighted", omega=omega,
                         interpolation=interpolation, max_iterations=iters,
                         stress_constraint=stress, **spec_overrides)
        opt = Optimizer(problem.mesh, problem.boundary, spec)
        result = opt.run(x0=x, s0=s)
        x, s = result.x, result.s
        phases.append((omega, spec, result))
    return phases


def compliance_reference(problem, interpolation, iterations,
                         **spec_overrides):
    """Compliance-only phase; returns (result, eroded compliance at end)."""
    spec = make_spec(problem, objective="weighted", omega=1.0,
                     interpolation=interpolation, max_iterations=iterations,
                     **spec_overrides)
    opt = Optimizer(problem.mesh, problem.boundary, spec)
    result = opt.run()
    metrics = final_metrics(problem, spec, result.x, result.s)
    return result, metrics["compliance_e"]


def blf_phase(problem, interpolation, iterations, compliance_cap,
              stress=False, stress_start_iter=0, warm=None, **spec_overrides):
    """BLF-maximization phase under an eroded-compliance cap."""
    spec = make_spec(problem, objective="blf", interpolation=interpolation,
                     max_iterations=iterations, compliance_cap=compliance_cap,
                     stress_constraint=stress,
                     stress_start_iter=stress_start_iter, **spec_overrides)
    opt = Optimizer(problem.mesh, problem.boundary, spec)
    x = s = None
    if warm is not None:
        x, s = warm
    result = opt.run(x0=x, s0=s)
    return spec, result
