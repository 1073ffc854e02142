"""De-homogenization of graded designs into explicit triangular lattices.

The blueprint density field is mapped onto a fine mesh, converted to bar
widths, and rendered as the union of three periodic layer indicators spaced
60 degrees apart. Void interfaces can optionally be closed off with a shell
whose thickness tracks the local bar width. The resulting binary structure
is re-analyzed (linear solve + buckling eigensolve) on the fine mesh to
check that the graded design's performance survives the realization.
"""

from dataclasses import dataclass

import numpy as np
import scipy.fft
from scipy import ndimage

from . import buckling
from .fem import FemProblem
from .material import BaseMaterial, interpolate_moduli

# Layer wave directions: the density wave of layer i runs along
# (cos theta_i, sin theta_i), so the bars lie perpendicular to it.
LAYER_ANGLES = (0.0, np.pi / 3.0, 2.0 * np.pi / 3.0)

# Blueprint density cutoffs: below -> void, above -> solid.
VOID_CUTOFF = 0.05
SOLID_CUTOFF = 0.95

# A bar narrower than this many fine elements cannot be represented.
MIN_CELLS_PER_BAR = 3.0

# Cell positions used in the placement-robustness sweep, in units of the
# cell size (per axis, giving the 4x4 = 16 position grid).
OFFSET_FRACTIONS = (-0.25, 0.0, 0.25, 0.5)

# Critical-mode classifier: a mode is local if more than ENERGY_SHARE of
# its strain energy sits in fewer than ELEMENT_SHARE of the solid elements.
LOCAL_MODE_ENERGY_SHARE = 0.8
LOCAL_MODE_ELEMENT_SHARE = 0.02


class ResolutionError(ValueError):
    """Cell size too small for the fine mesh to resolve the thinnest bar."""


def density_to_width(rho):
    """Relative bar width w(rho) such that the three-layer union has areal
    fraction exactly rho. Inverse of width_to_density; w(1) = 2/3."""
    r = np.clip(rho, 0.0, 1.0)
    return (2.0 / 3.0) * (1.0 - np.sqrt(1.0 - r))


def width_to_density(w):
    """Areal fraction of the triangular lattice with relative bar width w."""
    return 1.0 - (1.0 - 1.5 * np.asarray(w, dtype=float)) ** 2


def map_to_fine(values, coarse_mesh, fine_mesh):
    """Bilinear map of an element field from the coarse to the fine mesh.

    Fine elements whose interpolation stencil touches a passive coarse
    element take the nearest coarse value instead, so imposed geometry
    (load patches, the passive void corner) keeps a crisp boundary rather
    than bleeding into the design.
    """
    grid = np.asarray(values, dtype=float).reshape(coarse_mesh.ny, coarse_mesh.nx)
    cf = fine_mesh.elem_centers
    gx = cf[:, 0] / coarse_mesh.dx - 0.5
    gy = cf[:, 1] / coarse_mesh.dx - 0.5
    coords = np.vstack([gy, gx])
    fine = ndimage.map_coordinates(grid, coords, order=1, mode="nearest")
    passive = (coarse_mesh.passive_solid | coarse_mesh.passive_void).astype(float)
    pgrid = passive.reshape(coarse_mesh.ny, coarse_mesh.nx)
    touched = ndimage.map_coordinates(pgrid, coords, order=1, mode="nearest") > 1e-12
    if touched.any():
        nearest = ndimage.map_coordinates(grid, coords, order=0, mode="nearest")
        fine = np.where(touched, nearest, fine)
    return fine


def layer_union(width_fine, fine_mesh, epsilon, offset=(0.0, 0.0)):
    """Binary union of the three bar layers for a per-element width field.

    Solid where the normalized distance to the nearest bar centerline of
    any layer is at most w/2, which makes each layer areal fraction w and
    the union exactly width_to_density(w) in the resolved limit.
    """
    c = fine_mesh.elem_centers
    ox, oy = offset[0] * epsilon, offset[1] * epsilon
    half_w = 0.5 * np.asarray(width_fine, dtype=float)
    solid = np.zeros(fine_mesh.n_elem, dtype=bool)
    for theta in LAYER_ANGLES:
        t = (np.cos(theta) * (c[:, 0] - ox) + np.sin(theta) * (c[:, 1] - oy)) / epsilon
        u = np.abs(t - np.round(t))
        solid |= u <= half_w
    return solid


@dataclass
class Lattice:
    """Rendered fine-scale structure and the fields used to build it."""

    fine_mesh: object
    epsilon: float
    offset: tuple
    rho_fine: np.ndarray     # mapped blueprint density
    width_fine: np.ndarray   # relative bar widths
    indicator: np.ndarray    # binary structure (lattice, + shell if closed)
    shell: np.ndarray = None # binary shell band, once close_shell ran

    @property
    def volume_fraction(self):
        """Solid fraction over the domain (passive void excluded)."""
        mask = ~self.fine_mesh.passive_void
        return float(self.indicator[mask].mean())


def build_lattice(rho_coarse, coarse_mesh, fine_mesh, epsilon,
                  offset=(0.0, 0.0), x_min=0.0):
    """Render the blueprint density field as an explicit triangular lattice.

    x_min is the design's lower bound on the infill density. When it lies
    above the void cutoff every rendered bar is guaranteed at least
    w(x_min)*epsilon wide, and the cell size is rejected if that width
    spans fewer than MIN_CELLS_PER_BAR fine elements. Designs without such
    a bound (x_min at or below the cutoff) carry no guarantee and are
    rendered as-is; under-resolved bars then simply appear fragmented.
    """
    fine_dx = fine_mesh.dx
    if x_min > VOID_CUTOFF:
        w_min = float(density_to_width(x_min)) * epsilon
        if w_min < MIN_CELLS_PER_BAR * fine_dx:
            need = MIN_CELLS_PER_BAR * fine_dx / density_to_width(x_min)
            raise ResolutionError(
                f"cell size {epsilon:g} gives minimum bar width {w_min:.3e}, "
                f"below {MIN_CELLS_PER_BAR:g} fine elements "
                f"({MIN_CELLS_PER_BAR * fine_dx:.3e}); need epsilon >= {need:.3g}"
            )

    rho_fine = map_to_fine(rho_coarse, coarse_mesh, fine_mesh)
    width_fine = density_to_width(rho_fine)
    solid = layer_union(width_fine, fine_mesh, epsilon, offset)
    solid &= rho_fine >= VOID_CUTOFF
    solid |= rho_fine > SOLID_CUTOFF
    solid[fine_mesh.passive_solid] = True
    solid[fine_mesh.passive_void] = False
    return Lattice(
        fine_mesh=fine_mesh,
        epsilon=epsilon,
        offset=tuple(offset),
        rho_fine=rho_fine,
        width_fine=width_fine,
        indicator=solid.astype(float),
    )


def helmholtz_filter(field, nx, ny, dx, radius):
    """Neumann Helmholtz filter (-r^2 lap + 1) u = f on the element grid,
    solved spectrally with a cosine transform."""
    grid = np.asarray(field, dtype=float).reshape(ny, nx)
    kx = np.pi * np.arange(nx) / (nx * dx)
    ky = np.pi * np.arange(ny) / (ny * dx)
    denom = 1.0 + radius ** 2 * (kx[None, :] ** 2 + ky[:, None] ** 2)
    spec = scipy.fft.dctn(grid, type=2, norm="ortho") / denom
    return scipy.fft.idctn(spec, type=2, norm="ortho").ravel()


def shell_transition(width_fine, epsilon, shell_radius):
    """Projection-threshold offsets giving a shell of physical thickness
    w*epsilon under the filtered half-space interface profile."""
    w_phys = np.asarray(width_fine, dtype=float) * epsilon
    return 0.5 - 0.5 * np.exp(-2.0 * np.sqrt(3.0) * w_phys / shell_radius)


def close_shell(lattice, void_indicator, coarse_mesh, shell_radius=None):
    """Add a solid shell along void interfaces of the blueprint design.

    void_indicator is the projected blueprint indicator field (1 material,
    0 void) on the coarse mesh. Filtering it smears the interface over the
    detection radius; the band between the undisturbed threshold 1/2 and
    its eroded counterpart 1/2 + delta then hugs the material side of the
    interface with physical thickness w*epsilon. Defaults the detection
    radius to the cell size.
    """
    if shell_radius is None:
        shell_radius = lattice.epsilon
    r = shell_radius / (2.0 * np.sqrt(3.0))
    s_filt = helmholtz_filter(
        void_indicator, coarse_mesh.nx, coarse_mesh.ny, coarse_mesh.dx, r
    )
    fine = lattice.fine_mesh
    s_fine = map_to_fine(s_filt, coarse_mesh, fine)
    delta = shell_transition(lattice.width_fine, lattice.epsilon, shell_radius)
    band = (s_fine >= 0.5) & (s_fine < 0.5 + delta)
    band &= lattice.rho_fine >= VOID_CUTOFF
    band &= ~fine.passive_void
    merged = np.maximum(lattice.indicator, band.astype(float))
    return Lattice(
        fine_mesh=fine,
        epsilon=lattice.epsilon,
        offset=lattice.offset,
        rho_fine=lattice.rho_fine,
        width_fine=lattice.width_fine,
        indicator=merged,
        shell=band.astype(float),
    )


@dataclass
class FineValidation:
    lambdas: np.ndarray
    compliance: float
    volume_fraction: float
    mode_energy: np.ndarray        # element strain energy density, mode 1
    energy_element_share: float    # fraction of solid elements holding the
                                   # LOCAL_MODE_ENERGY_SHARE energy bulk
    local_mode: bool


def validate_fine(indicator, fine_mesh, boundary, n_eig=6, material=None,
                  seed=0):
    """Linear + buckling analysis of a binary structure on the fine mesh.

    The stiffness keeps the usual soft-void floor so the system stays
    definite; the stress stiffness uses the floor-free moduli, so void
    elements cannot destabilize. Classifies the critical mode as local when
    its strain energy concentrates in a tiny share of the solid elements.
    """
    mat = material if material is not None else BaseMaterial()
    rho = np.asarray(indicator, dtype=float)
    prob = FemProblem(fine_mesh, boundary.fixed_dofs, boundary.f)

    mu, kappa, _, _ = interpolate_moduli(rho, mat, "hs", floor=True)
    mu_g, kappa_g, _, _ = interpolate_moduli(rho, mat, "hs", floor=False)
    K_red = prob.assemble_stiffness(mu, kappa)
    if fine_mesh.n_dof <= buckling.LOBPCG_DOF_THRESHOLD:
        lu = prob.factorize(K_red)
        u = prob.solve_equilibrium(lu)
        G_red = prob.assemble_geometric(mu_g, kappa_g, u)
        res = buckling.solve_buckling(
            K_red, G_red, n_eig, prob.free, fine_mesh.n_dof, lu=lu, seed=seed
        )
    else:
        u = _solve_equilibrium_amg(prob, K_red, fine_mesh)
        G_red = prob.assemble_geometric(mu_g, kappa_g, u)
        coords = fine_mesh.coords[prob.free // 2]
        res = buckling.solve_buckling_lobpcg(
            K_red, G_red, n_eig, prob.free, fine_mesh.n_dof,
            seed=seed, coords_free=coords,
        )
    if res.degenerate:
        raise buckling.SolverFailure(
            "degenerate stress state in fine validation"
        )
    comp = prob.compliance(u)

    phi1 = res.phis[:, 0]
    energy = prob.strain_energy_density(mu, kappa, phi1)
    solid = rho > 0.5
    e_solid = np.sort(energy[solid])[::-1]
    total = e_solid.sum()
    if total <= 0.0:
        share = 1.0
    else:
        hot = np.searchsorted(
            np.cumsum(e_solid), LOCAL_MODE_ENERGY_SHARE * total
        ) + 1
        share = hot / max(solid.sum(), 1)
    mask = ~fine_mesh.passive_void
    return FineValidation(
        lambdas=res.lambdas,
        compliance=float(comp),
        volume_fraction=float(rho[mask].mean()),
        mode_energy=energy,
        energy_element_share=float(share),
        local_mode=bool(share < LOCAL_MODE_ELEMENT_SHARE),
    )


def _solve_equilibrium_amg(prob, K_red, fine_mesh):
    """CG + smoothed-aggregation AMG for meshes too large to factorize."""
    import pyamg
    from scipy.sparse import linalg as spla

    free = prob.free
    n = K_red.shape[0]
    B = np.zeros((n, 3))
    coords = fine_mesh.coords[free // 2]
    is_u = free % 2 == 0
    B[is_u, 0] = 1.0
    B[~is_u, 1] = 1.0
    B[is_u, 2] = -coords[is_u, 1]
    B[~is_u, 2] = coords[~is_u, 0]
    ml = pyamg.smoothed_aggregation_solver(K_red.tocsr(), B=B, max_coarse=400)
    prec = ml.aspreconditioner(cycle="V")
    rhs = prob.f[free]
    u_red, info = spla.cg(K_red.tocsr(), rhs, M=prec, rtol=1e-10, atol=0.0,
                          maxiter=2000)
    if info != 0:
        raise buckling.SolverFailure(f"AMG-CG equilibrium solve failed ({info})")
    u = np.zeros(fine_mesh.n_dof)
    u[free] = u_red
    return u


def dehomogenize(rho_coarse, coarse_mesh, fine_problem, epsilon,
                 offset=(0.0, 0.0), x_min=0.0, void_indicator=None,
                 shell_radius=None, n_eig=6, validate=True, seed=0):
    """Full pipeline: render, optionally close shells, re-validate.

    fine_problem carries the refined mesh and matching boundary conditions.
    Returns (lattice, validation); validation is None when validate=False.
    """
    lat = build_lattice(
        rho_coarse, coarse_mesh, fine_problem.mesh, epsilon,
        offset=offset, x_min=x_min,
    )
    if void_indicator is not None:
        lat = close_shell(lat, void_indicator, coarse_mesh, shell_radius)
    if not validate:
        return lat, None
    val = validate_fine(
        lat.indicator, fine_problem.mesh, fine_problem.boundary,
        n_eig=n_eig, seed=seed,
    )
    return lat, val
