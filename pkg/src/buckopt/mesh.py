"""Structured Q4 meshes, boundary conditions, loads and passive regions.

Nodes are numbered row-major with x fastest: node (ix, iy) has index
iy*(nx+1) + ix, coordinates (ix*dx, iy*dx), y pointing up. Element (ex, ey)
has index ey*nx + ex and counterclockwise corner nodes starting at the
lower-left. DOFs are interleaved (2*node, 2*node + 1) = (u, v).
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class StructuredMesh:
    nx: int
    ny: int
    dx: float
    coords: np.ndarray         # (n_nodes, 2)
    conn: np.ndarray           # (n_elem, 4), counterclockwise
    volumes: np.ndarray        # (n_elem,)
    passive_solid: np.ndarray  # (n_elem,) bool
    passive_void: np.ndarray   # (n_elem,) bool
    elem_dofs: np.ndarray = field(init=False)  # (n_elem, 8)

    def __post_init__(self):
        dofs = np.empty((self.conn.shape[0], 8), dtype=np.int64)
        dofs[:, 0::2] = 2 * self.conn
        dofs[:, 1::2] = 2 * self.conn + 1
        object.__setattr__(self, "elem_dofs", dofs)

    @property
    def n_elem(self):
        return self.nx * self.ny

    @property
    def n_nodes(self):
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_dof(self):
        return 2 * self.n_nodes

    @property
    def active(self):
        """Design (non-passive) element mask."""
        return ~(self.passive_solid | self.passive_void)

    @property
    def elem_centers(self):
        ex = np.arange(self.nx)
        ey = np.arange(self.ny)
        cx, cy = np.meshgrid((ex + 0.5) * self.dx, (ey + 0.5) * self.dx)
        return np.column_stack([cx.ravel(), cy.ravel()])

    def node_id(self, ix, iy):
        return iy * (self.nx + 1) + ix

    def elem_id(self, ex, ey):
        return ey * self.nx + ex


@dataclass(frozen=True)
class BoundarySpec:
    """Fixed DOFs, assembled nodal loads and design-symmetry maps.

    symmetry_maps holds element-index involutions; applying each map's
    averaging in sequence produces the full orbit average.
    """

    fixed_dofs: np.ndarray
    f: np.ndarray
    symmetry_maps: tuple = ()

    @property
    def free_dofs_of(self):
        raise AttributeError("use free_dofs(mesh) helper")


def free_dofs(n_dof, fixed_dofs):
    mask = np.ones(n_dof, dtype=bool)
    mask[fixed_dofs] = False
    return np.flatnonzero(mask)


def build_rect_domain(nx, ny, side):
    """Square domain of extent `side` with nx x ny congruent square elements.

    `side` spans both directions, so nx != ny would need rectangular
    elements and is rejected.
    """
    if nx < 1 or ny < 1:
        raise ValueError("element counts must be >= 1")
    if side <= 0:
        raise ValueError("side must be positive")
    if side / nx != side / ny:
        raise ValueError("square elements require nx == ny on a square domain")
    return _grid(nx, ny, side / nx)


def build_strip_domain(nx, ny, width):
    """Rectangular strip of congruent square elements, all active.

    `width` is the horizontal extent; dx = width/nx and the vertical extent
    follows as ny*dx.
    """
    if nx < 1 or ny < 1:
        raise ValueError("element counts must be >= 1")
    if width <= 0:
        raise ValueError("width must be positive")
    return _grid(nx, ny, width / nx)


def _grid(nx, ny, dx):
    ix = np.arange(nx + 1)
    iy = np.arange(ny + 1)
    gx, gy = np.meshgrid(ix * dx, iy * dx)
    coords = np.column_stack([gx.ravel(), gy.ravel()])

    ex, ey = np.meshgrid(np.arange(nx), np.arange(ny))
    ex = ex.ravel()
    ey = ey.ravel()
    n0 = ey * (nx + 1) + ex
    conn = np.column_stack([n0, n0 + 1, n0 + nx + 2, n0 + nx + 1])

    n_elem = nx * ny
    return StructuredMesh(
        nx=nx,
        ny=ny,
        dx=dx,
        coords=coords,
        conn=conn.astype(np.int64),
        volumes=np.full(n_elem, dx * dx),
        passive_solid=np.zeros(n_elem, dtype=bool),
        passive_void=np.zeros(n_elem, dtype=bool),
    )


def build_lbeam_domain(n):
    """Unit-square n x n mesh with the upper-left quadrant passive void.

    Two passive-solid patches: under the load (0.1 wide, 0.05 tall, load
    center 0.25 from the right side) and at the lower-left corner
    (0.05 x 0.05). n must be even so the quadrant boundary is mesh-aligned.
    """
    if n < 2 or n % 2 != 0:
        raise ValueError("L-beam mesh requires an even element count")
    mesh = build_rect_domain(n, n, 1.0)
    c = mesh.elem_centers
    void = (c[:, 0] < 0.5) & (c[:, 1] > 0.5)
    solid = _in_box(c, 0.70, 0.80, 0.95, 1.00) | _in_box(c, 0.0, 0.05, 0.0, 0.05)
    return StructuredMesh(
        nx=mesh.nx,
        ny=mesh.ny,
        dx=mesh.dx,
        coords=mesh.coords,
        conn=mesh.conn,
        volumes=mesh.volumes,
        passive_solid=solid,
        passive_void=void,
    )


def _in_box(c, x0, x1, y0, y1):
    return (c[:, 0] > x0) & (c[:, 0] < x1) & (c[:, 1] > y0) & (c[:, 1] < y1)


def edge_load(mesh, side, center, width, magnitude, direction):
    """Nodal load vector for a distributed load on a boundary edge.

    The traction magnitude/width is integrated exactly against the linear
    edge shape functions, so the total applied load equals `magnitude` for
    any resolution and any alignment of the span with the grid.

    side: 'left' | 'right' | 'bottom' | 'top'; center/width parametrize the
    span along that side; direction is a 2-vector (not normalized here).
    """
    lo, hi = center - width / 2.0, center + width / 2.0
    t = magnitude / width
    f = np.zeros(mesh.n_dof)
    direction = np.asarray(direction, dtype=float)

    horizontal = side in ("bottom", "top")
    n_edges = mesh.nx if horizontal else mesh.ny
    for k in range(n_edges):
        a, b = k * mesh.dx, (k + 1) * mesh.dx
        c0, c1 = max(a, lo), min(b, hi)
        if c1 <= c0:
            continue
        # Exact integrals of the two linear shape functions over [c0, c1].
        la = ((b - c0) ** 2 - (b - c1) ** 2) / (2.0 * mesh.dx)
        lb = ((c1 - a) ** 2 - (c0 - a) ** 2) / (2.0 * mesh.dx)
        if horizontal:
            iy = 0 if side == "bottom" else mesh.ny
            na, nb = mesh.node_id(k, iy), mesh.node_id(k + 1, iy)
        else:
            ix = 0 if side == "left" else mesh.nx
            na, nb = mesh.node_id(ix, k), mesh.node_id(ix, k + 1)
        for node, w in ((na, la), (nb, lb)):
            f[2 * node] += t * w * direction[0]
            f[2 * node + 1] += t * w * direction[1]
    return f


def nodes_on_edge(mesh, side, lo=-np.inf, hi=np.inf):
    """Node indices on a boundary edge whose along-edge coordinate is in [lo, hi]."""
    if side in ("bottom", "top"):
        iy = 0 if side == "bottom" else mesh.ny
        ix = np.arange(mesh.nx + 1)
        pos = ix * mesh.dx
        ids = mesh.node_id(ix, iy)
    else:
        ix = 0 if side == "left" else mesh.nx
        iy = np.arange(mesh.ny + 1)
        pos = iy * mesh.dx
        ids = mesh.node_id(ix, iy)
    keep = (pos >= lo - 1e-12) & (pos <= hi + 1e-12)
    return ids[keep]


def nearest_node(mesh, x, y):
    ix = int(round(x / mesh.dx))
    iy = int(round(y / mesh.dx))
    ix = min(max(ix, 0), mesh.nx)
    iy = min(max(iy, 0), mesh.ny)
    return mesh.node_id(ix, iy)


def mirror_map(mesh, axis):
    """Element involution mirroring across the domain center.

    axis='h' mirrors across the horizontal center axis (flips ey),
    axis='v' across the vertical center axis (flips ex).
    """
    ex, ey = np.meshgrid(np.arange(mesh.nx), np.arange(mesh.ny))
    ex = ex.ravel()
    ey = ey.ravel()
    if axis == "h":
        mapped = (mesh.ny - 1 - ey) * mesh.nx + ex
    elif axis == "v":
        mapped = ey * mesh.nx + (mesh.nx - 1 - ex)
    else:
        raise ValueError("axis must be 'h' or 'v'")
    return mapped


def symmetrize(field_values, symmetry_maps):
    """Orbit-average a per-element field under the given commuting involutions."""
    out = np.asarray(field_values, dtype=float)
    for m in symmetry_maps:
        out = 0.5 * (out + out[m])
    return out
