"""Bilinear-quad plane stress FEM with a bulk/shear modulus split.

Element matrices are built once per mesh (all elements are congruent
squares): unit-modulus stiffness blocks K0_mu/K0_kappa, the centroid
strain-displacement operator B0, and the third-order tensors T_mu/T_kappa
with G0_m(u_e) = sum_l u_l T_m[l]. The latter make the stress stiffness
matrix exactly linear in the element displacements, which both the assembly
and the dG/du terms of the adjoint right-hand sides rely on.
"""

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

# Unit-modulus constitutive split: C = kappa*C0_KAPPA + mu*C0_MU reproduces
# plane stress with kappa = E/(2(1-nu)), mu = E/(2(1+nu)).
C0_KAPPA = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 0.0]])
C0_MU = np.array([[1.0, -1.0, 0.0], [-1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])

class SolverFailure(RuntimeError):
    """Raised when a linear solve or eigensolve cannot be completed."""


_GAUSS = 1.0 / np.sqrt(3.0)
_GPTS = [(-_GAUSS, -_GAUSS), (_GAUSS, -_GAUSS), (_GAUSS, _GAUSS), (-_GAUSS, _GAUSS)]


def _grad_shapes(xi, eta, h):
    """Cartesian shape-function gradients on a square element of side h."""
    dxi = 0.25 * np.array([-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)])
    deta = 0.25 * np.array([-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)])
    return (2.0 / h) * dxi, (2.0 / h) * deta


def _b_matrix(nx, ny):
    b = np.zeros((3, 8))
    b[0, 0::2] = nx
    b[1, 1::2] = ny
    b[2, 0::2] = ny
    b[2, 1::2] = nx
    return b


def _g_matrix(nx, ny):
    g = np.zeros((4, 8))
    g[0, 0::2] = nx
    g[1, 0::2] = ny
    g[2, 1::2] = nx
    g[3, 1::2] = ny
    return g


def _stress_block(s):
    """4x4 block-diagonal initial-stress matrix from sigma = (sxx, syy, sxy)."""
    sxx, syy, sxy = s
    blk = np.array([[sxx, sxy], [sxy, syy]])
    out = np.zeros((4, 4))
    out[:2, :2] = blk
    out[2:, 2:] = blk
    return out


class Kernels:
    """Element-level operators for a square Q4 element of side h."""

    def __init__(self, h):
        self.h = h
        detj = h * h / 4.0
        k_mu = np.zeros((8, 8))
        k_kappa = np.zeros((8, 8))
        t_mu = np.zeros((8, 8, 8))
        t_kappa = np.zeros((8, 8, 8))
        for xi, eta in _GPTS:
            nx, ny = _grad_shapes(xi, eta, h)
            b = _b_matrix(nx, ny)
            g = _g_matrix(nx, ny)
            k_mu += b.T @ C0_MU @ b * detj
            k_kappa += b.T @ C0_KAPPA @ b * detj
            for l in range(8):
                s_mu = C0_MU @ b[:, l]
                s_kappa = C0_KAPPA @ b[:, l]
                t_mu[l] += g.T @ _stress_block(s_mu) @ g * detj
                t_kappa[l] += g.T @ _stress_block(s_kappa) @ g * detj
        self.K0_mu = k_mu
        self.K0_kappa = k_kappa
        self.T_mu = t_mu
        self.T_kappa = t_kappa
        nx0, ny0 = _grad_shapes(0.0, 0.0, h)
        self.B0 = _b_matrix(nx0, ny0)


class FemProblem:
    """Assembly and solves on one mesh with fixed supports and loads.

    Matrices are assembled directly in the reduced (free-DOF) space;
    vectors stay full-length with zeros at fixed DOFs.
    """

    def __init__(self, mesh, fixed_dofs, f):
        self.mesh = mesh
        self.kernels = Kernels(mesh.dx)
        self.fixed_dofs = np.asarray(fixed_dofs, dtype=np.int64)
        self.f = np.asarray(f, dtype=float)

        mask = np.ones(mesh.n_dof, dtype=bool)
        mask[self.fixed_dofs] = False
        self.free = np.flatnonzero(mask)
        self.n_free = self.free.size
        red = -np.ones(mesh.n_dof, dtype=np.int64)
        red[self.free] = np.arange(self.n_free)
        rd = red[mesh.elem_dofs]                      # (n_elem, 8)
        rows = np.repeat(rd[:, :, None], 8, axis=2)
        cols = np.repeat(rd[:, None, :], 8, axis=1)
        keep = (rows >= 0) & (cols >= 0)
        self._keep = keep.ravel()
        self._rows = rows.ravel()[self._keep].astype(np.int32)
        self._cols = cols.ravel()[self._keep].astype(np.int32)
        self.f_free = self.f[self.free]

    # -- assembly ---------------------------------------------------------

    def _scatter_matrix(self, values):
        vals = values.reshape(-1)[self._keep]
        m = sparse.coo_matrix(
            (vals, (self._rows, self._cols)), shape=(self.n_free, self.n_free)
        )
        return m.tocsc()

    def assemble_stiffness(self, mu, kappa):
        k = self.kernels
        values = (
            mu[:, None, None] * k.K0_mu[None, :, :]
            + kappa[:, None, None] * k.K0_kappa[None, :, :]
        )
        return self._scatter_matrix(values)

    def assemble_geometric(self, mu_g, kappa_g, u):
        """Stress stiffness from the displacement state u; the moduli here
        use the floor-free interpolation so void carries no prestress."""
        k = self.kernels
        ue = u[self.mesh.elem_dofs]
        gm = np.einsum("jl,lab->jab", ue, k.T_mu)
        gk = np.einsum("jl,lab->jab", ue, k.T_kappa)
        values = mu_g[:, None, None] * gm + kappa_g[:, None, None] * gk
        return self._scatter_matrix(values)

    # -- solves -----------------------------------------------------------

    def factorize(self, K_red):
        try:
            return spla.splu(K_red)
        except RuntimeError as exc:  # singular factorization
            raise SolverFailure(f"stiffness factorization failed: {exc}") from exc

    def solve_equilibrium(self, lu):
        u = np.zeros(self.mesh.n_dof)
        u[self.free] = lu.solve(self.f_free)
        return u

    def solve_adjoint(self, lu, rhs_full):
        v = np.zeros(self.mesh.n_dof)
        v[self.free] = lu.solve(rhs_full[self.free])
        return v

    def compliance(self, u):
        return float(self.f @ u)

    # -- element-level quantities ------------------------------------------

    def centroid_stress(self, mu, kappa, u):
        """Cauchy stress (sxx, syy, sxy) at element centroids."""
        ue = u[self.mesh.elem_dofs]
        eps = ue @ self.kernels.B0.T
        s_kappa = eps @ C0_KAPPA.T
        s_mu = eps @ C0_MU.T
        return kappa[:, None] * s_kappa + mu[:, None] * s_mu

    def elem_stiffness_products(self, u1, u2):
        """(u1^T K0_mu u2, u1^T K0_kappa u2) per element."""
        a = u1[self.mesh.elem_dofs]
        b = u2[self.mesh.elem_dofs]
        k = self.kernels
        return (
            ((a @ k.K0_mu) * b).sum(axis=1),
            ((a @ k.K0_kappa) * b).sum(axis=1),
        )

    def mode_contraction(self, phi):
        """R_m[j, l] = phi_e^T T_m[l] phi_e, the dG/du contraction.

        With these, phi^T G0_m(u) phi = sum_l u_l R_m[:, l] elementwise, and
        the adjoint right-hand side is the scatter of mu_g*R_mu + kap_g*R_kap.
        Contracted as one gemm over the flattened (l, a) axes.
        """
        pe = phi[self.mesh.elem_dofs]
        k = self.kernels
        n = pe.shape[0]
        t_mu = pe @ k.T_mu.reshape(64, 8).T
        t_kappa = pe @ k.T_kappa.reshape(64, 8).T
        r_mu = (t_mu.reshape(n, 8, 8) * pe[:, None, :]).sum(axis=2)
        r_kappa = (t_kappa.reshape(n, 8, 8) * pe[:, None, :]).sum(axis=2)
        return r_mu, r_kappa

    def scatter_rows(self, per_elem):
        """Accumulate per-element 8-vectors into a global DOF vector."""
        out = np.zeros(self.mesh.n_dof)
        np.add.at(out, self.mesh.elem_dofs.ravel(), per_elem.ravel())
        out[self.fixed_dofs] = 0.0
        return out

    def strain_energy_density(self, mu, kappa, phi):
        """Per-element strain energy of a displacement field (mode coloring)."""
        pm, pk = self.elem_stiffness_products(phi, phi)
        return 0.5 * (mu * pm + kappa * pk)
