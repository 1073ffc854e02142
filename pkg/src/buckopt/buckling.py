"""Linearized buckling eigensolves and the KS eigenvalue aggregate.

The pencil is (G_sigma, K) on the free DOFs: G phi = gamma K phi with K SPD.
Destabilizing modes have gamma < 0 and buckling load factors lambda =
-1/gamma. Two solver paths: ARPACK in the K-inner product (reusing the
equilibrium factorization for the inner solves) for ordinary meshes, and
LOBPCG with an algebraic-multigrid preconditioner for the fine validation
meshes where a direct factorization would not fit in memory.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import linalg as spla

from .fem import SolverFailure

LOBPCG_DOF_THRESHOLD = 400_000
# Relative magnitude below which G is treated as unloaded.
DEGENERATE_G_RATIO = 1e-14
# Eigenvalues above -GAMMA_NOISE_RATIO * |G|/|K| are solver noise, not
# destabilizing modes (pure tension produces tiny negative residues).
GAMMA_NOISE_RATIO = 1e-4


@dataclass
class BucklingResult:
    gammas: np.ndarray           # ascending (most negative first), all < 0
    phis: np.ndarray             # (n_dof_full, k), K-normalized
    degenerate: bool = False     # True: no destabilizing modes found
    residuals: np.ndarray = field(default=None)

    @property
    def lambdas(self):
        return -1.0 / self.gammas

    @property
    def n_modes(self):
        return 0 if self.degenerate else self.gammas.size


def _k_normalize(K_red, vecs):
    norms = np.sqrt(np.einsum("ij,ij->j", vecs, K_red @ vecs))
    return vecs / norms[None, :]


def _pack_result(gammas, vecs_red, free, n_dof, K_red, gamma_floor=0.0):
    keep = gammas < -gamma_floor
    if not np.any(keep):
        return BucklingResult(
            gammas=np.empty(0), phis=np.empty((n_dof, 0)), degenerate=True
        )
    gammas = gammas[keep]
    vecs = vecs_red[:, keep]
    order = np.argsort(gammas)
    gammas = gammas[order]
    vecs = _k_normalize(K_red, vecs[:, order])
    phis = np.zeros((n_dof, gammas.size))
    phis[free] = vecs
    return BucklingResult(gammas=gammas, phis=phis)


def solve_buckling(K_red, G_red, n_eig, free, n_dof, lu=None, v0=None, seed=0):
    """n_eig most destabilizing eigenpairs of (G, K) via ARPACK.

    lu: optional prefactorized K (scipy splu object), reused for the inner
    solves. v0: optional warm-start vector (full length or reduced).
    """
    n = K_red.shape[0]
    g_scale = abs(G_red).max() if G_red.nnz else 0.0
    k_scale = abs(K_red).max()
    if g_scale <= DEGENERATE_G_RATIO * k_scale:
        return BucklingResult(
            gammas=np.empty(0), phis=np.empty((n_dof, 0)), degenerate=True
        )
    gamma_floor = GAMMA_NOISE_RATIO * g_scale / k_scale

    k_req = min(n_eig + 2, n - 1)
    if v0 is not None and v0.size == n_dof:
        v0 = v0[free]
    if v0 is None or not np.isfinite(v0).all() or np.linalg.norm(v0) == 0.0:
        v0 = np.random.default_rng(seed).standard_normal(n)

    minv = None
    if lu is not None:
        minv = spla.LinearOperator((n, n), matvec=lu.solve)
    try:
        gammas, vecs = spla.eigsh(
            G_red,
            k=k_req,
            M=K_red,
            Minv=minv,
            which="SA",
            v0=v0,
            ncv=min(n, max(3 * k_req, 40)),
            maxiter=3000,
            tol=1e-8,
        )
    except spla.ArpackNoConvergence as exc:
        raise SolverFailure(
            f"buckling eigensolve did not converge ({exc.eigenvalues.size} of "
            f"{k_req} eigenvalues after maxiter)"
        ) from exc

    res = _pack_result(gammas, vecs, free, n_dof, K_red, gamma_floor)
    if not res.degenerate and res.gammas.size > n_eig:
        res = BucklingResult(gammas=res.gammas[:n_eig], phis=res.phis[:, :n_eig])
    return res


def solve_buckling_lobpcg(K_red, G_red, n_eig, free, n_dof, seed=0,
                          tol=1e-5, maxiter=400, coords_free=None):
    """Matrix-factorization-free path for large meshes.

    Solves -G x = nu K x for the largest nu (= -gamma) with LOBPCG,
    preconditioned by a smoothed-aggregation AMG V-cycle on K. coords_free:
    (n_free, 2) node coordinates per free DOF's node, used to seed the AMG
    near-nullspace with the rigid-body modes.
    """
    import pyamg

    n = K_red.shape[0]
    g_scale = abs(G_red).max() if G_red.nnz else 0.0
    k_scale = abs(K_red).max()
    if g_scale <= DEGENERATE_G_RATIO * k_scale:
        return BucklingResult(
            gammas=np.empty(0), phis=np.empty((n_dof, 0)), degenerate=True
        )
    gamma_floor = GAMMA_NOISE_RATIO * g_scale / k_scale

    B = None
    if coords_free is not None:
        B = np.zeros((n, 3))
        is_u = np.arange(n_dof)[free] % 2 == 0
        B[is_u, 0] = 1.0
        B[~is_u, 1] = 1.0
        B[is_u, 2] = -coords_free[is_u, 1]
        B[~is_u, 2] = coords_free[~is_u, 0]
    ml = pyamg.smoothed_aggregation_solver(K_red.tocsr(), B=B, max_coarse=400)
    prec = ml.aspreconditioner(cycle="V")

    rng = np.random.default_rng(seed)
    block = min(n_eig + 4, n - 1)
    X = rng.standard_normal((n, block))
    try:
        nus, vecs = spla.lobpcg(
            -G_red.tocsr(),
            X,
            B=K_red.tocsr(),
            M=prec,
            largest=True,
            tol=tol,
            maxiter=maxiter,
        )
    except Exception as exc:
        raise SolverFailure(f"LOBPCG buckling solve failed: {exc}") from exc

    res = _pack_result(-nus, vecs, free, n_dof, K_red, gamma_floor)
    if not res.degenerate and res.gammas.size > n_eig:
        res = BucklingResult(gammas=res.gammas[:n_eig], phis=res.phis[:, :n_eig])
    return res


def ks_aggregate(gammas, gamma0, P):
    """Frozen-reference KS aggregate of the destabilizing eigenvalues.

    J = gamma0 * (1 + logsumexp(P*(gamma_i/gamma0 - 1))/P). Returns (J,
    weights) with weights = dJ/dgamma_i, a softmax summing to 1. Upper
    bound in magnitude: |J| >= |gamma_1| for any gamma0 < 0.
    """
    gammas = np.asarray(gammas, dtype=float)
    if gamma0 == 0.0:
        raise ValueError("KS reference gamma0 must be nonzero")
    if gammas.size == 0:
        raise ValueError("KS aggregate needs at least one eigenvalue")
    if np.sign(gamma0) != np.sign(gammas[0]):
        raise ValueError("KS reference and critical eigenvalue sign mismatch")
    a = P * (gammas / gamma0 - 1.0)
    amax = a.max()
    e = np.exp(a - amax)
    se = e.sum()
    J = gamma0 * (1.0 + (amax + np.log(se)) / P)
    return float(J), e / se
