"""Adjoint design gradients for the buckling, compliance, volume and stress
constraint responses.

All gradients here are with respect to one realization's physical density
rho^m (plus the direct x_tilde route of the stress constraint); the caller
chains them through the field pipeline. Displacement dependence is resolved
by adjoints against the already-factorized stiffness: the eigenvalue chain
needs K v = q with q_l = phi^T (dG/du_l) phi, and the stress constraint
folds its p-norm and KS routes into a single right-hand side so each
realization costs two extra back-solves per iteration (objective + stress),
regardless of mode count.

Sign conventions: gamma_i < 0 (destabilizing), J_ks < 0, and the u-route of
any response F enters as -v^T (dK/drho_j) u with K v = (dF/du)^T.
"""

from dataclasses import dataclass

import numpy as np

from .fem import C0_KAPPA, C0_MU


@dataclass
class SolvedRealization:
    """Forward-solve snapshot of one realization, inputs to the gradients.

    Interpolation arrays follow the two-route convention: (mu, kappa) with
    the stiffness floor for K and the stress recovery, (mu_g, kappa_g)
    floor-free for the stress stiffness.
    """

    name: str
    rho: np.ndarray
    u: np.ndarray
    sigma: np.ndarray          # (n_elem, 3) centroid Cauchy stress
    lu: object                 # factorization of reduced K
    mu: np.ndarray
    kappa: np.ndarray
    dmu: np.ndarray
    dkappa: np.ndarray
    mu_g: np.ndarray
    kappa_g: np.ndarray
    dmu_g: np.ndarray
    dkappa_g: np.ndarray
    result: object             # BucklingResult
    j_ks: float = 0.0
    ks_weights: np.ndarray = None


def _dk_bilinear(prob, sr, a, b):
    """Per-element a^T (dK_j/drho_j) b for full-length vectors a, b."""
    pm, pk = prob.elem_stiffness_products(a, b)
    return sr.dmu * pm + sr.dkappa * pk


def _mode_terms(prob, sr, phi, gamma):
    """Explicit eigen bracket phi^T (dG/drho_j - gamma dK/drho_j) phi and the
    dG/du contraction rows R = mu_g R_mu + kappa_g R_kappa (per element)."""
    r_mu, r_kappa = prob.mode_contraction(phi)
    ue = sr.u[prob.mesh.elem_dofs]
    a_mu = np.einsum("jl,jl->j", ue, r_mu)
    a_kappa = np.einsum("jl,jl->j", ue, r_kappa)
    local = (
        sr.dmu_g * a_mu + sr.dkappa_g * a_kappa
        - gamma * _dk_bilinear(prob, sr, phi, phi)
    )
    rows = sr.mu_g[:, None] * r_mu + sr.kappa_g[:, None] * r_kappa
    return local, rows


def eigenvalue_gradient(prob, sr, i):
    """d gamma_i / d rho_j for one retained mode (K-normalized phi_i)."""
    phi = sr.result.phis[:, i]
    local, rows = _mode_terms(prob, sr, phi, sr.result.gammas[i])
    v = prob.solve_adjoint(sr.lu, prob.scatter_rows(rows))
    return local - _dk_bilinear(prob, sr, v, sr.u)


def ks_gradient(prob, sr):
    """d J_ks / d rho_j with the mode adjoints collapsed into one solve.

    The softmax weights are linear over modes, so sum_i w_i v_i^T (dK) u =
    v^T (dK) u with K v = sum_i w_i q_i.
    """
    grad = np.zeros(prob.mesh.n_elem)
    rhs_rows = np.zeros((prob.mesh.n_elem, 8))
    for i in range(sr.result.n_modes):
        phi = sr.result.phis[:, i]
        local, rows = _mode_terms(prob, sr, phi, sr.result.gammas[i])
        grad += sr.ks_weights[i] * local
        rhs_rows += sr.ks_weights[i] * rows
    v = prob.solve_adjoint(sr.lu, prob.scatter_rows(rhs_rows))
    return grad - _dk_bilinear(prob, sr, v, sr.u)


def compliance_gradient(prob, sr):
    """d (f^T u) / d rho_j, self-adjoint form: -u^T (dK_j/drho_j) u."""
    return -_dk_bilinear(prob, sr, sr.u, sr.u)


def volume_gradient(mesh, v_target, v_domain):
    """d g_V / d rho_j^d for g_V = sum v_j rho_j / (V* V_domain) - 1."""
    return mesh.volumes / (v_target * v_domain)


def stress_constraint_gradient(prob, sr, eq, w_pn, sigma_pn, c, norm0):
    """Gradient of g_s = sigma_tilde_pn / norm0 w.r.t. rho^m and x_tilde.

    eq: EquivalentStress at this realization's sigma and shared x_tilde;
    w_pn: d sigma_pn / d sigma_eq (zero on passive elements); c and the
    KS pieces inside sr are iteration-frozen constants. Returns
    (d_rho, d_x_direct). Both the p-norm and the KS coupling ride one
    adjoint: K v = dF/du with F = -c sigma_pn / J - 1.
    """
    a_pn = -c / sr.j_ks                      # > 0, J_ks < 0
    a_j = c * sigma_pn / sr.j_ks**2

    # explicit rho route of sigma: dsigma_j/drho_j = (dmu C0_mu + dkappa C0_kappa) eps_j
    ue = sr.u[prob.mesh.elem_dofs]
    eps = ue @ prob.kernels.B0.T
    s_mu = eps @ C0_MU.T
    s_kappa = eps @ C0_KAPPA.T
    dsig_drho = sr.dmu[:, None] * s_mu + sr.dkappa[:, None] * s_kappa
    d_rho = a_pn * w_pn * np.einsum("jc,jc->j", eq.d_sigma, dsig_drho)

    # explicit eigen route of J_ks (u held fixed)
    rhs_rows = np.zeros((prob.mesh.n_elem, 8))
    for i in range(sr.result.n_modes):
        phi = sr.result.phis[:, i]
        local, rows = _mode_terms(prob, sr, phi, sr.result.gammas[i])
        d_rho += a_j * sr.ks_weights[i] * local
        rhs_rows += a_j * sr.ks_weights[i] * rows

    # u route: dsigma_eq/du_e = d_sigma @ (mu C0_mu + kappa C0_kappa) B0
    d_mat = (
        sr.mu[:, None, None] * C0_MU[None]
        + sr.kappa[:, None, None] * C0_KAPPA[None]
    )
    chain = np.einsum("jc,jcr,rl->jl", eq.d_sigma, d_mat, prob.kernels.B0,
                      optimize=True)
    rhs_rows += a_pn * w_pn[:, None] * chain
    v = prob.solve_adjoint(sr.lu, prob.scatter_rows(rhs_rows))
    d_rho -= _dk_bilinear(prob, sr, v, sr.u)

    d_x = a_pn * w_pn * eq.d_x
    return d_rho / norm0, d_x / norm0
