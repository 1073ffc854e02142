"""Willam-Warnke equivalent stress and the buckling stress constraint.

The three density-dependent strength limits (uniaxial compression/tension,
equibiaxial compression) calibrate a smooth three-parameter failure surface
expressed through the stress invariants and the modified Lode angle. The
surface is written so that sigma_eq = 1 exactly at the three calibration
states for any density, which the tests pin down. Per-element equivalent
stresses are aggregated into a p-norm with an adaptive correction factor
that tracks the true maximum, and the constraint compares the aggregate
against the critical load via the KS eigenvalue bound.

Derivative outputs are split by route: d_sigma composes with dsigma/du and
dsigma/drho downstream (adjoint assembly), d_x is the direct surface-motion
term through the strength fits.
"""

from dataclasses import dataclass

import numpy as np

# asin argument kept this far inside [-1, 1]; the meridians are
# near-stationary in theta_hat so the value error stays ~1e-13.
LODE_CLAMP = 1e-12
# J2 floor is this ratio times E0^2 (hydrostatic regularization).
J2_FLOOR_RATIO = 1e-30
# The surface coefficients are 0/0 at zero density.
X_SURFACE_FLOOR = 1e-4

PNORM_EXPONENT = 8.0
C_BLEND = 0.1
_SQ2_15 = np.sqrt(2.0 / 15.0)
_SQ6_5 = np.sqrt(6.0 / 5.0)


def invariants(sigma):
    """I1, J2, J3 and the 3D deviator of plane stress states.

    sigma: (..., 3) Cauchy triples (sxx, syy, sxy). The out-of-plane stress
    is zero but the deviator keeps its -I1/3 component, which feeds J3.
    Returns (I1, J2, J3, dev) with dev (..., 4) = (dxx, dyy, dzz, sxy).
    """
    sigma = np.asarray(sigma, dtype=float)
    sxx, syy, sxy = sigma[..., 0], sigma[..., 1], sigma[..., 2]
    i1 = sxx + syy
    dxx = sxx - i1 / 3.0
    dyy = syy - i1 / 3.0
    dzz = -i1 / 3.0
    j2 = 0.5 * (dxx * dxx + dyy * dyy + dzz * dzz) + sxy * sxy
    j3 = dzz * (dxx * dyy - sxy * sxy)
    return i1, j2, j3, np.stack([dxx, dyy, dzz, sxy], axis=-1)


def lode_angles(j2, j3, eps_j2):
    """Lode angle theta and modified angle theta_hat with derivatives.

    theta = asin(-(3*sqrt(3)/2) J3 / J2^(3/2)) / 3 lies on the principal
    branch, where the asin(sin(3 theta)) wrap is the identity, so
    theta_hat = theta + pi/6. Near-hydrostatic states (J2 <= eps_j2) get
    theta_hat = pi/6 with zero derivative; the clamped asin argument also
    zeroes the derivative where the clip is active.
    Returns (theta, theta_hat, dth_dj2, dth_dj3).
    """
    j2 = np.asarray(j2, dtype=float)
    j3 = np.asarray(j3, dtype=float)
    j2r = np.maximum(j2, eps_j2)
    hydro = j2 <= eps_j2

    raw = -(3.0 * np.sqrt(3.0) / 2.0) * j3 / j2r**1.5
    arg = np.clip(raw, -1.0 + LODE_CLAMP, 1.0 - LODE_CLAMP)
    theta = np.arcsin(arg) / 3.0
    theta = np.where(hydro, 0.0, theta)
    theta_hat = theta + np.pi / 6.0

    live = (np.abs(raw) < 1.0 - LODE_CLAMP) & ~hydro
    dth_darg = np.where(live, 1.0 / (3.0 * np.sqrt(1.0 - arg * arg)), 0.0)
    dth_dj2 = dth_darg * (9.0 * np.sqrt(3.0) / 4.0) * j3 / j2r**2.5
    dth_dj3 = dth_darg * (-(3.0 * np.sqrt(3.0) / 2.0)) / j2r**1.5
    return theta, theta_hat, dth_dj2, dth_dj3


@dataclass
class WWSurface:
    """Per-element surface coefficients and their x_tilde derivatives.

    All arrays share the element axis. beta is the pressure coefficient
    (the projection sharpness beta lives elsewhere).
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    E: np.ndarray
    beta: np.ndarray
    dA: np.ndarray
    dB: np.ndarray
    dC: np.ndarray
    dD: np.ndarray
    dE: np.ndarray
    dbeta: np.ndarray


def _quot(n, dn, d, dd):
    return (dn * d - n * dd) / (d * d)


def surface_coefficients(x_tilde, fit, relax=True):
    """Willam-Warnke coefficients A..E and beta from the strength limits.

    The meridian radii r_c, r_t and all coefficients are rational in the
    three limits, so the x_tilde derivatives follow from quotient rules on
    top of the fit derivatives.
    """
    x = np.maximum(np.asarray(x_tilde, dtype=float), X_SURFACE_FLOOR)
    guard = np.asarray(x_tilde, dtype=float) > X_SURFACE_FLOOR
    lims = fit.limits(x, relax=relax)
    sc, dsc = lims["c"]
    st, dst = lims["t"]
    sb, dsb = lims["b"]
    dsc = dsc * guard
    dst = dst * guard
    dsb = dsb * guard

    bt = sb * st
    dbt = dsb * st + sb * dst
    qc = 3.0 * bt + sc * (sb - st)
    dqc = 3.0 * dbt + dsc * (sb - st) + sc * (dsb - dst)
    rc = _SQ6_5 * bt / qc
    drc = _SQ6_5 * _quot(bt, dbt, qc, dqc)
    qt = sc * (2.0 * sb + st)
    dqt = dsc * (2.0 * sb + st) + sc * (2.0 * dsb + dst)
    rt = _SQ6_5 * bt / qt
    drt = _SQ6_5 * _quot(bt, dbt, qt, dqt)

    rc2, rt2 = rc * rc, rt * rt
    drc2, drt2 = 2.0 * rc * drc, 2.0 * rt * drt
    diff = rc2 - rt2
    ddiff = drc2 - drt2
    w = rc - 2.0 * rt
    dw = drc - 2.0 * drt
    w2 = w * w
    dw2 = 2.0 * w * dw

    a = 4.0 / sc * _SQ2_15 * diff
    da = _SQ2_15 * 4.0 * _quot(diff, ddiff, sc, dsc)
    b = _SQ2_15 * w2 / sc
    db = _SQ2_15 * _quot(w2, dw2, sc, dsc)
    c = 2.0 * rc * diff
    dc = 2.0 * (drc * diff + rc * ddiff)
    d = 4.0 * rc2 * w2 * diff
    dd = 4.0 * (drc2 * w2 * diff + rc2 * dw2 * diff + rc2 * w2 * ddiff)
    tail = 5.0 * rt2 - 4.0 * rt * rc
    dtail = 5.0 * drt2 - 4.0 * (drt * rc + rt * drc)
    e = rc2 * w2 * tail
    de = drc2 * w2 * tail + rc2 * dw2 * tail + rc2 * w2 * dtail

    beta = (sb - st) / (3.0 * bt)
    dbeta = _quot(sb - st, dsb - dst, 3.0 * bt, 3.0 * dbt)
    return WWSurface(A=a, B=b, C=c, D=d, E=e, beta=beta,
                     dA=da, dB=db, dC=dc, dD=dd, dE=de, dbeta=dbeta)


@dataclass
class EquivalentStress:
    value: np.ndarray    # (n,)
    d_sigma: np.ndarray  # (n, 3) partials w.r.t. (sxx, syy, sxy)
    d_x: np.ndarray      # (n,) direct surface-motion term


def equivalent_stress(sigma, x_tilde, fit, relax=True):
    """Dimensionless equivalent stress; the failure surface is value = 1.

    sigma: (n, 3) centroid Cauchy triples. Gradients cover both routes out
    of the invariants (through sigma) and the direct strength-fit route
    (through x_tilde); the caller owns the sigma(u, rho) chain.
    """
    surf = surface_coefficients(x_tilde, fit, relax=relax)
    i1, j2, j3, dev = invariants(sigma)
    eps_j2 = J2_FLOOR_RATIO * fit.E0**2
    j2r = np.maximum(j2, eps_j2)
    live = j2 > eps_j2
    _, theta_hat, dth_dj2, dth_dj3 = lode_angles(j2, j3, eps_j2)

    ct = np.cos(theta_hat)
    num = surf.A * ct * ct + surf.B
    rad = surf.D * ct * ct + surf.E
    root = np.sqrt(rad)
    den = surf.C * ct + root
    alpha = num / den
    dalpha_dct = _quot(num, 2.0 * surf.A * ct, den, surf.C + surf.D * ct / root)
    dalpha_dth = -np.sin(theta_hat) * dalpha_dct
    dalpha_dx = _quot(num, surf.dA * ct * ct + surf.dB, den,
                      surf.dC * ct + (surf.dD * ct * ct + surf.dE) / (2.0 * root))

    sq3j2 = np.sqrt(3.0 * j2r)
    value = alpha * sq3j2 + surf.beta * i1

    # invariant gradients; the J2 floor freezes its own derivative
    dxx, dyy, dzz, dxy = dev[..., 0], dev[..., 1], dev[..., 2], dev[..., 3]
    dj2 = np.stack([dxx, dyy, 2.0 * dxy], axis=-1) * live[..., None]
    s2xx = dxx * dxx + dxy * dxy
    s2yy = dyy * dyy + dxy * dxy
    dj3 = np.stack([
        s2xx - (2.0 / 3.0) * j2r,
        s2yy - (2.0 / 3.0) * j2r,
        2.0 * dxy * (dxx + dyy),
    ], axis=-1)
    di1 = np.array([1.0, 1.0, 0.0])

    dth = dth_dj2[..., None] * dj2 + dth_dj3[..., None] * dj3
    dsq3j2 = (0.5 * np.sqrt(3.0) / np.sqrt(j2r))[..., None] * dj2
    d_sigma = (
        (dalpha_dth * sq3j2)[..., None] * dth
        + alpha[..., None] * dsq3j2
        + surf.beta[..., None] * di1
    )
    d_x = dalpha_dx * sq3j2 + surf.dbeta * i1
    return EquivalentStress(value=value, d_sigma=d_sigma, d_x=d_x)


def pnorm_aggregate(sigma_eq, p=PNORM_EXPONENT):
    """Rectified p-norm over-approximation of max sigma_eq.

    Negative equivalent stresses are deep inside the safe domain and are
    rectified to zero so they never load the aggregate. Returns
    (sigma_pn, weights) with weights = d sigma_pn / d sigma_eq per element.
    """
    s = np.maximum(np.asarray(sigma_eq, dtype=float), 0.0)
    total = np.sum(s**p)
    if total == 0.0:
        return 0.0, np.zeros_like(s)
    sigma_pn = total ** (1.0 / p)
    return float(sigma_pn), (s / sigma_pn) ** (p - 1.0)


def update_correction(c_prev, sigma_eq, sigma_pn, blend=C_BLEND):
    """Blend the correction factor toward max(sigma_eq)/sigma_pn.

    Safe fields (non-positive maximum or empty aggregate) keep the previous
    factor rather than dragging c toward zero.
    """
    top = float(np.max(sigma_eq)) if np.size(sigma_eq) else 0.0
    if sigma_pn <= 0.0 or top <= 0.0:
        return c_prev
    return blend * top / sigma_pn + (1.0 - blend) * c_prev


def constraint_value(sigma_pn, c, j_ks):
    """sigma_tilde_pn = -c sigma_pn / J_ks - 1, the stress-at-critical-load
    constraint (<= 0 is feasible). J_ks must be negative: the aggregate of
    destabilizing eigenvalues."""
    if not j_ks < 0.0:
        raise ValueError(f"KS aggregate must be negative, got {j_ks}")
    return -c * sigma_pn / j_ks - 1.0
