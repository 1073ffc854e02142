"""Stiffness interpolation and density-dependent buckling strength limits.

Two interpolations between void and base material are provided: the
Hashin-Shtrikman upper bound on the (plane stress) shear/bulk moduli pair,
and the classic SIMP power law on Young's modulus. Both expose analytic
derivatives. The strength fits map the infill density x_tilde to the three
buckling stress limits (uniaxial compression/tension, biaxial compression),
with the high-density relaxation that deactivates the constraint where
plastic yielding would dominate anyway.
"""

from dataclasses import dataclass, field

import numpy as np

from .fields import heaviside_project, heaviside_derivative

# Fitted strength coefficients for the stiffness-optimal isotropic
# triangular microstructure, sigma_k = E0*(b0*x^3 + b1*x^4).
STRENGTH_B0 = {"c": 0.05882, "t": 0.3327, "b": 0.05079}
STRENGTH_B1 = {"c": 0.1092, "t": 3.301e-13, "b": 0.06596}
STRENGTH_EXPONENT = 3
RELAX_THRESHOLD = 0.8
RELAX_SHARPNESS = 50.0


@dataclass(frozen=True)
class BaseMaterial:
    E0: float = 1.0
    nu0: float = 0.3
    E_min_ratio: float = 1e-6

    def __post_init__(self):
        if not 0.0 < self.nu0 < 0.5:
            raise ValueError("nu0 must be in (0, 0.5)")
        if not 0.0 < self.E_min_ratio < 1.0:
            raise ValueError("E_min must be positive and below E0")

    @property
    def E_min(self):
        return self.E_min_ratio * self.E0

    @property
    def mu0(self):
        return self.E0 / (2.0 * (1.0 + self.nu0))

    @property
    def kappa0(self):
        return self.E0 / (2.0 * (1.0 - self.nu0))

    @property
    def mu_min(self):
        return self.E_min / (2.0 * (1.0 + self.nu0))

    @property
    def kappa_min(self):
        return self.E_min / (2.0 * (1.0 - self.nu0))


def _hs_pair(rho, m0, m_min, denom_extra):
    """One HS-bound modulus branch and its density derivative.

    m(rho) = rho*m0 + (1-rho)*m_min - rho(1-rho)(m0-m_min)^2 / q,
    q = (1-rho)*m0 + rho*m_min + denom_extra.
    """
    rho = np.asarray(rho, dtype=float)
    dm = m0 - m_min
    q = (1.0 - rho) * m0 + rho * m_min + denom_extra
    m = rho * m0 + (1.0 - rho) * m_min - rho * (1.0 - rho) * dm * dm / q
    dq = m_min - m0
    dmdr = dm - (1.0 - 2.0 * rho) * dm * dm / q + rho * (1.0 - rho) * dm * dm * dq / (q * q)
    return m, dmdr


def hs_moduli(rho, mat, floor=True):
    """Hashin-Shtrikman upper-bound (mu, kappa) with derivatives.

    floor=False drops the void stiffness entirely (mu_min = kappa_min = 0),
    the variant used for the stress stiffness interpolation only.
    Returns (mu, kappa, dmu_drho, dkappa_drho).
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < -1e-12) or np.any(rho > 1.0 + 1e-12):
        raise ValueError("density outside [0, 1]")
    mu_min = mat.mu_min if floor else 0.0
    kap_min = mat.kappa_min if floor else 0.0
    mu, dmu = _hs_pair(rho, mat.mu0, mu_min, mat.kappa0 * mat.mu0 / (mat.kappa0 + 2.0 * mat.mu0))
    kap, dkap = _hs_pair(rho, mat.kappa0, kap_min, mat.mu0)
    return mu, kap, dmu, dkap


def simp_moduli(rho, mat, p=3.0, floor=True):
    """SIMP power law expressed as the same (mu, kappa) pair.

    E(rho) = E_min + rho^p (E0 - E_min); both moduli scale with E at fixed
    nu0. Returns (mu, kappa, dmu_drho, dkappa_drho).
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < -1e-12) or np.any(rho > 1.0 + 1e-12):
        raise ValueError("density outside [0, 1]")
    E_min = mat.E_min if floor else 0.0
    rp = np.maximum(rho, 0.0) ** p
    scale = (E_min + rp * (mat.E0 - E_min)) / mat.E0
    dscale = p * np.maximum(rho, 0.0) ** (p - 1.0) * (mat.E0 - E_min) / mat.E0
    return scale * mat.mu0, scale * mat.kappa0, dscale * mat.mu0, dscale * mat.kappa0


def interpolate_moduli(rho, mat, interpolation, p=3.0, floor=True):
    if interpolation == "hs":
        return hs_moduli(rho, mat, floor=floor)
    if interpolation == "simp":
        return simp_moduli(rho, mat, p=p, floor=floor)
    raise ValueError(f"unknown interpolation '{interpolation}'")


@dataclass(frozen=True)
class StrengthFit:
    """Buckling strength limits sigma_k(x_tilde), k in {c, t, b}.

    The raw fits are relaxed at high density by psi_k * H(x; 0.8, 50) with
    psi_k = 10 * sigma_bar_k(1), which overestimates the limit where the
    microstructure would yield plastically before buckling.
    """

    E0: float = 1.0
    b0: dict = field(default_factory=lambda: dict(STRENGTH_B0))
    b1: dict = field(default_factory=lambda: dict(STRENGTH_B1))
    n0: int = STRENGTH_EXPONENT
    relax_threshold: float = RELAX_THRESHOLD
    relax_sharpness: float = RELAX_SHARPNESS

    def raw(self, x, k):
        """Unrelaxed fit and derivative for limit k."""
        x = np.asarray(x, dtype=float)
        n = self.n0
        val = self.E0 * (self.b0[k] * x ** n + self.b1[k] * x ** (n + 1))
        der = self.E0 * (n * self.b0[k] * x ** (n - 1) + (n + 1) * self.b1[k] * x ** n)
        return val, der

    def psi(self, k):
        v, _ = self.raw(1.0, k)
        return 10.0 * float(v)

    def relaxed(self, x, k):
        """Relaxed limit sigma_k = sigma_bar_k + psi_k * H(x) and derivative."""
        x = np.asarray(x, dtype=float)
        val, der = self.raw(x, k)
        h = heaviside_project(x, self.relax_threshold, self.relax_sharpness)
        dh = heaviside_derivative(x, self.relax_threshold, self.relax_sharpness)
        p = self.psi(k)
        return val + p * h, der + p * dh

    def limits(self, x, relax=True):
        """(sigma_c, sigma_t, sigma_b) and their x-derivatives as a dict."""
        out = {}
        for k in ("c", "t", "b"):
            out[k] = self.relaxed(x, k) if relax else self.raw(x, k)
        return out
