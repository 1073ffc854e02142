"""Standalone oracle for the frozen constants used in the test suite.

Every expected value asserted numerically by the tests is computed here from
the defining formulas, independently of the package implementation (no
buckopt imports). Run `python tools/reference_values.py` and paste the
printed values; tests must never be updated from package output.
"""

import numpy as np

E0 = 1.0
NU0 = 0.3


def hs_modulus(rho, m0, m_min, extra):
    q = (1 - rho) * m0 + rho * m_min + extra
    return rho * m0 + (1 - rho) * m_min - rho * (1 - rho) * (m0 - m_min) ** 2 / q


def section_moduli():
    mu0 = E0 / (2 * (1 + NU0))
    k0 = E0 / (2 * (1 - NU0))
    e_min = 1e-6 * E0
    mu_min = e_min / (2 * (1 + NU0))
    k_min = e_min / (2 * (1 - NU0))
    mu = hs_modulus(0.5, mu0, mu_min, k0 * mu0 / (k0 + 2 * mu0))
    k = hs_modulus(0.5, k0, k_min, mu0)
    print(f"mu0 = {mu0:.10f}, kappa0 = {k0:.10f}")
    print(f"HS mu(0.5)    = {mu:.10f}")
    print(f"HS kappa(0.5) = {k:.10f}")
    print(f"SIMP E(0.5)   = {e_min + 0.125 * (E0 - e_min):.10f}")


STRENGTH = {
    "c": (0.05882, 0.1092),
    "t": (0.3327, 3.301e-13),
    "b": (0.05079, 0.06596),
}


def strength(x, k):
    b0, b1 = STRENGTH[k]
    return E0 * (b0 * x**3 + b1 * x**4)


def section_strength():
    print(f"sigma_bar_c(0.5) = {strength(0.5, 'c'):.10e}")
    print(f"sigma_bar_c(1.0) = {strength(1.0, 'c'):.10e}")
    print(f"psi_c            = {10 * strength(1.0, 'c'):.10e}")
    print(f"sigma_bar_t(1.0) = {strength(1.0, 't'):.10e}")
    print(f"sigma_bar_b(1.0) = {strength(1.0, 'b'):.10e}")


def ww_sigma_eq(sig, sc, st, sb):
    sxx, syy, sxy = sig
    i1 = sxx + syy
    dx, dy, dz = sxx - i1 / 3, syy - i1 / 3, -i1 / 3
    j2 = 0.5 * (dx * dx + dy * dy + dz * dz) + sxy * sxy
    j3 = dz * (dx * dy - sxy * sxy)
    arg = np.clip(-(3 * np.sqrt(3) / 2) * j3 / j2**1.5, -1, 1)
    that = np.arcsin(arg) / 3 + np.pi / 6
    rc = np.sqrt(1.2) * sb * st / (3 * sb * st + sc * (sb - st))
    rt = np.sqrt(1.2) * sb * st / (sc * (2 * sb + st))
    a = 4 / sc * np.sqrt(2 / 15) * (rc**2 - rt**2)
    b = 1 / sc * np.sqrt(2 / 15) * (rc - 2 * rt) ** 2
    c = 2 * rc * (rc**2 - rt**2)
    d = 4 * rc**2 * (rc - 2 * rt) ** 2 * (rc**2 - rt**2)
    e = rc**2 * (rc - 2 * rt) ** 2 * (5 * rt**2 - 4 * rt * rc)
    ct = np.cos(that)
    alpha = (a * ct**2 + b) / (c * ct + np.sqrt(d * ct**2 + e))
    beta = (sb - st) / (3 * sb * st)
    return alpha * np.sqrt(3 * j2) + beta * i1


def section_ww():
    worst = 0.0
    for x in np.linspace(0.1, 0.9, 9):
        sc, st, sb = strength(x, "c"), strength(x, "t"), strength(x, "b")
        for sig in ((-sc, 0, 0), (st, 0, 0), (-sb, -sb, 0)):
            worst = max(worst, abs(ww_sigma_eq(sig, sc, st, sb) - 1))
    print(f"WW calibration worst |sigma_eq - 1| over 27 states = {worst:.3e}")
    x = 0.5
    sc, st, sb = strength(x, "c"), strength(x, "t"), strength(x, "b")
    sig = (-0.01, 0.002, 0.004)
    print(f"WW sigma_eq(x=0.5, sigma=(-0.01, 0.002, 0.004)) = "
          f"{ww_sigma_eq(sig, sc, st, sb):.12f}")


def section_lode():
    for name, sig in (("tension", (1.0, 0.0, 0.0)),
                      ("compression", (-1.0, 0.0, 0.0)),
                      ("shear", (0.0, 0.0, 1.0))):
        sxx, syy, sxy = sig
        i1 = sxx + syy
        dx, dy, dz = sxx - i1 / 3, syy - i1 / 3, -i1 / 3
        j2 = 0.5 * (dx * dx + dy * dy + dz * dz) + sxy * sxy
        j3 = dz * (dx * dy - sxy * sxy)
        th = np.arcsin(np.clip(-(3 * np.sqrt(3) / 2) * j3 / j2**1.5, -1, 1)) / 3
        print(f"lode {name}: I1={i1:+.6f} J2={j2:.6f} J3={j3:+.6f} "
              f"theta={th:+.8f} theta_hat={th + np.pi / 6:.8f}")


def section_aggregates():
    g0 = -0.4
    gam = np.full(5, g0)
    j = g0 * (1 + np.log(np.sum(np.exp(160 * (gam / g0 - 1)))) / 160)
    print(f"KS 5 identical gammas at gamma0: J = gamma0*(1 + ln5/160) = {j:.12f}")
    t = 0.37
    print(f"p-norm two equal entries t={t}, p=8: 2^(1/8)*t = {2**0.125 * t:.12f}")


def section_euler():
    # fixed-free strip: in-plane width b, thickness 1, length L, load f
    b, L, f = 1.0, 10.0, 1e-3
    inertia = b**3 / 12.0
    pcr = np.pi**2 * E0 * inertia / (4 * L**2)
    print(f"Euler column P_cr = {pcr:.10e}, lambda_1 = P_cr/f = {pcr / f:.6f}")


def section_dehom():
    for rho in (0.75, 1.0):
        w = 2.0 / 3.0 * (1 - np.sqrt(1 - rho))
        print(f"width w({rho}) = {w:.10f}")
    for rho in (0.3, 0.5, 0.75):
        w = 2.0 / 3.0 * (1 - np.sqrt(1 - rho))
        areal = 1 - (1 - 1.5 * w) ** 2
        print(f"areal fraction at rho={rho}: 1-(1-1.5w)^2 = {areal:.10f}")
    w, r_shell = 2.0 / 3.0, 4 * 0.01
    print(f"shell width eps=0.04 example: d_eta = "
          f"{0.5 - 0.5 * np.exp(-2 * np.sqrt(3) * w * 0.04 / r_shell):.10f}")


def section_projection():
    eta, beta = 0.5, 256.0
    t0 = np.tanh(beta * eta)
    v = (t0 + np.tanh(beta * (0.6 - eta))) / (t0 + np.tanh(beta * (1 - eta)))
    print(f"heaviside(0.6; 0.5, 256) = 1 - {1 - v:.3e}")
    # filter weights on a 3x1 strip, R = 1.5 dx: center row of Eq weights
    print("cone filter 3-strip center weight = 1.5/2.5, neighbor = 0.5/2.5")


if __name__ == "__main__":
    for fn in (section_moduli, section_strength, section_ww, section_lode,
               section_aggregates, section_euler, section_dehom,
               section_projection):
        print(f"--- {fn.__name__} ---")
        fn()
