import numpy as np
import pytest
from hypothesis import given, strategies as st

from buckopt.material import (
    BaseMaterial,
    StrengthFit,
    hs_moduli,
    interpolate_moduli,
    simp_moduli,
)

MAT = BaseMaterial()

# frozen solid moduli for E0=1, nu=0.3 (plane stress)
MU0 = 0.3846153846
KAPPA0 = 0.7142857143


def test_base_moduli():
    assert MAT.mu0 == pytest.approx(MU0, abs=1e-10)
    assert MAT.kappa0 == pytest.approx(KAPPA0, abs=1e-10)


def test_hs_moduli_midpoint():
    mu, kappa, _, _ = hs_moduli(np.array([0.5]), MAT, floor=True)
    assert mu[0] == pytest.approx(0.0943400608, abs=1e-9)
    assert kappa[0] == pytest.approx(0.1851859690, abs=1e-9)


def test_simp_midpoint_effective_modulus():
    mu, kappa, _, _ = simp_moduli(np.array([0.5]), MAT, p=3.0, floor=True)
    # recover E from (mu, kappa) at fixed nu
    E = mu * 2.0 * (1.0 + MAT.nu0)
    assert E[0] == pytest.approx(0.1250008750, abs=1e-10)
    E_k = kappa * 2.0 * (1.0 - MAT.nu0)
    assert E_k[0] == pytest.approx(E[0])


def test_interpolation_endpoints():
    rho = np.array([0.0, 1.0])
    for name in ("hs", "simp"):
        mu, kappa, _, _ = interpolate_moduli(rho, MAT, name, floor=False)
        assert mu[0] == pytest.approx(0.0, abs=1e-12)
        assert kappa[0] == pytest.approx(0.0, abs=1e-12)
        assert mu[1] == pytest.approx(MAT.mu0)
        assert kappa[1] == pytest.approx(MAT.kappa0)


def test_floor_keeps_void_invertible():
    mu, kappa, _, _ = interpolate_moduli(np.zeros(1), MAT, "hs", floor=True)
    assert mu[0] > 0.0
    assert kappa[0] > 0.0
    assert mu[0] == pytest.approx(1e-6 * MAT.mu0, rel=1e-6)


def test_hs_bounds_simp_interior():
    rho = np.linspace(0.05, 0.95, 37)
    mu_h, ka_h, _, _ = interpolate_moduli(rho, MAT, "hs", floor=False)
    mu_s, ka_s, _, _ = interpolate_moduli(rho, MAT, "simp", floor=False)
    assert np.all(mu_h > mu_s)
    assert np.all(ka_h > ka_s)


@given(st.floats(0.01, 0.99), st.sampled_from(["hs", "simp"]))
def test_moduli_derivatives_match_fd(rho, name):
    h = 1e-7
    r = np.array([rho])
    _, _, dmu, dkappa = interpolate_moduli(r, MAT, name, floor=True)
    mu_p, ka_p, _, _ = interpolate_moduli(r + h, MAT, name, floor=True)
    mu_m, ka_m, _, _ = interpolate_moduli(r - h, MAT, name, floor=True)
    assert dmu[0] == pytest.approx((mu_p[0] - mu_m[0]) / (2 * h), rel=1e-4)
    assert dkappa[0] == pytest.approx((ka_p[0] - ka_m[0]) / (2 * h), rel=1e-4)


@given(st.floats(0.0, 0.98), st.sampled_from(["hs", "simp"]))
def test_moduli_monotone_in_density(rho, name):
    r = np.array([rho, rho + 0.02])
    mu, kappa, _, _ = interpolate_moduli(r, MAT, name, floor=True)
    assert mu[1] > mu[0]
    assert kappa[1] > kappa[0]


# -- stress limit fits ------------------------------------------------------

FIT = StrengthFit()


def test_strength_limits_solid():
    raw, _ = FIT.raw(np.array([1.0]), "c")
    assert raw[0] == pytest.approx(0.16802, abs=1e-10)
    raw_t, _ = FIT.raw(np.array([1.0]), "t")
    assert raw_t[0] == pytest.approx(0.3327, abs=1e-10)
    raw_b, _ = FIT.raw(np.array([1.0]), "b")
    assert raw_b[0] == pytest.approx(0.11675, abs=1e-10)


def test_strength_midpoint_and_scaling():
    raw, _ = FIT.raw(np.array([0.5]), "c")
    assert raw[0] == pytest.approx(1.41775e-2, abs=1e-12)
    # deactivation amplitude is ten times the solid limit
    assert FIT.psi("c") == pytest.approx(1.6802, abs=1e-10)


def test_strength_raw_derivative_fd():
    x = np.array([0.37])
    h = 1e-7
    for k in ("c", "t", "b"):
        _, der = FIT.raw(x, k)
        vp, _ = FIT.raw(x + h, k)
        vm, _ = FIT.raw(x - h, k)
        assert der[0] == pytest.approx((vp[0] - vm[0]) / (2 * h), rel=1e-5)


def test_relaxation_inflates_near_solid():
    x_low = np.array([0.5])
    x_high = np.array([0.97])
    for k in ("c", "t", "b"):
        raw_l, _ = FIT.raw(x_low, k)
        rel_l, _ = FIT.relaxed(x_low, k)
        assert rel_l[0] == pytest.approx(raw_l[0], rel=1e-6)
        raw_h, _ = FIT.raw(x_high, k)
        rel_h, _ = FIT.relaxed(x_high, k)
        assert rel_h[0] > 10.0 * raw_h[0]


def test_limits_dict_keys():
    out = FIT.limits(np.array([0.5]), relax=False)
    assert set(out) == {"c", "t", "b"}
    val, der = out["c"]
    assert val.shape == (1,) and der.shape == (1,)
