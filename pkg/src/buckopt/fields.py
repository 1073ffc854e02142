"""Density filtering, Heaviside projection and the three-field composition.

The raw design holds two element fields: the infill density x (bounded below
by x_min) and the void indicator s. Both are cone-filtered; s is projected at
three thresholds eta_b and eta_b +/- delta_eta to produce the eroded,
blueprint and dilated indicator fields, and the physical densities are the
products rho^m = x_tilde * sbar^m. Passive regions are pinned at the raw
level (filter sources) and hard-overwritten after composition.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

REALIZATIONS = ("e", "b", "d")
BETA_INITIAL = 2.0
BETA_MAX = 256.0
BETA_FIRST_DOUBLING = 125
BETA_DOUBLING_PERIOD = 75


def continuation_beta(iteration):
    """Projection sharpness schedule: 2 until iteration 125, then doubling
    every 75 iterations, capped at 256."""
    if iteration < BETA_FIRST_DOUBLING:
        return BETA_INITIAL
    k = (iteration - BETA_FIRST_DOUBLING) // BETA_DOUBLING_PERIOD
    return min(BETA_INITIAL * 2.0 ** (k + 1), BETA_MAX)


def heaviside_project(y, eta, beta):
    """Smoothed Heaviside projection, exact 0/1 endpoints at any beta."""
    y = np.asarray(y, dtype=float)
    t0 = np.tanh(beta * eta)
    return (t0 + np.tanh(beta * (y - eta))) / (t0 + np.tanh(beta * (1.0 - eta)))


def heaviside_derivative(y, eta, beta):
    y = np.asarray(y, dtype=float)
    t0 = np.tanh(beta * eta)
    th = np.tanh(beta * (y - eta))
    return beta * (1.0 - th * th) / (t0 + np.tanh(beta * (1.0 - eta)))


class ConeFilter:
    """Cone-weighted density filter on a structured grid.

    Weights w = max(0, R - dist) truncated at the boundary and renormalized
    per row, implemented as a kernel convolution divided by the convolved
    indicator. Self-adjoint up to the row normalization; adjoint() applies
    the exact transpose of the normalized operator.
    """

    def __init__(self, nx, ny, dx, radius):
        if radius <= 0:
            raise ValueError("filter radius must be positive")
        self.nx, self.ny = nx, ny
        reach = max(int(np.ceil(radius / dx)) - 1, 0)
        di = np.arange(-reach, reach + 1)
        dj = np.arange(-reach, reach + 1)
        jj, ii = np.meshgrid(dj, di)
        kernel = np.maximum(0.0, radius - dx * np.hypot(ii, jj))
        self.kernel = kernel
        self.norm = ndimage.convolve(
            np.ones((ny, nx)), self.kernel, mode="constant", cval=0.0
        )

    def apply(self, y):
        g = np.asarray(y, dtype=float).reshape(self.ny, self.nx)
        out = ndimage.convolve(g, self.kernel, mode="constant", cval=0.0) / self.norm
        return out.ravel()

    def adjoint(self, g):
        r = np.asarray(g, dtype=float).reshape(self.ny, self.nx) / self.norm
        out = ndimage.convolve(r, self.kernel, mode="constant", cval=0.0)
        return out.ravel()


@dataclass
class FieldState:
    """Forward pass snapshot: everything backprop needs at fixed beta."""

    beta: float
    x_tilde: np.ndarray
    s_tilde: np.ndarray
    sbar: dict    # m -> projected indicator
    rho: dict     # m -> physical density, passives overwritten


class DesignFields:
    """Filter + projection pipeline for one mesh."""

    def __init__(self, mesh, delta_eta, x_min=0.0, eta_b=0.5,
                 radius_x=1.5, radius_s=4.5):
        if not 0.0 <= delta_eta < 0.5:
            raise ValueError("delta_eta must be in [0, 0.5)")
        self.mesh = mesh
        self.x_min = x_min
        self.eta = {"e": eta_b + delta_eta, "b": eta_b, "d": eta_b - delta_eta}
        self.filter_x = ConeFilter(mesh.nx, mesh.ny, mesh.dx, radius_x * mesh.dx)
        self.filter_s = ConeFilter(mesh.nx, mesh.ny, mesh.dx, radius_s * mesh.dx)

    def initial_fields(self, x0):
        """Uniform start: x = x0 on active elements, s = 1 (no voids seeded)."""
        x = np.full(self.mesh.n_elem, x0)
        s = np.ones(self.mesh.n_elem)
        return self.pin(x, s)

    def pin(self, x, s):
        """Clamp passive raw values (filter sources)."""
        x = np.array(x, dtype=float)
        s = np.array(s, dtype=float)
        x[self.mesh.passive_solid] = 1.0
        s[self.mesh.passive_solid] = 1.0
        x[self.mesh.passive_void] = max(self.x_min, 0.0)
        s[self.mesh.passive_void] = 0.0
        return x, s

    def compose(self, x, s, beta):
        x, s = self.pin(x, s)
        x_tilde = self.filter_x.apply(x)
        s_tilde = self.filter_s.apply(s)
        sbar = {m: heaviside_project(s_tilde, self.eta[m], beta) for m in REALIZATIONS}
        rho = {}
        for m in REALIZATIONS:
            r = x_tilde * sbar[m]
            r[self.mesh.passive_solid] = 1.0
            r[self.mesh.passive_void] = 0.0
            rho[m] = r
        return FieldState(beta=beta, x_tilde=x_tilde, s_tilde=s_tilde, sbar=sbar, rho=rho)

    def backprop(self, state, drho, dx_tilde_direct=None):
        """Chain per-realization d(g)/d(rho^m) (+ direct x_tilde terms) back
        to the raw fields. Passive elements are overwritten in compose, so
        their rho-partials are dropped; pinned raw entries get zero gradient.
        """
        mesh = self.mesh
        passive = mesh.passive_solid | mesh.passive_void
        gx_tilde = np.zeros(mesh.n_elem)
        gs_tilde = np.zeros(mesh.n_elem)
        for m, g in drho.items():
            g = np.where(passive, 0.0, g)
            gx_tilde += g * state.sbar[m]
            gs_tilde += g * state.x_tilde * heaviside_derivative(
                state.s_tilde, self.eta[m], state.beta
            )
        if dx_tilde_direct is not None:
            gx_tilde += np.where(passive, 0.0, dx_tilde_direct)
        gx = self.filter_x.adjoint(gx_tilde)
        gs = self.filter_s.adjoint(gs_tilde)
        gx[passive] = 0.0
        gs[passive] = 0.0
        return gx, gs
