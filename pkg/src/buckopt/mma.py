"""Method of moving asymptotes, primal-dual interior-point subproblem.

Plain implementation of the classic MMA update: separable convex
approximations built from moving lower/upper asymptotes, solved in the dual
with a Newton interior-point iteration. The min-max over design
realizations is expressed through the standard (a0, a_i, c_i, d_i)
machinery: rows with a_i = 1 bound the artificial objective variable z, so
minimizing z minimizes the worst row.

All arrays are 1D over the design variables except the constraint Jacobian
dfdx with shape (m, n).
"""

from dataclasses import dataclass, field

import numpy as np

ASY_INIT = 0.5
ASY_INCR = 1.2
ASY_DECR = 0.7
RAA0 = 1e-5
EPSI_MIN = 1e-7


@dataclass
class MmaOptions:
    move: float = 0.2
    a0: float = 1.0
    a: np.ndarray = None        # (m,) coefficient on z per row
    c: np.ndarray = None        # (m,) slack penalty per row
    d: np.ndarray = None        # (m,)


@dataclass
class MmaState:
    """Carries asymptotes and the previous two iterates between updates."""

    low: np.ndarray = None
    upp: np.ndarray = None
    xold1: np.ndarray = None
    xold2: np.ndarray = None
    iteration: int = field(default=0)


def mma_update(state, xval, xmin, xmax, fval, dfdx, options):
    """One MMA step for min z s.t. f_i(x) - a_i z <= 0, x in [xmin, xmax].

    There is no explicit f0; every response enters as a constraint row
    (objective rows carry a_i = 1). Returns the new design point and
    mutates `state`.
    """
    n = xval.size
    m = fval.size
    a = options.a if options.a is not None else np.zeros(m)
    c = options.c if options.c is not None else np.full(m, 1000.0)
    d = options.d if options.d is not None else np.ones(m)

    state.iteration += 1
    xrange = np.maximum(xmax - xmin, 1e-12)
    if state.iteration <= 2:
        low = xval - ASY_INIT * xrange
        upp = xval + ASY_INIT * xrange
    else:
        osc = (xval - state.xold1) * (state.xold1 - state.xold2)
        factor = np.ones(n)
        factor[osc > 0] = ASY_INCR
        factor[osc < 0] = ASY_DECR
        low = xval - factor * (state.xold1 - state.low)
        upp = xval + factor * (state.upp - state.xold1)
        low = np.clip(low, xval - 10.0 * xrange, xval - 0.01 * xrange)
        upp = np.clip(upp, xval + 0.01 * xrange, xval + 10.0 * xrange)
    state.xold2 = state.xold1
    state.xold1 = xval.copy()
    state.low, state.upp = low, upp

    alfa = np.maximum.reduce([xmin, low + 0.1 * (xval - low),
                              xval - options.move * xrange])
    beta = np.minimum.reduce([xmax, upp - 0.1 * (upp - xval),
                              xval + options.move * xrange])

    ux1 = upp - xval
    xl1 = xval - low
    dfp = np.maximum(dfdx, 0.0)
    dfm = np.maximum(-dfdx, 0.0)
    reg = RAA0 / xrange
    P = ux1[None, :] ** 2 * (1.001 * dfp + 0.001 * dfm + reg[None, :])
    Q = xl1[None, :] ** 2 * (0.001 * dfp + 1.001 * dfm + reg[None, :])
    b = P @ (1.0 / ux1) + Q @ (1.0 / xl1) - fval

    p0 = RAA0 * ux1**2 / xrange
    q0 = RAA0 * xl1**2 / xrange
    xnew = _subsolv(low, upp, alfa, beta, p0, q0, P, Q,
                    options.a0, a, b, c, d)
    return xnew


def _subsolv(low, upp, alfa, beta, p0, q0, P, Q, a0, a, b, c, d):
    """Primal-dual Newton solve of the separable MMA subproblem."""
    n = alfa.size
    m = b.size
    epsi = 1.0
    x = 0.5 * (alfa + beta)
    y = np.ones(m)
    z = 1.0
    lam = np.ones(m)
    xsi = np.maximum(1.0 / (x - alfa), 1.0)
    eta = np.maximum(1.0 / (beta - x), 1.0)
    mu = np.maximum(1.0, 0.5 * c)
    zet = 1.0
    s = np.ones(m)

    def residual(x, y, z, lam, xsi, eta, mu, zet, s, epsi):
        ux1, xl1 = upp - x, x - low
        plam = p0 + P.T @ lam
        qlam = q0 + Q.T @ lam
        gvec = P @ (1.0 / ux1) + Q @ (1.0 / xl1)
        rex = plam / ux1**2 - qlam / xl1**2 - xsi + eta
        rey = c + d * y - mu - lam
        rez = a0 - zet - a @ lam
        relam = gvec - a * z - y + s - b
        rexsi = xsi * (x - alfa) - epsi
        reeta = eta * (beta - x) - epsi
        remu = mu * y - epsi
        rezet = zet * z - epsi
        res = lam * s - epsi
        parts = np.concatenate([
            rex, rey, [rez], relam, rexsi, reeta, remu, [rezet], res])
        return parts

    while epsi > EPSI_MIN:
        r = residual(x, y, z, lam, xsi, eta, mu, zet, s, epsi)
        rnorm = np.linalg.norm(r)
        rmax = np.abs(r).max()
        for _ in range(200):
            if rmax <= 0.9 * epsi:
                break
            ux1, xl1 = upp - x, x - low
            ux2, xl2 = ux1**2, xl1**2
            plam = p0 + P.T @ lam
            qlam = q0 + Q.T @ lam
            gvec = P @ (1.0 / ux1) + Q @ (1.0 / xl1)
            GG = P / ux2[None, :] - Q / xl2[None, :]
            delx = (plam / ux2 - qlam / xl2
                    - epsi / (x - alfa) + epsi / (beta - x))
            dely = c + d * y - lam - epsi / y
            delz = a0 - a @ lam - epsi / z
            dellam = gvec - a * z - y - b + epsi / lam
            diagx = (2.0 * (plam / ux1**3 + qlam / xl1**3)
                     + xsi / (x - alfa) + eta / (beta - x))
            diagy = d + mu / y
            diaglamyi = s / lam + 1.0 / diagy

            # m << n always holds here; eliminate x and solve the dense
            # (m+1) system for (dlam, dz)
            blam = dellam + dely / diagy - GG @ (delx / diagx)
            Alam = np.diag(diaglamyi) + (GG / diagx[None, :]) @ GG.T
            AA = np.zeros((m + 1, m + 1))
            AA[:m, :m] = Alam
            AA[:m, m] = a
            AA[m, :m] = a
            AA[m, m] = -zet / z
            rhs = np.concatenate([blam, [delz]])
            sol = np.linalg.solve(AA, rhs)
            dlam = sol[:m]
            dz = sol[m]
            dx = -(delx + GG.T @ dlam) / diagx
            dy = -dely / diagy + dlam / diagy
            dxsi = -xsi + epsi / (x - alfa) - xsi * dx / (x - alfa)
            deta = -eta + epsi / (beta - x) + eta * dx / (beta - x)
            dmu = -mu + epsi / y - mu * dy / y
            dzet = -zet + epsi / z - zet * dz / z
            ds = -s + epsi / lam - s * dlam / lam

            xx = np.concatenate([y, [z], lam, xsi, eta, mu, [zet], s])
            dxx = np.concatenate([dy, [dz], dlam, dxsi, deta, dmu, [dzet], ds])
            step = max(
                np.max(-1.01 * dxx / xx),
                np.max(-1.01 * dx / (x - alfa)),
                np.max(1.01 * dx / (beta - x)),
                1.0,
            )
            steg = 1.0 / step

            xo, yo, zo = x, y, z
            lamo, xsio, etao = lam, xsi, eta
            muo, zeto, so = mu, zet, s
            for _ in range(50):
                x = xo + steg * dx
                y = yo + steg * dy
                z = zo + steg * dz
                lam = lamo + steg * dlam
                xsi = xsio + steg * dxsi
                eta = etao + steg * deta
                mu = muo + steg * dmu
                zet = zeto + steg * dzet
                s = so + steg * ds
                r = residual(x, y, z, lam, xsi, eta, mu, zet, s, epsi)
                if np.linalg.norm(r) < 2.0 * rnorm:
                    break
                steg *= 0.5
            rnorm = np.linalg.norm(r)
            rmax = np.abs(r).max()
        epsi *= 0.1
    return x
