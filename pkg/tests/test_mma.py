import numpy as np
import pytest

from buckopt.mma import MmaOptions, MmaState, mma_update


def _iterate(funcs, x0, xmin, xmax, options, iters=60):
    """funcs(x) -> (fval, dfdx); rows with a_i = 1 form the min-max objective."""
    state = MmaState()
    x = x0.copy()
    for _ in range(iters):
        fval, dfdx = funcs(x)
        x = mma_update(state, x, xmin, xmax, fval, dfdx, options)
    return x


def test_bound_constrained_quadratic():
    # min (x - 2)^2 over [0, 1]: pushed to the upper bound
    def funcs(x):
        return (np.array([(x[0] - 2.0) ** 2]),
                np.array([[2.0 * (x[0] - 2.0)]]))

    opt = MmaOptions(move=0.3, a=np.array([1.0]))
    x = _iterate(funcs, np.array([0.3]), np.zeros(1), np.ones(1), opt)
    assert x[0] == pytest.approx(1.0, abs=1e-6)


def test_constrained_minimum_at_kkt_point():
    # min sum (x - 0.9)^2 s.t. mean(x) <= 0.5: optimum x_i = 0.5
    n = 8

    def funcs(x):
        obj = np.sum((x - 0.9) ** 2)
        rows = np.array([obj, np.mean(x) / 0.5 - 1.0])
        grads = np.vstack([2.0 * (x - 0.9), np.full(n, 1.0 / (0.5 * n))])
        return rows, grads

    opt = MmaOptions(move=0.2, a=np.array([1.0, 0.0]))
    x = _iterate(funcs, np.full(n, 0.25), np.zeros(n), np.ones(n), opt, 120)
    assert x == pytest.approx(np.full(n, 0.5), abs=1e-4)


def test_minmax_two_parabolas():
    # min max((x-1)^2, x^2) -> x = 0.5 where the branches cross
    def funcs(x):
        rows = np.array([(x[0] - 1.0) ** 2, x[0] ** 2])
        grads = np.array([[2.0 * (x[0] - 1.0)], [2.0 * x[0]]])
        return rows, grads

    opt = MmaOptions(move=0.2, a=np.array([1.0, 1.0]))
    x = _iterate(funcs, np.array([0.12]), np.zeros(1), np.ones(1), opt, 80)
    assert x[0] == pytest.approx(0.5, abs=1e-4)


def test_move_limit_respected():
    def funcs(x):
        return np.array([np.sum(x)]), np.ones((1, x.size))

    opt = MmaOptions(move=0.05, a=np.array([1.0]))
    state = MmaState()
    x0 = np.full(4, 0.5)
    x1 = mma_update(state, x0, np.zeros(4), np.ones(4), *funcs(x0), opt)
    assert np.abs(x1 - x0).max() <= 0.05 + 1e-12


def test_iterates_stay_in_bounds():
    rng = np.random.default_rng(0)

    def funcs(x):
        g = rng.standard_normal((2, x.size))
        return rng.standard_normal(2), g

    opt = MmaOptions(move=0.4, a=np.array([1.0, 0.0]))
    state = MmaState()
    x = np.full(6, 0.5)
    lo = np.full(6, 0.2)
    hi = np.full(6, 0.9)
    for _ in range(25):
        x = mma_update(state, x, lo, hi, *funcs(x), opt)
        assert np.all(x >= lo - 1e-12) and np.all(x <= hi + 1e-12)


def test_asymptotes_shrink_on_oscillation():
    # alternating gradient sign forces the oscillation branch
    state = MmaState()
    opt = MmaOptions(move=0.3, a=np.array([1.0]))
    x = np.array([0.5])
    sign = 1.0
    for _ in range(6):
        x = mma_update(state, x, np.zeros(1), np.ones(1),
                       np.array([sign * x[0]]), np.array([[sign]]), opt)
        sign = -sign
    spread_osc = (state.upp - state.low)[0]

    state2 = MmaState()
    x = np.array([0.5])
    for _ in range(6):
        x = mma_update(state2, x, np.zeros(1), np.ones(1),
                       np.array([x[0]]), np.array([[1.0]]), opt)
    spread_mono = (state2.upp - state2.low)[0]
    assert spread_osc < spread_mono
