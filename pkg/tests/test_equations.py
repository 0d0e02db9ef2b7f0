import numpy as np
import pytest

from randeq.combinatorics import count_systems
from randeq.equations import (
    EquationSystem,
    ModeAssignment,
    conic_system,
    enumerate_modes,
    eval_equation,
    linear_system,
    solve_linear_deterministic,
)
from randeq.errors import CombinationOverflow, DimensionMismatch, SingularSystem
from randeq.mixture import MixtureDensity, atom, gaussian, gaussian_mixture, single


def test_linear_dot_product():
    assert eval_equation(linear_system(1, 2), 0, (3, 4), (1, 2)) == 11


def test_conic_circle():
    assert eval_equation(conic_system(1), 0, (3, 4), (1, 0, 1, 0, 0)) == 25


def test_char_poly_identity_root():
    sys = EquationSystem("char_poly", 1, 1, (6,))
    assert eval_equation(sys, 0, (1.0,), (1, 0, 0, 1, 0, 1)) == 0


def test_char_poly_roots_are_eigenvalues():
    rng = np.random.default_rng(0)
    sys = EquationSystem("char_poly", 1, 1, (6,))
    for _ in range(20):
        s = rng.normal(size=6) * rng.uniform(0.1, 5)
        m = np.array([[s[0], s[1], s[2]], [s[1], s[3], s[4]], [s[2], s[4], s[5]]])
        scale = np.abs(m).max()
        for lam in np.linalg.eigvalsh(m):
            assert abs(eval_equation(sys, 0, (lam,), s)) <= 1e-8 * max(scale, 1.0) ** 3


def test_control_residual():
    p = {"gamma": 0.2, "alpha": 0.4, "beta": 0.3}
    sys = EquationSystem("control_residual", 2, 2, (2,), p)
    x, s = (1.0, 2.0), (0.5, -1.0)
    assert eval_equation(sys, 0, x, s) == pytest.approx(1 + 0.2 * 2 + 0.6 * 0.5 + 0.3 * -1)
    assert eval_equation(sys, 1, x, s) == pytest.approx(0.2 * 1 + 2 - 0.3 * 0.5 + 0.6 * -1)


def test_portfolio_gradient_matches_finite_difference():
    mu = [0.2, 0.1, 0.3]
    lam = 1.7
    sys = EquationSystem("portfolio_gradient", 2, 2, (3,), {"mu": mu, "lambda": lam})
    a = np.array([0.35, -0.05, 0.12])

    def objective(y):
        w = np.array([y[0], y[1], 1 - y[0] - y[1]])
        dev = a - np.array(mu)
        return w @ a - 0.5 * lam * (w @ dev) ** 2

    x = np.array([0.3, 0.45])
    h = 1e-6
    for r in range(2):
        e = np.zeros(2)
        e[r] = h
        fd = (objective(x + e) - objective(x - e)) / (2 * h)
        assert eval_equation(sys, r, x, a) == pytest.approx(fd, abs=1e-8)


def test_portfolio_zero_risk_gradient():
    sys = EquationSystem("portfolio_gradient", 2, 2, (3,), {"mu": [0.2, 0.1, 0.3], "lambda": 0.0})
    a = (0.2, 0.1, 0.3)
    for x in ((0.1, 0.2), (0.6, 0.3)):
        assert eval_equation(sys, 0, x, a) == pytest.approx(-0.1)
        assert eval_equation(sys, 1, x, a) == pytest.approx(-0.2)


def test_partition_blocks_are_disjoint():
    # sentinel probing: equation r only reacts to its own block
    sys = linear_system(3, 2)
    assert sys.is_partitioned and sys.k_total == 6
    base = np.zeros(6)
    x = np.array([1.0, 1.0])
    for r in range(3):
        start, size = sys.block(r)
        for k in range(6):
            s = base.copy()
            s[k] = 7.0
            val = sys.residuals(r, x, s[start:start + size][None, :])[0]
            assert (val != 0) == (start <= k < start + size)


def test_shared_block():
    sys = EquationSystem("portfolio_gradient", 2, 2, (3,), {"mu": [0, 0, 0], "lambda": 1.0})
    assert not sys.is_partitioned
    assert sys.block(0) == sys.block(1) == (0, 3)


def test_dimension_checks():
    with pytest.raises(DimensionMismatch):
        eval_equation(linear_system(1, 2), 0, (1, 2, 3), (1, 2))
    with pytest.raises(DimensionMismatch):
        eval_equation(linear_system(1, 2), 0, (1, 2), (1, 2, 3))
    with pytest.raises(DimensionMismatch):
        EquationSystem("linear", 2, 2, (2, 2, 2))
    with pytest.raises(DimensionMismatch):
        EquationSystem("conic", 2, 2, (5, 4))
    with pytest.raises(ValueError):
        EquationSystem("control_residual", 2, 2, (2,), {"gamma": 0.1})


def test_custom_family():
    sys = EquationSystem("custom", 1, 1, (2,), func=lambda r, x, s: s[:, 0] * np.sin(x[0]) + s[:, 1])
    assert eval_equation(sys, 0, (np.pi / 2,), (2.0, 1.0)) == pytest.approx(3.0)


def _densities(counts):
    return [gaussian_mixture(list(range(c)), 0.1) for c in counts]


def test_enumerate_modes_small():
    sys = EquationSystem("custom", 1, 1, (3,), func=lambda r, x, s: s.sum(1))
    modes = list(enumerate_modes(sys, _densities([2, 2, 2]), _densities([2])))
    assert len(modes) == 16
    assert modes[0] == ModeAssignment((0, 0, 0), (0,))
    assert modes[1] == ModeAssignment((0, 0, 0), (1,))
    assert modes[-1] == ModeAssignment((1, 1, 1), (1,))


def test_enumerate_modes_all_ones():
    sys = linear_system(1, 1)
    assert len(list(enumerate_modes(sys, _densities([1]), _densities([1])))) == 1


def test_enumerate_modes_fig2_count():
    sys = linear_system(2, 2)
    modes = list(enumerate_modes(sys, _densities([2] * 4), _densities([2] * 2)))
    assert len(modes) == 64 == count_systems([2] * 4, [2] * 2)
    assert len(set(modes)) == 64


@pytest.mark.parametrize("la, lb", [([1, 3], [2]), ([2, 3, 1, 2], [3, 1]), ([3] * 4, [2, 2])])
def test_enumerate_count_matches_formula(la, lb):
    sys = EquationSystem("linear", 2, len(lb), (2,) * len(lb)) if len(la) == 2 * len(lb) else linear_system(1, 2)
    assert len(list(enumerate_modes(sys, _densities(la), _densities(lb)))) == count_systems(la, lb)


def test_enumerate_modes_overflow():
    sys = linear_system(2, 2)
    with pytest.raises(CombinationOverflow):
        enumerate_modes(sys, _densities([2] * 4), _densities([2] * 2), cap=63)


def test_solve_examples():
    assert np.allclose(solve_linear_deterministic(np.eye(2), (5, 7)), (5, 7))
    assert np.allclose(solve_linear_deterministic(((2, 0), (0, 4)), (2, 8)), (1, 2))


def test_solve_random_three_by_three():
    rng = np.random.default_rng(3)
    for _ in range(50):
        a = rng.normal(size=(3, 3))
        x = np.array([1.0, 2.0, 3.0])
        b = a @ x
        sol = solve_linear_deterministic(a, b)
        assert np.max(np.abs(a @ sol - b)) <= 1e-9 * (1 + np.abs(b).max())
        if np.linalg.cond(a) < 1e6:
            assert np.allclose(sol, x, atol=1e-9)


def test_solve_singular():
    with pytest.raises(SingularSystem):
        solve_linear_deterministic(((1, 2), (2, 4)), (1, 2))
    with pytest.raises(DimensionMismatch):
        solve_linear_deterministic(((1, 2, 3), (2, 4, 5)), (1, 2))
