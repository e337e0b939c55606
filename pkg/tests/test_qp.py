"""Box-QP solver against closed forms and a brute-force KKT oracle."""

import itertools

import numpy as np
import pytest

from asuflex.errors import NonConvexError
from asuflex.qp import QpProblem, pg_residual, solve_qp


def kkt_enumerate(qp: QpProblem, tol: float = 1e-9) -> np.ndarray:
    """Reference solution by enumerating every active-set pattern.

    For each assignment of coordinates to {lower, upper, free} the free
    block is solved exactly and the KKT conditions are checked. With a
    positive definite Hessian the KKT point is unique, so the first
    pattern that satisfies the conditions is the optimum.
    """
    n = qp.dim
    for pattern in itertools.product((2, 0, 1), repeat=n):
        x = np.empty(n)
        free = [i for i, p in enumerate(pattern) if p == 2]
        for i, p in enumerate(pattern):
            if p == 0:
                x[i] = qp.lb[i]
            elif p == 1:
                x[i] = qp.ub[i]
        if free:
            fixed = [i for i in range(n) if i not in free]
            h_ff = qp.h[np.ix_(free, free)]
            rhs = -(qp.f[free])
            if fixed:
                rhs -= qp.h[np.ix_(free, fixed)] @ x[fixed]
            try:
                x[free] = np.linalg.solve(h_ff, rhs)
            except np.linalg.LinAlgError:
                continue
        if np.any(x < qp.lb - tol) or np.any(x > qp.ub + tol):
            continue
        grad = qp.h @ x + qp.f
        ok = True
        for i, p in enumerate(pattern):
            if p == 0 and grad[i] < -tol:
                ok = False
            elif p == 1 and grad[i] > tol:
                ok = False
            elif p == 2 and abs(grad[i]) > 1e-6:
                ok = False
        if not ok:
            continue
        return x
    raise AssertionError("no KKT point found")


def random_spd_qp(rng: np.random.Generator, n: int) -> QpProblem:
    m = rng.normal(size=(n, n))
    h = m @ m.T + 0.1 * np.eye(n)
    f = rng.normal(scale=2.0, size=n)
    lo = rng.uniform(-2.0, 0.0, size=n)
    hi = lo + rng.uniform(0.5, 3.0, size=n)
    return QpProblem(h=h, f=f, lb=lo, ub=hi)


class TestClosedForms:
    def test_unconstrained_interior(self):
        # min 0.5 x'Hx + f'x with minimizer inside the box: x* = -H^{-1} f.
        h = np.array([[2.0, 0.0], [0.0, 4.0]])
        f = np.array([-2.0, -4.0])
        qp = QpProblem(h=h, f=f, lb=np.full(2, -10.0), ub=np.full(2, 10.0))
        sol = solve_qp(qp, tol=1e-12)
        assert sol.converged
        assert sol.x == pytest.approx([1.0, 1.0], abs=1e-9)

    def test_clipped_scalar(self):
        # Unconstrained minimizer 3 clips to the upper bound 1.
        qp = QpProblem(h=np.array([[2.0]]), f=np.array([-6.0]),
                       lb=np.array([-1.0]), ub=np.array([1.0]))
        sol = solve_qp(qp)
        assert sol.x == pytest.approx([1.0])
        assert sol.objective == pytest.approx(0.5 * 2 * 1 - 6 * 1)

    def test_coupled_active_set(self):
        # One coordinate pinned at a bound, the other free given it.
        h = np.array([[2.0, 1.0], [1.0, 2.0]])
        f = np.array([-8.0, 0.0])
        qp = QpProblem(h=h, f=f, lb=np.array([0.0, -0.5]),
                       ub=np.array([2.0, 2.0]))
        sol = solve_qp(qp, tol=1e-12)
        # x0 hits ub=2; then min over x1: x1 = (0 - 1*2)/2 = -1, clipped
        # to -0.5.
        assert sol.x == pytest.approx([2.0, -0.5], abs=1e-9)

    def test_nonconvex_rejected(self):
        qp = QpProblem(h=np.array([[-1.0]]), f=np.array([0.0]),
                       lb=np.array([-1.0]), ub=np.array([1.0]))
        with pytest.raises(NonConvexError):
            solve_qp(qp)

    def test_max_iter_returns_flagged(self):
        rng = np.random.default_rng(0)
        qp = random_spd_qp(rng, 6)
        sol = solve_qp(qp, tol=1e-14, max_iter=2)
        assert not sol.converged
        assert sol.iterations == 2

    def test_warm_start_at_solution(self):
        rng = np.random.default_rng(1)
        qp = random_spd_qp(rng, 4)
        x_star = solve_qp(qp, tol=1e-12).x
        sol = solve_qp(qp, tol=1e-10, x0=x_star)
        assert sol.iterations <= 2
        assert sol.converged


class TestAgainstKktOracle:
    def test_random_instances(self):
        rng = np.random.default_rng(42)
        for _ in range(60):
            n = int(rng.integers(2, 7))
            qp = random_spd_qp(rng, n)
            sol = solve_qp(qp, tol=1e-10, max_iter=20000)
            ref = kkt_enumerate(qp)
            assert sol.converged
            assert np.max(np.abs(sol.x - ref)) < 1e-6

    def test_tight_box_forces_corner(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            n = int(rng.integers(2, 5))
            qp0 = random_spd_qp(rng, n)
            # Shift the box far from the unconstrained minimizer.
            qp = QpProblem(h=qp0.h, f=qp0.f + 50.0,
                           lb=qp0.lb + 10.0, ub=qp0.ub + 10.0)
            sol = solve_qp(qp, tol=1e-10, max_iter=20000)
            assert np.max(np.abs(sol.x - kkt_enumerate(qp))) < 1e-6


class TestSolverInvariants:
    def test_iterates_feasible_and_residual_small(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            qp = random_spd_qp(rng, 5)
            sol = solve_qp(qp, tol=1e-9, max_iter=20000)
            assert np.all(sol.x >= qp.lb - 1e-12)
            assert np.all(sol.x <= qp.ub + 1e-12)
            assert pg_residual(qp, sol.x) <= 1e-9

    def test_objective_not_above_feasible_samples(self):
        rng = np.random.default_rng(6)
        qp = random_spd_qp(rng, 5)
        sol = solve_qp(qp, tol=1e-10, max_iter=20000)
        for _ in range(200):
            z = rng.uniform(qp.lb, qp.ub)
            assert sol.objective <= qp.objective(z) + 1e-9

    def test_dimension_validation(self):
        with pytest.raises(ValueError):
            QpProblem(h=np.eye(3), f=np.zeros(2),
                      lb=np.zeros(2), ub=np.ones(2))
        with pytest.raises(ValueError):
            QpProblem(h=np.eye(2), f=np.zeros(2),
                      lb=np.ones(2), ub=np.zeros(2))
