"""Box-constrained quadratic programming by monotone accelerated projected
gradient.

Problems are of the form

    minimize  0.5 x' H x + f' x   subject to  lb <= x <= ub

with H symmetric positive semidefinite. The solver uses a Nesterov
momentum step with a fixed 1/L step size; whenever the accelerated
candidate would increase the objective the momentum is restarted and a
plain projected-gradient step is taken instead, so iterates never
increase the objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonConvexError

CURVATURE_TOL = -1e-8


@dataclass(frozen=True)
class QpProblem:
    h: np.ndarray
    f: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        n = len(self.f)
        if self.h.shape != (n, n):
            raise ValueError(f"Hessian shape {self.h.shape} vs f of length {n}")
        if np.any(self.lb > self.ub):
            raise ValueError("lb exceeds ub")

    @property
    def dim(self) -> int:
        return len(self.f)

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.h @ x + self.f @ x)


@dataclass(frozen=True)
class QpSolution:
    x: np.ndarray
    objective: float
    residual: float
    iterations: int
    converged: bool


def _project(x, lb, ub):
    return np.minimum(np.maximum(x, lb), ub)


def pg_residual(qp: QpProblem, x: np.ndarray) -> float:
    """Infinity norm of x - proj(x - grad), the fixed-point residual."""
    return float(np.max(np.abs(x - _project(x - (qp.h @ x + qp.f), qp.lb, qp.ub))))


def solve_qp(qp: QpProblem, tol: float = 1e-8, max_iter: int = 2000,
             x0: np.ndarray | None = None) -> QpSolution:
    """Solve a box-constrained QP; optionally warm-started from ``x0``.

    Raises :class:`NonConvexError` on negative curvature (a construction
    bug upstream). On hitting ``max_iter`` the best iterate is returned
    with ``converged=False``.
    """
    eigs = np.linalg.eigvalsh(0.5 * (qp.h + qp.h.T))
    if eigs[0] < CURVATURE_TOL * max(1.0, abs(eigs[-1])):
        raise NonConvexError(f"Hessian has negative eigenvalue {eigs[0]:.3e}")
    lip = max(float(eigs[-1]), 1e-12)

    x = _project(np.zeros(qp.dim) if x0 is None else np.asarray(x0, dtype=float),
                 qp.lb, qp.ub)
    y = x.copy()
    t = 1.0
    fx = qp.objective(x)
    it = 0
    for it in range(1, max_iter + 1):
        grad_y = qp.h @ y + qp.f
        cand = _project(y - grad_y / lip, qp.lb, qp.ub)
        f_cand = qp.objective(cand)
        if f_cand > fx:
            # Momentum overshoot: restart and take a plain PG step from x.
            cand = _project(x - (qp.h @ x + qp.f) / lip, qp.lb, qp.ub)
            f_cand = qp.objective(cand)
            t = 1.0
            y = cand.copy()
        else:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            y = cand + ((t - 1.0) / t_next) * (cand - x)
            t = t_next
        x, fx = cand, f_cand
        if pg_residual(qp, x) <= tol:
            return QpSolution(x=x, objective=fx, residual=pg_residual(qp, x),
                              iterations=it, converged=True)
    return QpSolution(x=x, objective=fx, residual=pg_residual(qp, x),
                      iterations=it, converged=False)
