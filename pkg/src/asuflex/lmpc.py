"""Setpoint-tracking linear MPC on the identified model.

The controller predicts outputs over a finite horizon with the identified
deviation model, penalizes tracking error and input moves, and solves a
condensed box-constrained QP over the stacked input sequence. An output
bias estimate updated from measurements gives offset-free tracking under
constant disturbances. Inputs are normalized by their ranges inside the
QP so the Hessian is well conditioned across MVs with very different
physical scales.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError
from .plant import MV_BOUNDS, MV_NAMES, ManipulatedVars
from .qp import QpProblem, QpSolution, solve_qp
from .sysid import LinearModel

# Output error normalization inside the QP cost, ordered (n_product,
# i_product, dt_irc, f_tank). Keeps ppm-scale and mol/s-scale outputs
# commensurate so the tracking weights are meaningful and the Hessian is
# well conditioned.
OUTPUT_SCALE = np.array([15.0, 1500.0, 3.0, 10.0])


@dataclass(frozen=True)
class MpcConfig:
    """Horizon and weights. ``q`` orders as (n_product, i_product, dt_irc,
    f_tank) and applies to range-normalized output errors; ``r`` penalizes
    range-normalized input moves."""

    horizon: int = 12
    q: tuple = (10.0, 1.0, 1.0, 0.1)
    r: tuple = (0.1, 0.1, 0.1, 0.1)
    bias_gain: float = 1.0
    qp_tol: float = 1e-8
    qp_max_iter: int = 2000

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if min(self.r) <= 0:
            raise ValueError("move weights must be strictly positive")
        if min(self.q) < 0:
            raise ValueError("tracking weights must be non-negative")
        if not 0.0 <= self.bias_gain <= 1.0:
            raise ValueError("bias_gain must be in [0, 1]")


@dataclass
class _Condensed:
    """Horizon-independent pieces of the condensed QP, precomputed once."""

    gamma: np.ndarray  # (N*p, nx): free response map
    phi: np.ndarray  # (N*p, N*m): forced response map
    h: np.ndarray  # constant Hessian
    s: np.ndarray  # move-difference operator
    r_bar: np.ndarray
    q_bar: np.ndarray
    lb: np.ndarray
    ub: np.ndarray


def _condense(model: LinearModel, cfg: MpcConfig,
              u_scale: np.ndarray, u_lo: np.ndarray, u_hi: np.ndarray,
              y_scale: np.ndarray) -> _Condensed:
    nx, m = model.b.shape
    p = model.c.shape[0]
    n = cfg.horizon
    b_n = model.b * u_scale  # inputs normalized by range
    c_n = model.c / y_scale[:, None]  # outputs normalized by range

    # Powers of A applied to B and as free-response rows.
    gamma = np.zeros((n * p, nx))
    phi = np.zeros((n * p, n * m))
    a_pow_b = [b_n]
    a_pow = model.a.copy()
    for k in range(n):
        gamma[k * p:(k + 1) * p] = c_n @ a_pow
        if k + 1 < n:
            a_pow_b.append(model.a @ a_pow_b[-1])
            a_pow = model.a @ a_pow
    for k in range(n):
        for j in range(k + 1):
            phi[k * p:(k + 1) * p, j * m:(j + 1) * m] = c_n @ a_pow_b[k - j]

    q_bar = np.diag(np.tile(np.broadcast_to(cfg.q, (p,)), n))
    r_bar = np.diag(np.tile(np.broadcast_to(cfg.r, (m,)), n))
    s = np.eye(n * m)
    for k in range(1, n):
        s[k * m:(k + 1) * m, (k - 1) * m:k * m] = -np.eye(m)
    h = 2.0 * (phi.T @ q_bar @ phi + s.T @ r_bar @ s)
    h = 0.5 * (h + h.T)
    return _Condensed(
        gamma=gamma, phi=phi, h=h, s=s, r_bar=r_bar, q_bar=q_bar,
        lb=np.tile(u_lo, n), ub=np.tile(u_hi, n),
    )


def build_qp(model: LinearModel, x_hat: np.ndarray, y_sp_dev: np.ndarray,
             d_hat: np.ndarray, cfg: MpcConfig,
             cond: _Condensed | None = None,
             u_prev: np.ndarray | None = None,
             y_scale: np.ndarray | None = None) -> QpProblem:
    """Condensed QP over the stacked range-normalized input sequence.

    ``y_sp_dev`` and ``d_hat`` are output-space deviations; ``u_prev`` is
    the previously applied normalized input (zero if omitted).
    """
    p, nx = model.c.shape
    m = model.b.shape[1]
    if x_hat.shape != (nx,) or y_sp_dev.shape != (p,) or d_hat.shape != (p,):
        raise DimensionMismatchError(
            f"x_hat {x_hat.shape}, y_sp {y_sp_dev.shape}, d_hat {d_hat.shape} "
            f"vs model nx={nx}, p={p}"
        )
    y_scale = _output_scaling(model, y_scale)
    if cond is None:
        scale, lo, hi = _input_scaling(model)
        cond = _condense(model, cfg, scale, lo, hi, y_scale)
    n = cfg.horizon
    err = cond.gamma @ x_hat + np.tile((d_hat - y_sp_dev) / y_scale, n)
    f = 2.0 * (cond.phi.T @ (cond.q_bar @ err))
    if u_prev is not None:
        e_first = np.zeros(n * m)
        e_first[:m] = u_prev
        f -= 2.0 * (cond.s.T @ (cond.r_bar @ e_first))
    return QpProblem(h=cond.h, f=f, lb=cond.lb, ub=cond.ub)


def _input_scaling(model: LinearModel, u_bounds=None):
    """Range scale and normalized deviation bounds per input.

    Defaults to the plant MV bounds for four-input models and to unit
    scale with unbounded inputs otherwise; explicit ``u_bounds`` (list of
    (lo, hi) in absolute units) override.
    """
    m = model.b.shape[1]
    if u_bounds is None:
        if m == len(MV_NAMES):
            u_bounds = [MV_BOUNDS[name] for name in MV_NAMES]
        else:
            u_bounds = [(-np.inf, np.inf)] * m
    scale = np.empty(m)
    lo = np.empty(m)
    hi = np.empty(m)
    for j, (b_lo, b_hi) in enumerate(u_bounds):
        span = b_hi - b_lo
        scale[j] = span if np.isfinite(span) and span > 0 else 1.0
        lo[j] = (b_lo - model.u_ss[j]) / scale[j]
        hi[j] = (b_hi - model.u_ss[j]) / scale[j]
    return scale, lo, hi


def _output_scaling(model: LinearModel, y_scale=None) -> np.ndarray:
    p = model.c.shape[0]
    if y_scale is not None:
        return np.asarray(y_scale, dtype=float)
    return OUTPUT_SCALE.copy() if p == len(OUTPUT_SCALE) else np.ones(p)


class LmpcController:
    """Receding-horizon tracking controller around one identified model.

    Holds the model state estimate, output bias, previous move, and the
    shifted previous QP solution for warm starting. One instance serves
    one rollout sequentially.
    """

    def __init__(self, model: LinearModel, cfg: MpcConfig = MpcConfig(),
                 u_bounds=None, y_scale=None):
        self.model = model
        self.cfg = cfg
        self.y_scale = _output_scaling(model, y_scale)
        self.u_scale, u_lo, u_hi = _input_scaling(model, u_bounds)
        self._cond = _condense(model, cfg, self.u_scale, u_lo, u_hi,
                               self.y_scale)
        self.m = model.b.shape[1]
        self.reset()

    def reset(self) -> None:
        self.x_hat = np.zeros(self.model.nx)
        self.d_hat = np.zeros(self.model.c.shape[0])
        self.u_prev = np.zeros(self.m)
        self._warm = np.zeros(self.cfg.horizon * self.m)
        self.last_solution: QpSolution | None = None

    def step(self, measurement: np.ndarray, y_sp: np.ndarray) -> ManipulatedVars:
        """One receding-horizon move for the four-MV plant.

        ``measurement`` and ``y_sp`` are absolute plant outputs in the
        order (n_product, i_product, dt_irc, f_tank). Returns absolute
        MVs clamped to their bounds. Solver status is available on
        ``last_solution``; a non-converged solve still applies its best
        iterate.
        """
        u_abs = self.step_raw(measurement, y_sp)
        return ManipulatedVars.from_array(u_abs).clamped()

    def step_raw(self, measurement: np.ndarray, y_sp: np.ndarray) -> np.ndarray:
        """Model-agnostic receding-horizon move; returns the absolute
        input vector."""
        measurement = np.asarray(measurement, dtype=float)
        y_sp = np.asarray(y_sp, dtype=float)
        y_meas_dev = measurement - self.model.y_ss
        y_pred_dev = self.model.c @ self.x_hat
        self.d_hat = self.d_hat + self.cfg.bias_gain * (
            y_meas_dev - y_pred_dev - self.d_hat
        )
        qp_prob = build_qp(self.model, self.x_hat, y_sp - self.model.y_ss,
                           self.d_hat, self.cfg, cond=self._cond,
                           u_prev=self.u_prev)
        sol = solve_qp(qp_prob, tol=self.cfg.qp_tol,
                       max_iter=self.cfg.qp_max_iter, x0=self._warm)
        self.last_solution = sol

        u0 = sol.x[:self.m]
        self.x_hat = self.model.a @ self.x_hat + (self.model.b * self.u_scale) @ u0
        self.u_prev = u0.copy()
        # Warm start: shift one step, repeat the tail block.
        self._warm = np.concatenate([sol.x[self.m:], sol.x[-self.m:]])

        return self.model.u_ss + self.u_scale * u0
