"""Reward shaping: electricity cost, path-constraint penalties, and the
time-activated quadratic terminal penalty.

Sign convention: all weights are non-negative and penalties are applied
as non-positive rewards, so the total reward never exceeds the pure
electricity term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .plant import PowerBreakdown


@dataclass(frozen=True)
class PenaltyConfig:
    """Weights and activation time for constraint penalties.

    ``t_activate`` is the hour of the day after which the terminal-holdup
    penalty switches on; ``fault_penalty`` is charged once when the tank
    runs empty and the episode aborts.
    """

    lambda_path: float = 50.0
    lambda_term: float = 500.0
    t_activate: float = 18.0  # h
    fault_penalty: float = 50.0

    def __post_init__(self):
        if not 0.0 <= self.t_activate < 24.0:
            raise ValueError(f"t_activate must be in [0, 24): {self.t_activate}")
        if min(self.lambda_path, self.lambda_term, self.fault_penalty) < 0.0:
            raise ValueError("penalty weights must be non-negative")


def elec_reward(price: float, pw: PowerBreakdown, dt_h: float) -> float:
    """Negative electricity cost of one step: -price * net power * dt.

    ``price`` in $/MWh, power in MW, ``dt_h`` in hours; result in $ (negated).
    """
    if dt_h <= 0:
        raise ValueError("dt_h must be positive")
    return -price * (pw.p_comp + pw.p_liq - pw.p_tur) * dt_h


def path_penalty(g: float, lam: float) -> float:
    """Linear penalty for one normalized path constraint g <= 0: active
    only when violated."""
    if g > 0.0:
        return -lam * g
    return 0.0


def terminal_penalty(h_val: float, t_h: float, cfg: PenaltyConfig) -> float:
    """Quadratic penalty on the normalized terminal deviation, active for
    t > t_activate.

    Squaring handles the holdup equality: deviations of either sign are
    penalized identically.
    """
    if t_h > cfg.t_activate:
        return -cfg.lambda_term * h_val * h_val
    return 0.0


def total_reward(price: float, pw: PowerBreakdown, dt_h: float,
                 g_vec, h_val: float, t_h: float, cfg: PenaltyConfig,
                 fault: bool = False) -> float:
    """Per-step reward: electricity term plus all penalties."""
    r = elec_reward(price, pw, dt_h)
    for g in np.asarray(g_vec, dtype=float):
        r += path_penalty(float(g), cfg.lambda_path)
    r += terminal_penalty(h_val, t_h, cfg)
    if fault:
        r -= cfg.fault_penalty
    return r
