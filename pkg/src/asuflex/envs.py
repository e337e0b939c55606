"""Episodic environments for the two control architectures.

Both run one operating day of 96 fifteen-minute steps over the surrogate
plant, share the observation layout, reward composition, and termination
rules, and differ only in the action channel: the direct architecture
commands all four MVs, the hierarchical one commands a single production
setpoint that a lower-level LMPC turns into MVs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import plant as plant_mod
from . import pricing, rewards
from .errors import EpisodeFinishedError, TankEmptyError
from .lmpc import LmpcController
from .plant import MV_BOUNDS, MV_NAMES, ManipulatedVars, PlantConfig
from .rewards import PenaltyConfig

SETPOINT_RANGE = (15.0, 30.0)  # mol/s, hierarchical action range

TRAJECTORY_COLUMNS = [
    "step", "t_h", "price", "setpoint", "n_mac", "xi_tur", "xi_top",
    "f_drain", "xi_liq", "n_product", "i_product", "dt_irc", "n_tank",
    "f_tank", "p_comp", "p_liq", "p_tur", "reward",
]


@dataclass(frozen=True)
class EpisodeConfig:
    steps_per_episode: int = 96
    dt: float = 900.0  # s
    demand: float = 20.0  # mol/s
    arch: str = "direct"

    def __post_init__(self):
        if self.steps_per_episode * self.dt != 86400.0:
            raise ValueError("an episode must cover exactly one day")
        if self.arch not in ("direct", "hierarchical"):
            raise ValueError(f"unknown architecture {self.arch!r}")

    def day_seconds(self) -> float:
        return self.steps_per_episode * self.dt


@dataclass(frozen=True)
class ActionSpec:
    dim: int
    ranges: tuple  # ((lo, hi), ...) physical per dimension

    def to_physical(self, action: np.ndarray) -> np.ndarray:
        """Affine [-1, 1]^dim -> physical box, monotone per dimension."""
        a = np.clip(np.asarray(action, dtype=float).reshape(-1), -1.0, 1.0)
        if a.shape != (self.dim,):
            raise ValueError(f"action shape {a.shape}, expected ({self.dim},)")
        out = np.empty(self.dim)
        for i, (lo, hi) in enumerate(self.ranges):
            out[i] = 0.5 * (lo + hi) + 0.5 * a[i] * (hi - lo)
        return out


DIRECT_ACTION_SPEC = ActionSpec(4, tuple(MV_BOUNDS[n] for n in MV_NAMES))
HIER_ACTION_SPEC = ActionSpec(1, (SETPOINT_RANGE,))


class _EpisodeBase:
    """Shared plant stepping, reward, and bookkeeping for both archs."""

    action_spec: ActionSpec

    def __init__(self, profile: pricing.PriceProfile,
                 episode_cfg: EpisodeConfig = EpisodeConfig(),
                 plant_cfg: PlantConfig = plant_mod.DEFAULT_PLANT,
                 penalty_cfg: PenaltyConfig = PenaltyConfig()):
        self.profile = profile
        self.episode_cfg = episode_cfg
        self.plant_cfg = plant_cfg
        self.penalty_cfg = penalty_cfg
        self.state = None
        self.step_idx = 0
        self.done = True

    @property
    def obs_dim(self) -> int:
        return plant_mod.OBS_DIM

    @property
    def act_dim(self) -> int:
        return self.action_spec.dim

    def set_profile(self, profile: pricing.PriceProfile) -> None:
        """Swap the price profile before the next reset."""
        self.profile = profile

    def reset(self, seed: int = 0) -> np.ndarray:
        self.state = plant_mod.reset(seed, cfg=self.plant_cfg)
        self.step_idx = 0
        self.done = False
        return self._observe()

    def _observe(self) -> np.ndarray:
        t_day = min(24.0, self.state.t_sim / 3600.0)
        fc = pricing.forecast(self.profile, self.state.t_sim)
        return plant_mod.observe(self.state, fc, t_day)

    def _advance(self, mv: ManipulatedVars, setpoint: float | None,
                 extra_info: dict | None = None):
        if self.done:
            raise EpisodeFinishedError("environment stepped after episode end")
        price = self.profile.price_at(self.state.t_sim)
        fault = False
        prev_state = self.state
        try:
            self.state = plant_mod.step(self.state, mv,
                                        n_demand=self.episode_cfg.demand,
                                        dt=self.episode_cfg.dt, cfg=self.plant_cfg)
        except TankEmptyError:
            fault = True

        ref_state = prev_state if fault else self.state
        pw = plant_mod.power(ref_state, mv, cfg=self.plant_cfg)
        g_vec = plant_mod.constraint_values(ref_state)
        h_val = plant_mod.terminal_deviation(ref_state)
        t_h = ref_state.t_sim / 3600.0
        reward = rewards.total_reward(
            price, pw, self.episode_cfg.dt / 3600.0, g_vec, h_val, t_h,
            self.penalty_cfg, fault=fault,
        )
        self.step_idx += 1
        self.done = fault or self.step_idx >= self.episode_cfg.steps_per_episode
        if fault:
            self.state = prev_state  # keep the last valid state observable

        info = {
            "mv": mv,
            "power": pw,
            "g_vec": g_vec,
            "h_val": h_val,
            "price": price,
            "xi_liq": plant_mod.liq_split(ref_state.n_product,
                                          self.episode_cfg.demand),
            "elec_reward": rewards.elec_reward(price, pw,
                                               self.episode_cfg.dt / 3600.0),
            "fault": fault,
            "setpoint": setpoint,
        }
        if extra_info:
            info.update(extra_info)
        return self._observe(), reward, self.done, info


class DirectEnv(_EpisodeBase):
    """Direct architecture: the agent commands all four MVs."""

    action_spec = DIRECT_ACTION_SPEC

    def __init__(self, profile, episode_cfg: EpisodeConfig | None = None, **kw):
        cfg = episode_cfg or EpisodeConfig(arch="direct")
        super().__init__(profile, cfg, **kw)

    def step(self, action: np.ndarray):
        mv = ManipulatedVars.from_array(self.action_spec.to_physical(action))
        return self._advance(mv.clamped(), setpoint=None)


class HierEnv(_EpisodeBase):
    """Hierarchical architecture: the agent commands one production
    setpoint tracked by the embedded LMPC."""

    action_spec = HIER_ACTION_SPEC

    def __init__(self, profile, controller: LmpcController,
                 episode_cfg: EpisodeConfig | None = None, **kw):
        cfg = episode_cfg or EpisodeConfig(arch="hierarchical")
        super().__init__(profile, cfg, **kw)
        self.controller = controller

    def reset(self, seed: int = 0) -> np.ndarray:
        self.controller.reset()
        return super().reset(seed)

    def step(self, action: np.ndarray):
        sp = float(self.action_spec.to_physical(action)[0])
        sp = self._terminal_trim(sp)
        y_sp = self._setpoint_vector(sp)
        measurement = np.array([
            self.state.n_product, self.state.i_product,
            self.state.dt_irc, self.state.f_tank,
        ])
        mv = self.controller.step(measurement, y_sp)
        sol = self.controller.last_solution
        extra = {"qp_iters": sol.iterations, "qp_converged": sol.converged}
        return self._advance(mv, setpoint=sp, extra_info=extra)

    def _terminal_trim(self, sp: float) -> float:
        """Blend the commanded setpoint toward the rate that returns the
        tank to its mid level by end of day.

        Active only after the terminal-penalty activation hour: the
        supervisory layer keeps full authority over load scheduling
        through the price peak, then the control layer steers the holdup
        back, which is the hierarchy's structural advantage on the
        terminal constraint.
        """
        t_h = self.state.t_sim / 3600.0
        if t_h <= self.penalty_cfg.t_activate:
            return sp
        t_rem = self.episode_cfg.day_seconds() - self.state.t_sim
        if t_rem <= 0:
            return sp
        closing_rate = (plant_mod.TANK_MID - self.state.n_tank) / t_rem
        lo, hi = SETPOINT_RANGE
        return float(np.clip(sp + closing_rate, lo, hi))

    def _setpoint_vector(self, sp: float) -> np.ndarray:
        """Track the production setpoint; hold impurity and the IRC
        temperature difference at their steady values; make the tank-flow
        target mass-consistent with the setpoint."""
        y_ss = self.controller.model.y_ss
        f_tank_sp = max(0.0, sp - self.episode_cfg.demand)
        return np.array([sp, y_ss[1], y_ss[2], f_tank_sp])


def make_env(arch: str, profile, controller: LmpcController | None = None,
             **kw):
    if arch == "direct":
        return DirectEnv(profile, **kw)
    if arch == "hierarchical":
        if controller is None:
            raise ValueError("hierarchical architecture needs an LMPC controller")
        return HierEnv(profile, controller, **kw)
    raise ValueError(f"unknown architecture {arch!r}")
