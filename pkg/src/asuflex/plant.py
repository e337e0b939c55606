"""Reduced-order surrogate of a single-column nitrogen air separation unit.

The plant is modeled as three first-order lags (production rate, product
impurity, reboiler/condenser temperature difference) plus a storage tank
mass balance. Product demand is always met instantaneously: excess
production is liquefied to the tank, shortfall is covered by evaporating
stored product. All dynamics are deterministic; integration is fixed-step
RK4 on the lag states with an exact per-substep tank balance.

Manipulated variables and their bounds:

    n_mac   [mol/s]  main air compressor flow,   30 .. 50
    xi_tur  [-]      turbine split fraction,      0 .. 0.1
    xi_top  [-]      top column split fraction,   0.51 .. 0.54
    f_drain [mol/s]  reboiler drain flow,         0 .. 2

The liquefier split xi_liq is never commanded; it is computed from the
demand-satisfaction logic in :func:`liq_split`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvalidOverrideError,
    NonFiniteError,
    TankEmptyError,
)

MV_BOUNDS = {
    "n_mac": (30.0, 50.0),
    "xi_tur": (0.0, 0.1),
    "xi_top": (0.51, 0.54),
    "f_drain": (0.0, 2.0),
}

MV_NAMES = ("n_mac", "xi_tur", "xi_top", "f_drain")

TANK_MID = 1_728_000.0  # mol, terminal target and default initial holdup
TANK_LO = 864_000.0
TANK_HI = 3_456_000.0


@dataclass(frozen=True)
class ManipulatedVars:
    """Plant inputs commanded by a controller, in physical units."""

    n_mac: float
    xi_tur: float
    xi_top: float
    f_drain: float

    def clamped(self) -> "ManipulatedVars":
        """Return a copy with every field projected onto its bounds."""
        vals = {}
        for name in MV_NAMES:
            lo, hi = MV_BOUNDS[name]
            vals[name] = min(max(getattr(self, name), lo), hi)
        return ManipulatedVars(**vals)

    def as_array(self) -> np.ndarray:
        return np.array([self.n_mac, self.xi_tur, self.xi_top, self.f_drain])

    @staticmethod
    def from_array(u) -> "ManipulatedVars":
        if len(u) != 4:
            raise DimensionMismatchError(f"expected 4 MVs, got {len(u)}")
        return ManipulatedVars(float(u[0]), float(u[1]), float(u[2]), float(u[3]))


@dataclass(frozen=True)
class PlantState:
    """Physical state of the surrogate plant.

    ``i_product``/``dt_irc`` mirror the internal lag states
    ``lag_purity``/``lag_irc``; ``n_product`` mirrors ``lag_prod``.
    ``f_tank`` is the liquefied flow into storage over the last substep.
    """

    i_product: float  # ppm
    dt_irc: float  # K
    n_tank: float  # mol
    f_tank: float  # mol/s
    n_product: float  # mol/s
    lag_prod: float  # mol/s
    lag_purity: float  # ppm
    lag_irc: float  # K
    t_sim: float  # s

    def check(self) -> None:
        vals = (
            self.i_product, self.dt_irc, self.n_tank, self.f_tank,
            self.n_product, self.lag_prod, self.lag_purity, self.lag_irc,
            self.t_sim,
        )
        if not all(math.isfinite(v) for v in vals):
            raise NonFiniteError(f"non-finite plant state: {self}")
        if self.n_tank < 0 or self.f_tank < 0 or self.n_product < 0 or self.i_product < 0:
            raise InvalidOverrideError(f"negative physical quantity: {self}")


@dataclass(frozen=True)
class PowerBreakdown:
    """Electrical power by unit: compressor draw, liquefier draw, turbine credit."""

    p_comp: float  # MW
    p_liq: float  # MW
    p_tur: float  # MW

    @property
    def net(self) -> float:
        """Net grid draw in MW (turbine generation is a credit)."""
        return self.p_comp + self.p_liq - self.p_tur


@dataclass(frozen=True)
class PlantConfig:
    """Calibration constants of the surrogate.

    Defaults put the nominal operating point (n_mac=40, xi_tur=0.05,
    xi_top=0.525, f_drain=1, demand 20 mol/s) at n_product = 24 mol/s,
    i_product = 600 ppm, dt_irc = 3.5 K, net power about 0.30 MW.
    """

    tau_prod: float = 1200.0  # s, production lag
    tau_purity: float = 7200.0  # s, impurity lag
    tau_irc: float = 900.0  # s, thermal lag
    yield_nom: float = 0.6  # mol product per mol feed at nominal splits
    yield_top_slope: float = 2.0  # d(yield)/d(xi_top)
    yield_tur_slope: float = -0.5  # d(yield)/d(xi_tur)
    purity_nom: float = 600.0  # ppm at nominal production
    purity_load_slope: float = 200.0  # ppm per mol/s of production
    purity_top_slope: float = -30000.0  # ppm per unit xi_top
    irc_nom: float = 3.5  # K
    irc_drain_slope: float = 1.2  # K per mol/s drain
    irc_tur_slope: float = -20.0  # K per unit xi_tur
    k_comp: float = 0.0072  # MW per mol/s of n_mac
    k_liq: float = 0.0015  # MW per mol/s liquefied
    k_tur: float = 0.004  # MW per mol/s through turbine
    substep: float = 60.0  # s, max RK4 substep
    demand: float = 20.0  # mol/s, fixed product demand

    # Reference MVs for the affine maps above.
    n_mac_nom: float = 40.0
    xi_tur_nom: float = 0.05
    xi_top_nom: float = 0.525
    f_drain_nom: float = 1.0

    def yield_frac(self, xi_top: float, xi_tur: float) -> float:
        """Feed-to-product conversion fraction; affine in the split fractions."""
        return (
            self.yield_nom
            + self.yield_top_slope * (xi_top - self.xi_top_nom)
            + self.yield_tur_slope * (xi_tur - self.xi_tur_nom)
        )

    def purity_target(self, n_product: float, xi_top: float) -> float:
        """Steady-state impurity the lag relaxes toward, clipped at zero."""
        raw = (
            self.purity_nom
            + self.purity_load_slope * (n_product - 24.0)
            + self.purity_top_slope * (xi_top - self.xi_top_nom)
        )
        return max(0.0, raw)

    def irc_target(self, f_drain: float, xi_tur: float) -> float:
        return (
            self.irc_nom
            + self.irc_drain_slope * (f_drain - self.f_drain_nom)
            + self.irc_tur_slope * (xi_tur - self.xi_tur_nom)
        )

    def nominal_mv(self) -> ManipulatedVars:
        return ManipulatedVars(
            self.n_mac_nom, self.xi_tur_nom, self.xi_top_nom, self.f_drain_nom
        )


DEFAULT_PLANT = PlantConfig()


def liq_split(n_product: float, n_demand: float) -> float:
    """Fraction of production liquefied to storage so demand is always met.

    Returns 1 - demand/production when production exceeds demand, else 0
    (the shortfall is covered by evaporation). Clamped to [0, 1].
    """
    if n_product > n_demand:
        return min(1.0, max(0.0, 1.0 - n_demand / n_product))
    return 0.0


def steady_state_outputs(cfg: PlantConfig, mv: ManipulatedVars) -> tuple[float, float, float]:
    """(n_product, i_product, dt_irc) the lags settle to under constant MVs."""
    n_prod = mv.n_mac * cfg.yield_frac(mv.xi_top, mv.xi_tur)
    i_prod = cfg.purity_target(n_prod, mv.xi_top)
    dt_irc = cfg.irc_target(mv.f_drain, mv.xi_tur)
    return n_prod, i_prod, dt_irc


def reset(seed: int = 0, init_overrides: dict | None = None,
          cfg: PlantConfig = DEFAULT_PLANT) -> PlantState:
    """Plant at the calibrated nominal steady state with a mid-level tank.

    Deterministic: the seed is accepted for interface uniformity but the
    initial state is the same for every seed. ``init_overrides`` may set
    any :class:`PlantState` field by name.
    """
    n_prod, i_prod, dt_irc = steady_state_outputs(cfg, cfg.nominal_mv())
    xi = liq_split(n_prod, cfg.demand)
    state = PlantState(
        i_product=i_prod,
        dt_irc=dt_irc,
        n_tank=TANK_MID,
        f_tank=xi * n_prod,
        n_product=n_prod,
        lag_prod=n_prod,
        lag_purity=i_prod,
        lag_irc=dt_irc,
        t_sim=0.0,
    )
    if init_overrides:
        bad = set(init_overrides) - set(state.__dataclass_fields__)
        if bad:
            raise InvalidOverrideError(f"unknown state fields: {sorted(bad)}")
        state = replace(state, **{k: float(v) for k, v in init_overrides.items()})
        # Keep mirrored lag fields consistent when only the output was set.
        if "n_product" in init_overrides and "lag_prod" not in init_overrides:
            state = replace(state, lag_prod=state.n_product)
        if "i_product" in init_overrides and "lag_purity" not in init_overrides:
            state = replace(state, lag_purity=state.i_product)
        if "dt_irc" in init_overrides and "lag_irc" not in init_overrides:
            state = replace(state, lag_irc=state.dt_irc)
        state.check()
    return state


def _lag_rates(cfg: PlantConfig, lags: np.ndarray, mv: ManipulatedVars) -> np.ndarray:
    lag_prod, lag_purity, lag_irc = lags
    prod_target = mv.n_mac * cfg.yield_frac(mv.xi_top, mv.xi_tur)
    return np.array([
        (prod_target - lag_prod) / cfg.tau_prod,
        (cfg.purity_target(lag_prod, mv.xi_top) - lag_purity) / cfg.tau_purity,
        (cfg.irc_target(mv.f_drain, mv.xi_tur) - lag_irc) / cfg.tau_irc,
    ])


def step(state: PlantState, mv: ManipulatedVars, n_demand: float | None = None,
         dt: float = 900.0, cfg: PlantConfig = DEFAULT_PLANT) -> PlantState:
    """Advance the plant by ``dt`` seconds under constant MVs.

    The interval is split into integer substeps of at most ``cfg.substep``
    seconds. Per substep the liquefier split is held at its start-of-substep
    value, making the tank balance exact:
    n_tank += (f_tank - evaporation) * substep.

    Raises :class:`TankEmptyError` when evaporation is demanded but the
    tank cannot cover it, and :class:`NonFiniteError` if any state
    diverges.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    demand = cfg.demand if n_demand is None else float(n_demand)
    n_sub = max(1, math.ceil(dt / cfg.substep))
    h = dt / n_sub

    lags = np.array([state.lag_prod, state.lag_purity, state.lag_irc])
    n_tank = state.n_tank
    f_tank = state.f_tank
    for _ in range(n_sub):
        n_product = lags[0]
        xi = liq_split(n_product, demand)
        f_tank = xi * n_product
        evap = max(0.0, demand - (1.0 - xi) * n_product)
        new_tank = n_tank + (f_tank - evap) * h
        if evap > 0.0 and new_tank < 0.0:
            raise TankEmptyError(
                f"storage exhausted at t={state.t_sim:.0f}s: "
                f"holdup {n_tank:.1f} mol cannot cover evaporation {evap:.3f} mol/s"
            )
        n_tank = new_tank

        k1 = _lag_rates(cfg, lags, mv)
        k2 = _lag_rates(cfg, lags + 0.5 * h * k1, mv)
        k3 = _lag_rates(cfg, lags + 0.5 * h * k2, mv)
        k4 = _lag_rates(cfg, lags + h * k3, mv)
        lags = lags + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    new_state = PlantState(
        i_product=float(lags[1]),
        dt_irc=float(lags[2]),
        n_tank=float(n_tank),
        f_tank=float(f_tank),
        n_product=float(lags[0]),
        lag_prod=float(lags[0]),
        lag_purity=float(lags[1]),
        lag_irc=float(lags[2]),
        t_sim=state.t_sim + dt,
    )
    if not all(math.isfinite(v) for v in (lags[0], lags[1], lags[2], n_tank)):
        raise NonFiniteError(f"plant state diverged at t={new_state.t_sim:.0f}s")
    return new_state


def power(state: PlantState, mv: ManipulatedVars,
          cfg: PlantConfig = DEFAULT_PLANT) -> PowerBreakdown:
    """Electrical power by unit; all terms linear through the origin."""
    xi = liq_split(state.n_product, cfg.demand)
    return PowerBreakdown(
        p_comp=cfg.k_comp * mv.n_mac,
        p_liq=cfg.k_liq * xi * state.n_product,
        p_tur=cfg.k_tur * mv.xi_tur * mv.n_mac,
    )


# ---------------------------------------------------------------------------
# Operational constraints


@dataclass(frozen=True)
class ConstraintEntry:
    name: str
    kind: str  # "path" | "terminal"
    lower: float
    upper: float
    scale: float


@dataclass(frozen=True)
class ConstraintSpec:
    """The five operational constraint rows: bounds on impurity, IRC
    temperature difference, tank holdup, tank inflow, plus the terminal
    holdup equality."""

    entries: tuple[ConstraintEntry, ...] = field(default_factory=lambda: (
        ConstraintEntry("i_product", "path", 0.0, 1500.0, 1500.0),
        ConstraintEntry("dt_irc", "path", 2.0, 5.0, 3.0),
        ConstraintEntry("n_tank", "path", TANK_LO, TANK_HI, TANK_HI - TANK_LO),
        ConstraintEntry("f_tank", "path", 0.0, math.inf, 10.0),
        ConstraintEntry("n_tank_terminal", "terminal", TANK_MID, TANK_MID, TANK_MID),
    ))

    # Order of the flattened path-violation vector returned by
    # constraint_values(): lower/upper pairs per two-sided row.
    PATH_LABELS = (
        "i_product_lo", "i_product_hi",
        "dt_irc_lo", "dt_irc_hi",
        "n_tank_lo", "n_tank_hi",
        "f_tank_lo",
    )


DEFAULT_CONSTRAINTS = ConstraintSpec()


def constraint_values(state: PlantState,
                      spec: ConstraintSpec = DEFAULT_CONSTRAINTS) -> np.ndarray:
    """Normalized signed path-constraint values g(x), canonical form g <= 0.

    Order per :attr:`ConstraintSpec.PATH_LABELS`: for each two-sided row the
    lower-bound entry (lo - v)/scale precedes the upper (v - hi)/scale.
    Positive entries are violations.
    """
    vals = {"i_product": state.i_product, "dt_irc": state.dt_irc,
            "n_tank": state.n_tank, "f_tank": state.f_tank}
    g = []
    for e in spec.entries:
        if e.kind != "path":
            continue
        v = vals[e.name]
        g.append((e.lower - v) / e.scale)
        if math.isfinite(e.upper):
            g.append((v - e.upper) / e.scale)
    return np.array(g)


def terminal_deviation(state: PlantState,
                       spec: ConstraintSpec = DEFAULT_CONSTRAINTS) -> float:
    """Normalized deviation of tank holdup from the terminal target."""
    e = next(x for x in spec.entries if x.kind == "terminal")
    return (state.n_tank - e.lower) / e.scale


# ---------------------------------------------------------------------------
# Observation vector

OBS_DIM = 17

# Fixed normalization constants; chosen so every entry is O(1).
OBS_NORM = {
    "i_product": 1500.0,
    "dt_irc": 5.0,
    "n_tank": TANK_HI,
    "f_tank": 10.0,
    "price": 100.0,
    "t_day": 24.0,
}


def observe(state: PlantState, price_forecast, t_day: float) -> np.ndarray:
    """The 17-dimensional RL observation.

    Layout: [i_product, dt_irc, n_tank, f_tank, 12 hourly price forecasts,
    time of day], each scaled by the fixed constants in ``OBS_NORM``.
    """
    prices = np.asarray(price_forecast, dtype=float)
    if prices.shape != (12,):
        raise DimensionMismatchError(
            f"price forecast must have 12 entries, got shape {prices.shape}"
        )
    if not 0.0 <= t_day <= 24.0:
        raise ValueError(f"t_day outside [0, 24]: {t_day}")
    obs = np.empty(OBS_DIM)
    obs[0] = state.i_product / OBS_NORM["i_product"]
    obs[1] = state.dt_irc / OBS_NORM["dt_irc"]
    obs[2] = state.n_tank / OBS_NORM["n_tank"]
    obs[3] = state.f_tank / OBS_NORM["f_tank"]
    obs[4:16] = prices / OBS_NORM["price"]
    obs[16] = t_day / OBS_NORM["t_day"]
    return obs
