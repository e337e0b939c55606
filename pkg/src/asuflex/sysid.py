"""Step-response identification of the discrete linear model used by the LMPC.

One step experiment per manipulated variable excites the plant from its
nominal steady state; each input-output channel is then fitted as a low
order ARX model by least squares on the deviation data, and the channels
are assembled into a block-diagonal state-space realization.

Outputs are ordered (n_product, i_product, dt_irc, f_tank); inputs follow
:data:`asuflex.plant.MV_NAMES`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import plant
from .errors import (
    CorruptFileError,
    DimensionMismatchError,
    MVIndexError,
    RankDeficientError,
    SchemaMismatchError,
    UnstableModelError,
)
from .plant import MV_BOUNDS, MV_NAMES, ManipulatedVars, PlantConfig

OUTPUT_NAMES = ("n_product", "i_product", "dt_irc", "f_tank")
MODEL_SCHEMA_VERSION = 1
ZERO_CHANNEL_TOL = 1e-9


@dataclass(frozen=True)
class StepResponseRecord:
    """Deviation trajectories from one step experiment on a single MV."""

    mv_index: int
    u_dev: float  # step size, physical units
    y_dev: np.ndarray  # (T, 4) output deviations at each sample
    dt: float
    u_ss: np.ndarray  # (4,) nominal inputs
    y_ss: np.ndarray  # (4,) nominal outputs
    seed: int = 0


@dataclass
class LinearModel:
    """Discrete state-space model in deviation coordinates.

    x+ = a x + b u_dev, y_dev = c x, with operating points recorded so
    the controller can map to and from absolute units.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    x_ss: np.ndarray
    u_ss: np.ndarray
    y_ss: np.ndarray
    dt: float
    provenance_seeds: list = field(default_factory=list)

    @property
    def nx(self) -> int:
        return self.a.shape[0]

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.a)))) if self.nx else 0.0

    def simulate(self, u_dev: np.ndarray, x0: np.ndarray | None = None) -> np.ndarray:
        """Output deviations for an input deviation sequence (T, m)."""
        u_dev = np.atleast_2d(u_dev)
        x = np.zeros(self.nx) if x0 is None else np.asarray(x0, dtype=float)
        ys = np.empty((len(u_dev), self.c.shape[0]))
        for k, u in enumerate(u_dev):
            x = self.a @ x + self.b @ u
            ys[k] = self.c @ x
        return ys


def _measured_outputs(state: plant.PlantState) -> np.ndarray:
    return np.array([state.n_product, state.i_product, state.dt_irc, state.f_tank])


def step_experiment(mv_index: int, amplitude: float, duration: float,
                    seed: int = 0, cfg: PlantConfig = plant.DEFAULT_PLANT,
                    dt: float = 900.0) -> StepResponseRecord:
    """Apply a step of ``amplitude`` times the MV range and record the response.

    The plant starts at its nominal steady state; outputs are sampled
    every ``dt`` seconds as deviations from steady state.
    """
    if not 0 <= mv_index < len(MV_NAMES):
        raise MVIndexError(f"mv_index must be 0..3, got {mv_index}")
    if not 0.0 < amplitude <= 0.5:
        raise ValueError(f"amplitude must be in (0, 0.5]: {amplitude}")
    name = MV_NAMES[mv_index]
    lo, hi = MV_BOUNDS[name]
    u_dev = amplitude * (hi - lo)
    mv_nom = cfg.nominal_mv()
    if getattr(mv_nom, name) + u_dev > hi:
        u_dev = -u_dev  # step downward when upward leaves the box

    state = plant.reset(seed, cfg=cfg)
    y_ss = _measured_outputs(state)
    mv = ManipulatedVars(**{**{n: getattr(mv_nom, n) for n in MV_NAMES},
                            name: getattr(mv_nom, name) + u_dev})
    n_samples = max(2, int(round(duration / dt)))
    y = np.empty((n_samples, 4))
    for k in range(n_samples):
        state = plant.step(state, mv, dt=dt, cfg=cfg)
        y[k] = _measured_outputs(state) - y_ss
    return StepResponseRecord(
        mv_index=mv_index, u_dev=u_dev, y_dev=y, dt=dt,
        u_ss=mv_nom.as_array(), y_ss=y_ss, seed=seed,
    )


def _fit_channel(y: np.ndarray, u: float, order: int) -> tuple[np.ndarray, float]:
    """Fit y_{k+1} = a1 y_k (+ a2 y_{k-1}) + b u by least squares.

    Returns (poles polynomial coefficients [a1, (a2)], b). The input is a
    constant step, so a single input coefficient is identifiable.
    """
    y0 = np.concatenate(([0.0], y))  # response starts from zero deviation
    if order == 1:
        phi = np.column_stack([y0[:-1], np.full(len(y), u)])
        target = y0[1:]
    else:
        ym1 = np.concatenate(([0.0], y0[:-1]))
        phi = np.column_stack([y0[1:-1], ym1[1:-1], np.full(len(y) - 1, u)])
        target = y0[2:]
    if np.linalg.matrix_rank(phi, tol=1e-10) < phi.shape[1]:
        raise RankDeficientError("step-response regression is singular")
    theta, *_ = np.linalg.lstsq(phi, target, rcond=None)
    return theta[:-1], float(theta[-1])


def fit_linear_model(records: list[StepResponseRecord],
                     order_per_channel: int = 2) -> LinearModel:
    """Assemble a block-diagonal state-space model from step records.

    Channels whose response never leaves zero get a zero-gain single-state
    block. Raises :class:`UnstableModelError` if any fitted pole has
    magnitude >= 1.
    """
    if order_per_channel not in (1, 2):
        raise ValueError("order_per_channel must be 1 or 2")
    by_input: dict[int, StepResponseRecord] = {}
    for rec in records:
        by_input.setdefault(rec.mv_index, rec)
    missing = set(range(4)) - set(by_input)
    if missing:
        raise DimensionMismatchError(f"missing step records for MVs {sorted(missing)}")

    blocks_a, blocks_b, c_cols = [], [], []
    n_out = 4
    for j in range(4):
        rec = by_input[j]
        for i in range(n_out):
            y = rec.y_dev[:, i]
            if np.max(np.abs(y)) < ZERO_CHANNEL_TOL * max(1.0, abs(rec.y_ss[i])):
                blocks_a.append(np.zeros((1, 1)))
                blocks_b.append((j, np.zeros(1)))
                c_cols.append((i, np.array([1.0])))
                continue
            try:
                a_coef, b_coef = _fit_channel(y, rec.u_dev, order_per_channel)
            except RankDeficientError:
                if order_per_channel == 1:
                    raise
                # An exactly first-order channel makes the order-2
                # regressors collinear; drop to order 1 for this channel.
                a_coef, b_coef = _fit_channel(y, rec.u_dev, 1)
            if order_per_channel == 1 or len(a_coef) == 1:
                poles = np.abs(a_coef)
                a_blk = np.array([[a_coef[0]]])
                b_blk = np.array([b_coef])
                c_blk = np.array([1.0])
            else:
                a_blk = np.array([[a_coef[0], a_coef[1]], [1.0, 0.0]])
                poles = np.abs(np.linalg.eigvals(a_blk))
                b_blk = np.array([b_coef, 0.0])
                c_blk = np.array([1.0, 0.0])
            if np.any(poles >= 1.0):
                raise UnstableModelError(
                    f"channel u{j}->y{i} fitted pole magnitude {poles.max():.4f} >= 1"
                )
            blocks_a.append(a_blk)
            blocks_b.append((j, b_blk))
            c_cols.append((i, c_blk))

    nx = sum(blk.shape[0] for blk in blocks_a)
    a = np.zeros((nx, nx))
    b = np.zeros((nx, 4))
    c = np.zeros((n_out, nx))
    pos = 0
    for blk_a, (j, blk_b), (i, blk_c) in zip(blocks_a, blocks_b, c_cols):
        n = blk_a.shape[0]
        a[pos:pos + n, pos:pos + n] = blk_a
        b[pos:pos + n, j] = blk_b
        c[i, pos:pos + n] = blk_c
        pos += n

    rec0 = records[0]
    return LinearModel(
        a=a, b=b, c=c,
        x_ss=np.zeros(nx), u_ss=rec0.u_ss.copy(), y_ss=rec0.y_ss.copy(),
        dt=rec0.dt,
        provenance_seeds=sorted({r.seed for r in records}),
    )


def run_identification(cfg: PlantConfig = plant.DEFAULT_PLANT,
                       amplitude: float = 0.1, duration: float = 43200.0,
                       order_per_channel: int = 2, seed: int = 0) -> LinearModel:
    """Full pipeline: one step experiment per MV, then the channel fits."""
    records = [step_experiment(j, amplitude, duration, seed=seed, cfg=cfg)
               for j in range(4)]
    return fit_linear_model(records, order_per_channel)


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class FitReport:
    nrmse: dict
    passed: bool
    threshold: float


def multistep_probe(n_steps: int = 48, amplitude: float = 0.1,
                    cfg: PlantConfig = plant.DEFAULT_PLANT) -> np.ndarray:
    """Square-wave deviations on all MVs with staggered switching periods.

    Returns (n_steps, 4) physical input deviations of ``amplitude`` times
    each MV range, kept inside the MV box.
    """
    periods = (8, 12, 16, 10)
    dev = np.zeros((n_steps, 4))
    mv_nom = cfg.nominal_mv()
    for j, name in enumerate(MV_NAMES):
        lo, hi = MV_BOUNDS[name]
        amp = amplitude * (hi - lo)
        nom = getattr(mv_nom, name)
        for k in range(n_steps):
            s = amp if (k // periods[j]) % 2 == 0 else -amp
            dev[k, j] = min(max(s, lo - nom), hi - nom)
    return dev


def validate_model(model: LinearModel, probe: np.ndarray,
                   cfg: PlantConfig = plant.DEFAULT_PLANT,
                   threshold: float = 0.35) -> FitReport:
    """Compare model and plant responses to a probe input sequence.

    NRMSE per output is rms(error) / rms(plant deviation), defined as 0
    when the plant never deviates. The report fails when the n_product
    NRMSE exceeds ``threshold``.
    """
    state = plant.reset(cfg=cfg)
    y_ss = _measured_outputs(state)
    y_plant = np.empty((len(probe), 4))
    mv_nom = cfg.nominal_mv().as_array()
    for k, dev in enumerate(probe):
        mv = ManipulatedVars.from_array(mv_nom + dev).clamped()
        state = plant.step(state, mv, dt=model.dt, cfg=cfg)
        y_plant[k] = _measured_outputs(state) - y_ss
    y_model = model.simulate(probe)

    nrmse = {}
    for i, name in enumerate(OUTPUT_NAMES):
        denom = float(np.sqrt(np.mean(y_plant[:, i] ** 2)))
        if denom == 0.0:
            nrmse[name] = 0.0
        else:
            nrmse[name] = float(np.sqrt(np.mean((y_model[:, i] - y_plant[:, i]) ** 2)) / denom)
    return FitReport(nrmse=nrmse, passed=nrmse["n_product"] <= threshold,
                     threshold=threshold)


# ---------------------------------------------------------------------------
# Serialization


def save_model(model: LinearModel, path) -> None:
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "nx": model.nx,
        "nu": model.b.shape[1],
        "ny": model.c.shape[0],
        "dt": model.dt,
        "a": model.a.flatten().tolist(),
        "b": model.b.flatten().tolist(),
        "c": model.c.flatten().tolist(),
        "x_ss": model.x_ss.tolist(),
        "u_ss": model.u_ss.tolist(),
        "y_ss": model.y_ss.tolist(),
        "provenance_seeds": list(model.provenance_seeds),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path) -> LinearModel:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptFileError(f"{path}: {exc}") from exc
    if doc.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise SchemaMismatchError(
            f"{path}: schema_version {doc.get('schema_version')!r}, "
            f"expected {MODEL_SCHEMA_VERSION}"
        )
    nx, nu, ny = doc["nx"], doc["nu"], doc["ny"]
    return LinearModel(
        a=np.array(doc["a"]).reshape(nx, nx),
        b=np.array(doc["b"]).reshape(nx, nu),
        c=np.array(doc["c"]).reshape(ny, nx),
        x_ss=np.array(doc["x_ss"]),
        u_ss=np.array(doc["u_ss"]),
        y_ss=np.array(doc["y_ss"]),
        dt=float(doc["dt"]),
        provenance_seeds=list(doc["provenance_seeds"]),
    )
