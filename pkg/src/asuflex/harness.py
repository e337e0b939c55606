"""Training and evaluation orchestration, metrics, and artifact I/O.

Per-seed training artifacts live under ``<out_dir>/<arch>_seed<seed>/``:

    learning_curve.csv   step,episode,return,cost,violations,terminal_dev
    eval_curve.csv       step,eval_return
    best_checkpoint.json best-evaluation policy within the step budget
    summary.json         best step/return and run metadata

Floats are written with ``repr`` so identical runs produce byte-identical
files.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import plant as plant_mod
from . import pricing, sysid
from .config import SEED_PURPOSE, RunConfig, config_to_dict
from .ddpg import DdpgAgent
from .envs import TRAJECTORY_COLUMNS, HierEnv, make_env
from .errors import ConfigError
from .lmpc import LmpcController
from .plant import ManipulatedVars


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def _purpose_seed(root: int, purpose: str, *extra: int) -> int:
    key = (SEED_PURPOSE[purpose], *extra)
    return int(np.random.SeedSequence(root, spawn_key=key).generate_state(1)[0])


def train_profile(cfg: RunConfig, root_seed: int, episode: int) -> pricing.PriceProfile:
    if cfg.profile_path:
        return pricing.load_profile(cfg.profile_path)
    seed = _purpose_seed(root_seed, "train_prices", episode)
    p = cfg.pricing
    return pricing.synth_profile(seed, p.base, p.peak_amp, p.noise_frac)


def eval_profile(cfg: RunConfig) -> pricing.PriceProfile:
    """Fixed held-out profile used for best-checkpoint selection and
    evaluation; its seed never appears in training."""
    p = cfg.pricing
    return pricing.synth_profile(p.eval_seed, p.base, p.peak_amp, p.noise_frac)


def build_env(cfg: RunConfig, profile: pricing.PriceProfile,
              model: sysid.LinearModel | None = None):
    controller = None
    if cfg.arch == "hierarchical":
        if model is None:
            raise ConfigError("hierarchical architecture requires a linear model")
        controller = LmpcController(model, cfg.mpc)
    return make_env(cfg.arch, profile, controller=controller,
                    episode_cfg=cfg.episode, plant_cfg=cfg.plant,
                    penalty_cfg=cfg.penalty)


@dataclass
class MetricsRecord:
    step: int
    episode: int
    episode_return: float
    elec_cost: float
    path_violations: dict  # label -> count of violating steps
    violation_magnitude: float  # summed positive normalized g over the episode
    terminal_deviation: float
    qp_iters_mean: float | None = None
    fault: bool = False


@dataclass
class TrainResult:
    seed: int
    records: list = field(default_factory=list)
    eval_rows: list = field(default_factory=list)  # (step, eval_return)
    best_step: int = 0
    best_return: float = -np.inf
    out_dir: str = ""


def rollout(agent: DdpgAgent, env, collect_trajectory: bool = False):
    """One deterministic episode (exploration off). Returns aggregate
    metrics and, optionally, per-step trajectory rows."""
    obs = env.reset()
    total = 0.0
    elec = 0.0
    counts = {lab: 0 for lab in plant_mod.ConstraintSpec.PATH_LABELS}
    magnitude = 0.0
    qp_iters = []
    rows = []
    step_idx = 0
    done = False
    info = {}
    while not done:
        t_h = env.state.t_sim / 3600.0
        action = agent.act(obs)
        obs, r, done, info = env.step(action)
        total += r
        elec += info["elec_reward"]
        for lab, g in zip(plant_mod.ConstraintSpec.PATH_LABELS, info["g_vec"]):
            if g > 0:
                counts[lab] += 1
                magnitude += float(g)
        if "qp_iters" in info:
            qp_iters.append(info["qp_iters"])
        if collect_trajectory:
            mv = info["mv"]
            pw = info["power"]
            st = env.state
            rows.append({
                "step": step_idx, "t_h": t_h, "price": info["price"],
                "setpoint": info["setpoint"],
                "n_mac": mv.n_mac, "xi_tur": mv.xi_tur, "xi_top": mv.xi_top,
                "f_drain": mv.f_drain, "xi_liq": info["xi_liq"],
                "n_product": st.n_product, "i_product": st.i_product,
                "dt_irc": st.dt_irc, "n_tank": st.n_tank, "f_tank": st.f_tank,
                "p_comp": pw.p_comp, "p_liq": pw.p_liq, "p_tur": pw.p_tur,
                "reward": r,
            })
        step_idx += 1
    summary = {
        "return": total,
        "elec_cost": -elec,
        "path_violation_counts": counts,
        "violation_magnitude": magnitude,
        "terminal_deviation": plant_mod.terminal_deviation(env.state),
        "qp_iters_mean": float(np.mean(qp_iters)) if qp_iters else None,
        "fault": bool(info.get("fault", False)),
    }
    return summary, rows


def train_single(cfg: RunConfig, root_seed: int,
                 model: sysid.LinearModel | None = None,
                 out_dir: str | None = None) -> TrainResult:
    """Train one seed to the step budget; deterministic in (cfg, seed)."""
    base = out_dir if out_dir is not None else cfg.resolved_out_dir()
    run_dir = os.path.join(base, f"{cfg.arch}_seed{root_seed}")
    os.makedirs(run_dir, exist_ok=True)

    env = build_env(cfg, train_profile(cfg, root_seed, 0), model=model)
    held_out = eval_profile(cfg)
    eval_env = build_env(cfg, held_out, model=model)
    agent = DdpgAgent(env.obs_dim, env.act_dim, hyper=cfg.ddpg,
                      seed=_purpose_seed(root_seed, "agent"),
                      total_steps=cfg.total_steps)

    result = TrainResult(seed=root_seed, out_dir=run_dir)
    step = 0
    episode = 0
    next_eval = cfg.eval_every

    def run_eval(at_step: int):
        nonlocal result
        summary, _ = rollout(agent, eval_env)
        result.eval_rows.append((at_step, summary["return"]))
        if summary["return"] > result.best_return:
            result.best_return = summary["return"]
            result.best_step = at_step
            agent.save(os.path.join(run_dir, "best_checkpoint.json"))

    while step < cfg.total_steps:
        env.set_profile(train_profile(cfg, root_seed, episode))
        obs = env.reset(seed=_purpose_seed(root_seed, "plant"))
        ep_return = 0.0
        ep_elec = 0.0
        counts = {lab: 0 for lab in plant_mod.ConstraintSpec.PATH_LABELS}
        magnitude = 0.0
        qp_iters = []
        fault = False
        done = False
        while not done and step < cfg.total_steps:
            action = agent.explore(obs)
            next_obs, r, done, info = env.step(action)
            agent.observe_transition(obs, action, r, next_obs, done)
            agent.maybe_update()
            obs = next_obs
            step += 1
            ep_return += r
            ep_elec += info["elec_reward"]
            for lab, g in zip(plant_mod.ConstraintSpec.PATH_LABELS, info["g_vec"]):
                if g > 0:
                    counts[lab] += 1
                    magnitude += float(g)
            if "qp_iters" in info:
                qp_iters.append(info["qp_iters"])
            fault = fault or info["fault"]
        result.records.append(MetricsRecord(
            step=step, episode=episode, episode_return=ep_return,
            elec_cost=-ep_elec, path_violations=counts,
            violation_magnitude=magnitude,
            terminal_deviation=plant_mod.terminal_deviation(env.state),
            qp_iters_mean=float(np.mean(qp_iters)) if qp_iters else None,
            fault=fault,
        ))
        episode += 1
        if step >= next_eval or step >= cfg.total_steps:
            run_eval(step)
            next_eval = (step // cfg.eval_every + 1) * cfg.eval_every

    _write_learning_curve(result, os.path.join(run_dir, "learning_curve.csv"))
    _write_eval_curve(result, os.path.join(run_dir, "eval_curve.csv"))
    with open(os.path.join(run_dir, "summary.json"), "w") as fh:
        json.dump({
            "arch": cfg.arch, "seed": root_seed,
            "total_steps": cfg.total_steps,
            "best_step": result.best_step,
            "best_eval_return": result.best_return,
            "episodes": len(result.records),
            "config": config_to_dict(cfg),
        }, fh, indent=1)
        fh.write("\n")
    return result


def _write_learning_curve(result: TrainResult, path: str) -> None:
    with open(path, "w", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "episode", "return", "cost", "violations",
                    "terminal_dev"])
        for rec in result.records:
            w.writerow([rec.step, rec.episode, _fmt(rec.episode_return),
                        _fmt(rec.elec_cost),
                        sum(rec.path_violations.values()),
                        _fmt(rec.terminal_deviation)])


def _write_eval_curve(result: TrainResult, path: str) -> None:
    with open(path, "w", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "eval_return"])
        for step, ret in result.eval_rows:
            w.writerow([step, _fmt(ret)])


def steps_to_fraction(steps, returns, frac: float = 0.95) -> int | None:
    """First step at which the evaluation return reaches ``frac`` of the
    way from the initial policy's return to the best value.

    The first evaluation is the baseline: it measures the untrained (or
    barely trained) policy, so the threshold captures learning progress
    rather than recovery from transient mid-training dips. None when the
    curve is flat or never improves."""
    steps = list(steps)
    returns = list(returns)
    if not returns:
        return None
    lo, hi = returns[0], max(returns)
    if hi <= lo:
        return steps[0]
    threshold = lo + frac * (hi - lo)
    for s, r in zip(steps, returns):
        if r >= threshold:
            return s
    return None


# ---------------------------------------------------------------------------
# Evaluation of a trained checkpoint


def hourly_price_power_correlation(rows) -> float:
    """Pearson correlation between hourly price and hourly mean net power
    over one evaluation day."""
    prices = {}
    powers = {}
    for row in rows:
        hour = int(row["t_h"])
        prices.setdefault(hour, row["price"])
        powers.setdefault(hour, []).append(
            row["p_comp"] + row["p_liq"] - row["p_tur"])
    hours = sorted(powers)
    p = np.array([prices[h] for h in hours])
    w = np.array([np.mean(powers[h]) for h in hours])
    if p.std() == 0 or w.std() == 0:
        return 0.0
    return float(np.corrcoef(p, w)[0, 1])


def evaluate(checkpoint_path: str, cfg: RunConfig, n_episodes: int = 1,
             model: sysid.LinearModel | None = None,
             out_dir: str | None = None, figures: bool = True) -> dict:
    """Deterministic rollouts of a saved policy on the held-out profile.

    Writes one trajectory CSV per episode plus ``eval_report.json`` and,
    when ``figures`` is set, rendered PNGs, into ``out_dir``.
    """
    agent = DdpgAgent.load(checkpoint_path)
    env = build_env(cfg, eval_profile(cfg), model=model)
    episodes = []
    all_rows = []
    for ep in range(n_episodes):
        summary, rows = rollout(agent, env, collect_trajectory=True)
        summary["price_power_correlation"] = hourly_price_power_correlation(rows)
        episodes.append(summary)
        all_rows.append(rows)
        if out_dir:
            write_trajectory(rows, os.path.join(out_dir, f"trajectory_ep{ep}.csv"))
    report = {
        "checkpoint": os.path.basename(checkpoint_path),
        "arch": cfg.arch,
        "n_episodes": n_episodes,
        "episodes": episodes,
        "mean_return": float(np.mean([e["return"] for e in episodes])),
        "mean_elec_cost": float(np.mean([e["elec_cost"] for e in episodes])),
        "mean_violation_magnitude": float(
            np.mean([e["violation_magnitude"] for e in episodes])),
        "mean_terminal_deviation_abs": float(
            np.mean([abs(e["terminal_deviation"]) for e in episodes])),
        "price_power_correlation": float(
            np.mean([e["price_power_correlation"] for e in episodes])),
    }
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "eval_report.json"), "w") as fh:
            json.dump(report, fh, indent=1)
            fh.write("\n")
        if figures and all_rows:
            from . import figures as figs
            figs.trajectory_figure(all_rows[0],
                                   os.path.join(out_dir, "trajectory.png"))
    return report


def write_trajectory(rows, path: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in TRAJECTORY_COLUMNS])


def read_curve(path: str) -> dict:
    """Read a CSV written by this module into {column: list} with floats
    where possible."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = {name: [] for name in reader.fieldnames}
        for row in reader:
            for name, val in row.items():
                try:
                    cols[name].append(float(val))
                except (TypeError, ValueError):
                    cols[name].append(val)
    return cols


def export_curves(run_dirs, out_csv: str) -> None:
    """Merge per-seed learning curves into one CSV with a seed column."""
    with open(out_csv, "w", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "step", "episode", "return", "cost", "violations",
                    "terminal_dev"])
        for run_dir in run_dirs:
            with open(os.path.join(run_dir, "summary.json")) as sfh:
                seed = json.load(sfh)["seed"]
            curve = read_curve(os.path.join(run_dir, "learning_curve.csv"))
            for i in range(len(curve["step"])):
                w.writerow([seed, int(curve["step"][i]), int(curve["episode"][i]),
                            _fmt(curve["return"][i]), _fmt(curve["cost"][i]),
                            int(curve["violations"][i]),
                            _fmt(curve["terminal_dev"][i])])


# ---------------------------------------------------------------------------
# Open-loop replay


def simulate_script(script_path: str, cfg: RunConfig, out_csv: str) -> None:
    """Replay an MV script (CSV: step,n_mac,xi_tur,xi_top,f_drain) open
    loop on the surrogate and write the resulting trajectory."""
    with open(script_path, newline="") as fh:
        reader = csv.DictReader(fh)
        mvs = [ManipulatedVars(float(r["n_mac"]), float(r["xi_tur"]),
                               float(r["xi_top"]), float(r["f_drain"])).clamped()
               for r in reader]
    profile = eval_profile(cfg)
    state = plant_mod.reset(cfg=cfg.plant)
    rows = []
    for k, mv in enumerate(mvs):
        t_h = state.t_sim / 3600.0
        price = profile.price_at(state.t_sim)
        state = plant_mod.step(state, mv, n_demand=cfg.plant.demand,
                               dt=cfg.episode.dt, cfg=cfg.plant)
        pw = plant_mod.power(state, mv, cfg=cfg.plant)
        rows.append({
            "step": k, "t_h": t_h, "price": price, "setpoint": None,
            "n_mac": mv.n_mac, "xi_tur": mv.xi_tur, "xi_top": mv.xi_top,
            "f_drain": mv.f_drain,
            "xi_liq": plant_mod.liq_split(state.n_product, cfg.plant.demand),
            "n_product": state.n_product, "i_product": state.i_product,
            "dt_irc": state.dt_irc, "n_tank": state.n_tank,
            "f_tank": state.f_tank, "p_comp": pw.p_comp, "p_liq": pw.p_liq,
            "p_tur": pw.p_tur, "reward": 0.0,
        })
    write_trajectory(rows, out_csv)
