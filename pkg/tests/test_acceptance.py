"""Acceptance gate: ten end-to-end criteria covering solver correctness,
gradient correctness, conservation, offset-free control, the two-architecture
training experiment, determinism, and the identification quality gate.

Each test records exactly one PASS/FAIL line, printed in the terminal
summary by conftest.py.
"""

import filecmp
import os
import time

import numpy as np
import pytest

from asuflex import harness, plant, rewards, sysid
from asuflex.config import RunConfig
from asuflex.ddpg import Mlp
from asuflex.lmpc import LmpcController, MpcConfig
from asuflex.plant import ManipulatedVars, MV_BOUNDS, MV_NAMES
from asuflex.qp import solve_qp
from asuflex.sysid import LinearModel

from conftest import record_criterion
from test_ddpg import fd_check
from test_qp import kkt_enumerate, random_spd_qp

SEEDS = (0, 1, 2, 3, 4)


def _verdict(num: int, ok: bool, detail: str) -> None:
    record_criterion(num, ok, detail)
    assert ok, f"criterion {num}: {detail}"


# ---------------------------------------------------------------------------
# 1. QP solver vs. brute-force KKT oracle


def test_criterion_01_qp_oracle_equivalence():
    rng = np.random.default_rng(20260826)
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(200):
        n = int(rng.integers(2, 9))
        qp = random_spd_qp(rng, n)
        x_ref = kkt_enumerate(qp)
        sol = solve_qp(qp, tol=1e-10, max_iter=20000)
        worst = max(worst, float(np.max(np.abs(sol.x - x_ref))))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-6 and elapsed < 10.0
    _verdict(1, ok, f"200 SPD box QPs dims 2-8, max |x - x_kkt| = "
                    f"{worst:.2e} (< 1e-6), {elapsed:.1f} s (< 10 s)")


# ---------------------------------------------------------------------------
# 2. Backprop vs. central finite differences


def test_criterion_02_gradient_correctness():
    rng = np.random.default_rng(42)
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(50):
        out_tanh = bool(k % 2)  # alternate actor-style and critic-style heads
        n_in = int(rng.integers(2, 6))
        n_hid = int(rng.integers(3, 9))
        n_out = int(rng.integers(1, 4))
        net = Mlp((n_in, n_hid, n_out), out_tanh=out_tanh, rng=rng)
        x = rng.normal(size=(3, n_in))
        worst = max(worst, fd_check(net, x, rng, eps=1e-5))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-4 and elapsed < 5.0
    _verdict(2, ok, f"50 random nets, max FD relative error = {worst:.2e} "
                    f"(< 1e-4), {elapsed:.1f} s (< 5 s)")


# ---------------------------------------------------------------------------
# 3. Plant conservation over random one-day MV scripts


def test_criterion_03_plant_conservation():
    import math

    cfg = plant.DEFAULT_PLANT
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    worst_rel = 0.0
    worst_delivery = 0.0
    for _ in range(100):
        state = plant.reset(0)
        flux_sum = 0.0
        abs_flux = 0.0
        for _step in range(96):
            mv = ManipulatedVars(*(rng.uniform(*MV_BOUNDS[n]) for n in MV_NAMES))
            # Replicate the substep fluxes independently of step().
            lags = np.array([state.lag_prod, state.lag_purity, state.lag_irc])
            n_sub = math.ceil(900.0 / cfg.substep)
            h = 900.0 / n_sub
            for _ in range(n_sub):
                xi = plant.liq_split(lags[0], cfg.demand)
                evap = max(0.0, cfg.demand - (1 - xi) * lags[0])
                delivered = (1 - xi) * lags[0] + evap
                worst_delivery = max(worst_delivery,
                                     abs(delivered - cfg.demand))
                flux_sum += (xi * lags[0] - evap) * h
                abs_flux += abs(xi * lags[0] - evap) * h
                k1 = plant._lag_rates(cfg, lags, mv)
                k2 = plant._lag_rates(cfg, lags + 0.5 * h * k1, mv)
                k3 = plant._lag_rates(cfg, lags + 0.5 * h * k2, mv)
                k4 = plant._lag_rates(cfg, lags + h * k3, mv)
                lags = lags + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            state = plant.step(state, mv)
        closure = abs((state.n_tank - plant.TANK_MID) - flux_sum)
        worst_rel = max(worst_rel, closure / max(abs_flux, 1.0))
    elapsed = time.perf_counter() - t0
    ok = worst_rel < 1e-9 and worst_delivery < 1e-9 and elapsed < 30.0
    _verdict(3, ok, f"100 random one-day MV scripts, worst relative tank "
                    f"closure = {worst_rel:.2e} (< 1e-9), worst delivery "
                    f"error = {worst_delivery:.2e}, {elapsed:.1f} s (< 30 s)")


# ---------------------------------------------------------------------------
# 4. Offset-free tracking on an analytic 1-D plant


def test_criterion_04_offset_free_tracking():
    model = LinearModel(
        a=np.array([[0.6]]), b=np.array([[0.35]]), c=np.array([[1.0]]),
        x_ss=np.zeros(1), u_ss=np.zeros(1), y_ss=np.zeros(1), dt=900.0)
    cfg = MpcConfig(horizon=10, q=(10.0,), r=(0.01,), bias_gain=1.0,
                    qp_tol=1e-12, qp_max_iter=5000)
    ctl = LmpcController(model, cfg, u_bounds=[(-20.0, 20.0)], y_scale=[1.0])
    y, w, y_sp = 0.0, 0.4, 1.0
    err = np.inf
    for _ in range(50):
        u = ctl.step_raw(np.array([y]), np.array([y_sp]))[0]
        y = 0.7 * y + 0.3 * u + w  # deliberately mismatched true plant
        err = abs(y - y_sp)
    ok = err < 1e-6
    _verdict(4, ok, f"1-D plant with constant disturbance, bias_gain=1: "
                    f"|y - y_sp| = {err:.2e} after 50 steps (< 1e-6)")


# ---------------------------------------------------------------------------
# 5-8. The two-architecture training experiment


@pytest.fixture(scope="session")
def experiment(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("acceptance"))
    model = sysid.run_identification(seed=0)
    t0 = time.perf_counter()
    results = {}
    for arch in ("hierarchical", "direct"):
        cfg = RunConfig(arch=arch, seeds=SEEDS)
        m = model if arch == "hierarchical" else None
        per_seed = []
        for seed in SEEDS:
            res = harness.train_single(cfg, seed, model=m, out_dir=out)
            rep = harness.evaluate(
                os.path.join(res.out_dir, "best_checkpoint.json"), cfg,
                n_episodes=1, model=m, out_dir=None, figures=False)
            per_seed.append({
                "seed": seed,
                "best_return": res.best_return,
                "steps_to_95": harness.steps_to_fraction(
                    [s for s, _ in res.eval_rows],
                    [r for _, r in res.eval_rows], 0.95),
                "violation": rep["mean_violation_magnitude"],
                "terminal_dev": rep["mean_terminal_deviation_abs"],
                "correlation": rep["price_power_correlation"],
            })
        results[arch] = per_seed
    results["elapsed"] = time.perf_counter() - t0
    return results


def test_criterion_05_sample_efficiency_ordering(experiment):
    wins = sum(
        h["steps_to_95"] < d["steps_to_95"]
        for h, d in zip(experiment["hierarchical"], experiment["direct"]))
    pairs = [(h["steps_to_95"], d["steps_to_95"])
             for h, d in zip(experiment["hierarchical"], experiment["direct"])]
    elapsed = experiment["elapsed"]
    ok = wins >= 4 and elapsed < 1800.0
    _verdict(5, ok, f"hierarchical reaches 95% of own best in fewer steps in "
                    f"{wins}/5 seeds (need >= 4); (hier, direct) steps = "
                    f"{pairs}; experiment {elapsed / 60:.1f} min (< 30 min)")


def test_criterion_06_constraint_satisfaction_ordering(experiment):
    wins = sum(
        h["violation"] <= d["violation"]
        for h, d in zip(experiment["hierarchical"], experiment["direct"]))
    pairs = [(round(h["violation"], 4), round(d["violation"], 4))
             for h, d in zip(experiment["hierarchical"], experiment["direct"])]
    ok = wins >= 4
    _verdict(6, ok, f"hierarchical path violation <= direct in {wins}/5 seeds "
                    f"(need >= 4); (hier, direct) magnitudes = {pairs}")


def test_criterion_07_load_shifting(experiment):
    best_h = max(experiment["hierarchical"], key=lambda e: e["best_return"])
    best_d = max(experiment["direct"], key=lambda e: e["best_return"])
    ok = best_h["correlation"] <= -0.2 and best_d["correlation"] < 0.0
    _verdict(7, ok, f"hourly price-power correlation of best policies: "
                    f"hierarchical {best_h['correlation']:.3f} (<= -0.2), "
                    f"direct {best_d['correlation']:.3f} (< 0)")


def test_criterion_08_terminal_constraint_pressure(experiment):
    wins = sum(
        h["terminal_dev"] <= d["terminal_dev"]
        for h, d in zip(experiment["hierarchical"], experiment["direct"]))
    pairs = [(round(h["terminal_dev"], 4), round(d["terminal_dev"], 4))
             for h, d in zip(experiment["hierarchical"], experiment["direct"])]
    ok = wins >= 3
    _verdict(8, ok, f"hierarchical |N_tank(T) - mid|/mid <= direct in "
                    f"{wins}/5 seeds (need >= 3); (hier, direct) = {pairs}")


# ---------------------------------------------------------------------------
# 9. Bit-exact determinism of full training runs


def test_criterion_09_determinism(tmp_path):
    cfg = RunConfig(arch="direct", seeds=(0,))
    a = harness.train_single(cfg, 0, out_dir=str(tmp_path / "a"))
    b = harness.train_single(cfg, 0, out_dir=str(tmp_path / "b"))
    fa = os.path.join(a.out_dir, "learning_curve.csv")
    fb = os.path.join(b.out_dir, "learning_curve.csv")
    ok = filecmp.cmp(fa, fb, shallow=False)
    _verdict(9, ok, "two full identical-config direct runs produce "
                    f"byte-identical learning curves: {ok}")


# ---------------------------------------------------------------------------
# 10. System-identification quality gate


def test_criterion_10_sysid_gate():
    model = sysid.run_identification(seed=0)
    probe = sysid.multistep_probe(n_steps=96, amplitude=0.1)
    report = sysid.validate_model(model, probe, threshold=0.35)
    nrmse = report.nrmse["n_product"]
    ok = report.passed and nrmse < 0.35
    _verdict(10, ok, f"identified model n_product NRMSE = {nrmse:.3f} "
                     f"(< 0.35) on a +/-10% multistep probe")
