"""Matplotlib rendering of learning curves and evaluation trajectories.

All figures are written to files; no interactive backend is required.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .plant import TANK_HI, TANK_LO, TANK_MID

ARCH_STYLE = {
    "hierarchical": {"color": "tab:blue", "linestyle": "-"},
    "direct": {"color": "tab:orange", "linestyle": "-."},
}


def _style(arch: str) -> dict:
    return ARCH_STYLE.get(arch, {"color": "tab:gray", "linestyle": "-"})


def learning_curve_figure(curves: dict, out_path: str, window: int = 10) -> None:
    """Rolling-mean learning curves.

    ``curves`` maps a label (e.g. "hierarchical/seed0") to a dict with
    "step" and "return" sequences.
    """
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, data in curves.items():
        steps = np.asarray(data["step"], dtype=float)
        rets = np.asarray(data["return"], dtype=float)
        if len(rets) >= window:
            kernel = np.ones(window) / window
            smooth = np.convolve(rets, kernel, mode="valid")
            steps = steps[window - 1:]
        else:
            smooth = rets
        arch = label.split("/")[0]
        ax.plot(steps, smooth, label=label, alpha=0.8, **_style(arch))
    ax.set_xlabel("environment steps")
    ax.set_ylabel(f"episode return (rolling mean, w={window})")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def trajectory_figure(rows, out_path: str) -> None:
    """Five-panel evaluation day: price/power, production and setpoint,
    storage, impurity, and IRC temperature difference with their bounds."""
    t = np.array([r["t_h"] for r in rows])
    price = np.array([r["price"] for r in rows])
    p_net = np.array([r["p_comp"] + r["p_liq"] - r["p_tur"] for r in rows])
    n_prod = np.array([r["n_product"] for r in rows])
    sp = np.array([np.nan if r["setpoint"] is None else r["setpoint"]
                   for r in rows])
    n_tank = np.array([r["n_tank"] for r in rows])
    i_prod = np.array([r["i_product"] for r in rows])
    dt_irc = np.array([r["dt_irc"] for r in rows])

    fig, axes = plt.subplots(5, 1, figsize=(7, 11), sharex=True)

    ax = axes[0]
    ax.step(t, price, where="post", color="tab:green", label="price [$/MWh]")
    ax.set_ylabel("price [$/MWh]")
    ax2 = ax.twinx()
    ax2.plot(t, p_net, color="tab:red", label="net power [MW]")
    ax2.set_ylabel("net power [MW]")
    ax.legend(loc="upper left", fontsize=8)
    ax2.legend(loc="upper right", fontsize=8)

    ax = axes[1]
    ax.plot(t, n_prod, color="tab:blue", label="n_product")
    if not np.all(np.isnan(sp)):
        ax.step(t, sp, where="post", color="tab:purple", linestyle="--",
                label="setpoint")
    ax.set_ylabel("production [mol/s]")
    ax.legend(fontsize=8)

    ax = axes[2]
    ax.plot(t, n_tank / 1e6, color="tab:blue")
    for level in (TANK_LO, TANK_HI):
        ax.axhline(level / 1e6, color="gray", linestyle="--", linewidth=0.8)
    ax.axhline(TANK_MID / 1e6, color="gray", linestyle=":", linewidth=0.8)
    ax.set_ylabel("storage [Mmol]")

    ax = axes[3]
    ax.plot(t, i_prod, color="tab:blue")
    for level in (0.0, 1500.0):
        ax.axhline(level, color="gray", linestyle="--", linewidth=0.8)
    ax.set_ylabel("impurity [ppm]")

    ax = axes[4]
    ax.plot(t, dt_irc, color="tab:blue")
    for level in (2.0, 5.0):
        ax.axhline(level, color="gray", linestyle="--", linewidth=0.8)
    ax.set_ylabel("IRC dT [K]")
    ax.set_xlabel("hour of day")

    for ax in axes:
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
