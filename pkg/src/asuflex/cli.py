"""Command-line entry point.

Subcommands:

    sysid          run step experiments, fit and validate the linear model
    train          train one architecture over the configured seeds
    eval           evaluate a saved checkpoint on the held-out day
    simulate       replay an open-loop MV script on the surrogate
    export-curves  merge per-seed learning curves into one CSV

Exit codes: 0 success, 2 configuration error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import glob
import json
import os
import sys

from . import harness, sysid
from .config import RunConfig, load_config, save_config
from .errors import AsuflexError, ConfigError, SchemaMismatchError


def _load_cfg(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    if getattr(args, "arch", None):
        overrides["arch"] = args.arch
    if getattr(args, "seed", None) is not None:
        overrides["seeds"] = (args.seed,)
    if getattr(args, "total_steps", None) is not None:
        overrides["total_steps"] = args.total_steps
    if getattr(args, "out", None):
        overrides["out_dir"] = args.out
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return cfg


def cmd_sysid(args) -> int:
    cfg = _load_cfg(args)
    model = sysid.run_identification(
        cfg=cfg.plant, amplitude=cfg.sysid.amplitude,
        duration=cfg.sysid.duration_s,
        order_per_channel=cfg.sysid.order_per_channel, seed=args.seed or 0,
    )
    probe = sysid.multistep_probe(cfg=cfg.plant)
    report = sysid.validate_model(model, probe, cfg=cfg.plant,
                                  threshold=cfg.sysid.nrmse_threshold)
    sysid.save_model(model, cfg.model_path)
    print(f"model written to {cfg.model_path}")
    for name, val in report.nrmse.items():
        print(f"  NRMSE[{name}] = {val:.4f}")
    if not report.passed:
        print(f"FAIL: n_product NRMSE exceeds {report.threshold}", file=sys.stderr)
        return 1
    return 0


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    model = None
    if cfg.arch == "hierarchical":
        if not os.path.exists(cfg.model_path):
            raise ConfigError(
                f"hierarchical training needs a linear model at "
                f"{cfg.model_path!r}; run `asuflex sysid` first"
            )
        model = sysid.load_model(cfg.model_path)
    out = cfg.resolved_out_dir()
    for seed in cfg.seeds:
        result = harness.train_single(cfg, seed, model=model, out_dir=out)
        print(f"{cfg.arch} seed {seed}: best eval return "
              f"{result.best_return:.2f} at step {result.best_step} "
              f"-> {result.out_dir}")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_cfg(args)
    model = None
    if cfg.arch == "hierarchical":
        if not os.path.exists(cfg.model_path):
            raise ConfigError(f"missing linear model {cfg.model_path!r}")
        model = sysid.load_model(cfg.model_path)
    out = args.out or os.path.join(cfg.resolved_out_dir(), "eval")
    report = harness.evaluate(args.checkpoint, cfg, n_episodes=args.episodes,
                              model=model, out_dir=out,
                              figures=not args.no_figures)
    print(json.dumps({k: v for k, v in report.items() if k != "episodes"},
                     indent=1))
    return 0


def cmd_simulate(args) -> int:
    cfg = _load_cfg(args)
    harness.simulate_script(args.script, cfg, args.out or "simulated.csv")
    print(f"trajectory written to {args.out or 'simulated.csv'}")
    return 0


def cmd_export_curves(args) -> int:
    run_dirs = sorted(d for d in glob.glob(os.path.join(args.runs, "*"))
                      if os.path.isfile(os.path.join(d, "learning_curve.csv")))
    if not run_dirs:
        raise ConfigError(f"no run directories with learning curves in {args.runs!r}")
    harness.export_curves(run_dirs, args.out)
    if not args.no_figures:
        from . import figures as figs
        curves = {}
        for d in run_dirs:
            with open(os.path.join(d, "summary.json")) as fh:
                meta = json.load(fh)
            label = f"{meta['arch']}/seed{meta['seed']}"
            curves[label] = harness.read_curve(
                os.path.join(d, "learning_curve.csv"))
        png = os.path.splitext(args.out)[0] + ".png"
        figs.learning_curve_figure(curves, png)
        print(f"figure written to {png}")
    print(f"merged curves written to {args.out}")
    return 0


def cmd_init_config(args) -> int:
    save_config(RunConfig(), args.out)
    print(f"default config written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="asuflex",
        description="Demand-response scheduling on a surrogate air "
                    "separation unit: direct RL vs hierarchical RL-LMPC.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, arch=True):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int, help="override: single root seed")
        if arch:
            p.add_argument("--arch", choices=["direct", "hierarchical"])

    p = sub.add_parser("sysid", help="identify and validate the linear model")
    common(p, arch=False)
    p.set_defaults(func=cmd_sysid)

    p = sub.add_parser("train", help="train to the step budget")
    common(p)
    p.add_argument("--total-steps", type=int, dest="total_steps")
    p.add_argument("--out", help="output directory (or env ASUFLEX_OUT)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    common(p)
    p.add_argument("checkpoint", help="checkpoint JSON path")
    p.add_argument("--episodes", type=int, default=1)
    p.add_argument("--out", help="evaluation output directory")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", help="open-loop MV script replay")
    common(p, arch=False)
    p.add_argument("script", help="CSV with step,n_mac,xi_tur,xi_top,f_drain")
    p.add_argument("--out", help="output trajectory CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("export-curves", help="merge learning curves")
    p.add_argument("runs", help="directory containing per-seed run dirs")
    p.add_argument("--out", default="curves.csv")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_export_curves)

    p = sub.add_parser("init-config", help="write the default config")
    p.add_argument("--out", default="config.json")
    p.set_defaults(func=cmd_init_config)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SchemaMismatchError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except AsuflexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
