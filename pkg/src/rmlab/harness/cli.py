"""Command-line entry point: ``rmlab <scenario> [flags]``."""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from ..distributions import parse_distribution
from ..errors import ConstructionError
from .config import SCENARIOS, ExperimentConfig, default_config, load_config
from .lemmas import run_lemma_suite
from .report import RunReport, emit_report
from .scenarios import (
    required_k,
    run_moment_growth,
    run_regime_almost_square,
    run_regime_small_columns,
    run_scaling_in_N,
    run_tail_decay,
)

RUNNERS = {
    "lemmas": run_lemma_suite,
    "scaling": run_scaling_in_N,
    "moments": run_moment_growth,
    "tails": run_tail_decay,
    "small-columns": run_regime_small_columns,
    "almost-square": run_regime_almost_square,
}


def _ints(text):
    return tuple(int(x) for x in text.split(",") if x.strip())


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rmlab", description="Spectral-norm experiments for W = BA.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--trials", type=int)
    common.add_argument("--n", type=int, help="n (and m) of the shaped matrix")
    common.add_argument("--N", type=_ints, help="comma-separated N values")
    common.add_argument("--p", type=_floats, help="comma-separated moment orders")
    common.add_argument("--dist", help="entry law descriptor, e.g. 'laplace{scale=1.0}'")
    common.add_argument("--shaper", choices=["identity_embed", "partial_isometry", "replicated_average", "explicit"])
    common.add_argument("--out", help="output directory for report.json and CSVs")
    common.add_argument("--config", help="JSON config file mirroring ExperimentConfig")
    common.add_argument("--method", choices=["power", "exact"])
    common.add_argument("--workers", type=int, help="worker threads for trial chunks")
    common.add_argument("--figures", action="store_true", help="also render PNG figures into --out")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SCENARIOS + ("all",):
        sub.add_parser(name, parents=[common])
    return parser


def configure(args) -> ExperimentConfig:
    """Scenario defaults, overlaid by the config file, overlaid by flags."""
    if args.config:
        cfg = load_config(args.config)
        if cfg.scenario != args.command:
            raise ValueError(f"config is for {cfg.scenario!r}, not {args.command!r}")
    else:
        cfg = default_config(args.command)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.p is not None:
        changes["p_grid"] = args.p
    if args.dist is not None:
        changes["dist"] = parse_distribution(args.dist)
    for key in ("out", "method", "workers"):
        if getattr(args, key) is not None:
            changes[key] = getattr(args, key)
    cfg = replace(cfg, **changes)
    shaper = {}
    if args.shaper is not None:
        shaper["kind"] = args.shaper
    if args.n is not None:
        shaper.update(m=args.n, n=args.n)
        if cfg.scenario == "small-columns" and args.N is None:
            k = required_k(args.n, cfg.C_split)
            shaper.update(k=k, N=k * args.n)
        elif cfg.scenario == "almost-square" and args.N is None:
            shaper["N"] = args.n**2
        elif args.N is None:
            shaper["N"] = max(cfg.shaper.N, args.n)
    if args.N is not None:
        if cfg.scenario == "scaling":
            cfg = replace(cfg, N_grid=args.N)
        else:
            shaper["N"] = args.N[0]
            if cfg.scenario == "small-columns":
                shaper["k"] = args.N[0] // (args.n or cfg.n)
    if shaper:
        cfg = cfg.with_shaper(**shaper)
    return cfg


def run(cfg: ExperimentConfig) -> RunReport:
    if cfg.scenario != "all":
        return RUNNERS[cfg.scenario](cfg)
    report = RunReport("all", config={"scenario": "all", "seed": cfg.seed}, seed=cfg.seed)
    for name in SCENARIOS:
        sub = replace(default_config(name, cfg.seed), workers=cfg.workers)
        report.merge(RUNNERS[name](sub))
    return report


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.figures and not args.out:
        parser.error("--figures needs --out")
    try:
        cfg = configure(args)
        report = run(cfg)
    except ConstructionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    for v in report.verdicts:
        print(f"{v.status.upper():<13} {v.name}")
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if args.out:
        emit_report(report, args.out)
        if args.figures:
            from .plotting import render_figures
            render_figures(report, args.out)
    print(f"{report.status}: {len(report.verdicts)} verdicts in {report.wall_clock:.1f} s")
    return report.exit_code()


if __name__ == "__main__":
    sys.exit(main())
