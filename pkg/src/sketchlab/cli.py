"""Command-line entry point: ``sketchlab run`` and ``sketchlab attack-demo``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict

import numpy as np

from .harness import (ATTACKS, SKETCHES, ConfigError, ExperimentConfig, run_experiment,
                      sketch_trees, write_csv)
from .rng import seed_from_env

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sketchlab", description="Robust streaming sketch experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run one experiment configuration")
    run.add_argument("--sketch", required=True, choices=SKETCHES)
    run.add_argument("--eps", type=float, default=0.3)
    run.add_argument("--delta", type=float, default=0.05)
    run.add_argument("-T", type=int, default=1000, dest="T", help="attack budget / parameter horizon")
    src = run.add_mutually_exclusive_group()
    src.add_argument("--attack", default="none",
                     help=f"one of {', '.join(ATTACKS)} or replay:<path>")
    src.add_argument("--stream", help="stream file in the text op format")
    src.add_argument("--gen", help="generator spec, e.g. distinct:1000 or weighted:500:1:4")
    run.add_argument("--seed", type=_seed, default=None)
    run.add_argument("--trials", type=int, default=1)
    run.add_argument("--noise", choices=("live", "zero"), default="live")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--p", type=float, default=1.0, help="sampling rate (initial rate when adaptive)")
    run.add_argument("--tau", type=float, default=1.0, help="sum sketch threshold")
    run.add_argument("--scale-max", type=float, default=None)
    run.add_argument("--f", default="softcap:10", help="moment:<p> | log1p | softcap:<T_c>")
    run.add_argument("--r", type=int, default=64)
    run.add_argument("--dmin", type=float, default=1.0)
    run.add_argument("--dmax", type=float, default=1.0)
    run.add_argument("--dump-tree-noise", action="store_true",
                     help="write every tree node's noise to CSV (test mode)")

    demo = sub.add_parser("attack-demo", help="attacks on the plain and robust cardinality sketches")
    demo.add_argument("-T", type=int, default=10_000, dest="T")
    demo.add_argument("--p", type=float, default=0.1)
    demo.add_argument("--trials", type=int, default=10)
    demo.add_argument("--seed", type=_seed, default=None)
    return parser


def _cmd_run(args) -> int:
    cfg = ExperimentConfig(
        sketch=args.sketch, eps=args.eps, delta=args.delta, T=args.T, p=args.p, tau=args.tau,
        scale_max=args.scale_max, f=args.f, r=args.r, dmin=args.dmin, dmax=args.dmax,
        attack=args.attack, gen=args.gen, stream=args.stream,
        seed=args.seed if args.seed is not None else seed_from_env(0),
        trials=args.trials, noise=args.noise, out=args.out)
    if cfg.attack == "none" and cfg.gen is None and cfg.stream is None:
        raise ConfigError("no input: give --attack, --gen or --stream")
    cfg.validate()
    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, "config.json"), "w") as fh:
        fh.write(cfg.to_json() + "\n")
    results = run_experiment(cfg, dump_noise=args.dump_tree_noise)
    summary = []
    for res in results:
        write_csv(res.trace, os.path.join(cfg.out, f"trial_{res.trial}.csv"))
        if args.dump_tree_noise and res.sketch is not None:
            for j, tree in enumerate(sketch_trees(res.sketch)):
                tree.dump_noise_csv(os.path.join(cfg.out, f"tree_noise_trial{res.trial}_{j}.csv"))
        summary.append({"trial": res.trial, "seed": res.seed, "error": res.error,
                        **asdict(res.metrics)})
        status = res.error or "ok"
        print(f"trial {res.trial}: max_norm_err={res.metrics.max_norm_err:.4g} "
              f"final_bias={res.metrics.final_bias:.4g} [{status}]")
    with open(os.path.join(cfg.out, "metrics.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    return EXIT_RUNTIME if any(r.error for r in results) else EXIT_OK


def _cmd_attack_demo(args) -> int:
    seed = args.seed if args.seed is not None else seed_from_env(0)
    print(f"attacks with a budget of T={args.T} fresh keys, p={args.p}, {args.trials} trials")
    print(f"{'sketch':<22}{'attack':<15}{'mean est':>10}{'mean truth':>12}{'mean bias':>11}")
    for sketch in ("card-bernoulli", "card-robust-adaptive"):
        for attack in ("reinsert", "sample-delete"):
            cfg = ExperimentConfig(sketch=sketch, attack=attack, T=args.T, p=args.p,
                                   trials=args.trials, seed=seed, eps=0.3, delta=0.05)
            if sketch == "card-robust-adaptive":
                cfg.p = 1.0
            results = run_experiment(cfg, record_trace=True)
            ests = np.array([r.trace[-1].estimate for r in results])
            truths = np.array([r.trace[-1].truth for r in results])
            print(f"{sketch:<22}{attack:<15}{ests.mean():>10.1f}{truths.mean():>12.1f}"
                  f"{(ests - truths).mean():>11.1f}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_attack_demo(args)
    except ConfigError as exc:
        print(f"sketchlab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        print(f"sketchlab: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
