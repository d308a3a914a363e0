"""Command-line interface.

Subcommands:
  run        run an experiment from a JSON config
  partition  cluster a similarity matrix given as a headerless square CSV
  ari        Adjusted Rand Index between two partition files
  figures    run a bundled benchmark-reproduction config
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import BlockPFError
from .harness import load_config, run_experiment
from .metrics import ari
from .partitioning import Partition, csc
from .rng import derive_stream

FIGURE_CONFIGS = {
    "t1": ["t1.json"],
    "t2": ["t2.json"],
    "fig1": ["fig1.json"],
    "fig3": ["fig3a_l30.json", "fig3a_l50.json", "fig3a_l100.json"],
    "fig4": ["fig4.json"],
    "fig6": ["fig6.json"],
    "smoke": ["smoke.json"],
}


def _default_threads(args_threads):
    if args_threads is not None:
        return args_threads
    env = os.environ.get("BPF_THREADS")
    return int(env) if env else 1


def read_partition_file(path) -> Partition:
    """One block per line, comma-separated 1-based indices."""
    blocks = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        blocks.append(tuple(int(tok) - 1 for tok in line.split(",")))
    return Partition(tuple(blocks))


def format_partition(part: Partition) -> str:
    return "\n".join(",".join(str(i + 1) for i in block) for block in part.blocks)


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, master_seed=args.seed)
    out_dir = args.out or "results"
    run_experiment(cfg, out_dir, threads=_default_threads(args.threads))
    print(f"results written to {out_dir}")
    return 0


def _cmd_partition(args) -> int:
    omega = np.loadtxt(args.similarity, delimiter=",", ndmin=2)
    rng = derive_stream(args.seed, "cli-partition")
    part = csc(omega, args.k, args.zeta if args.zeta else omega.shape[0], rng)
    print(format_partition(part))
    return 0


def _cmd_ari(args) -> int:
    p1 = read_partition_file(args.p1)
    p2 = read_partition_file(args.p2)
    print(f"{ari(p1, p2):.6g}")
    return 0


def _cmd_figures(args) -> int:
    names = FIGURE_CONFIGS[args.table]
    out_root = Path(args.out or f"results_{args.table}")
    for name in names:
        with resources.as_file(resources.files("blockpf.configs") / name) as path:
            cfg = load_config(path)
        if args.full and args.table in ("fig6", "fig1"):
            cfg = dataclasses.replace(cfg, n_runs=200)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, master_seed=args.seed)
        out_dir = out_root if len(names) == 1 else out_root / Path(name).stem
        run_experiment(cfg, out_dir, threads=_default_threads(args.threads))
        print(f"results written to {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blockpf",
                                     description="Block particle filtering with "
                                                 "adaptive state-space partitioning")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("--config", required=True, help="JSON experiment config")
    p_run.add_argument("--seed", type=int, help="override the config master seed")
    p_run.add_argument("--threads", type=int, help="worker processes (default: "
                                                   "BPF_THREADS or 1)")
    p_run.add_argument("--out", help="output directory (default: results)")
    p_run.set_defaults(func=_cmd_run)

    p_part = sub.add_parser("partition", help="cluster a similarity matrix CSV")
    p_part.add_argument("--similarity", required=True,
                        help="square, header-free, comma-separated CSV")
    p_part.add_argument("--k", required=True, type=int, help="number of blocks")
    p_part.add_argument("--zeta", type=int, help="max block size (default: d_x)")
    p_part.add_argument("--seed", type=int, default=0)
    p_part.set_defaults(func=_cmd_partition)

    p_ari = sub.add_parser("ari", help="ARI between two partition files")
    p_ari.add_argument("p1")
    p_ari.add_argument("p2")
    p_ari.set_defaults(func=_cmd_ari)

    p_fig = sub.add_parser("figures", help="run a bundled reproduction config")
    p_fig.add_argument("--table", required=True, choices=sorted(FIGURE_CONFIGS))
    p_fig.add_argument("--out", help="output directory")
    p_fig.add_argument("--seed", type=int)
    p_fig.add_argument("--threads", type=int)
    p_fig.add_argument("--full", action="store_true",
                       help="full 200-run protocol for fig1/fig6")
    p_fig.set_defaults(func=_cmd_figures)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BlockPFError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
