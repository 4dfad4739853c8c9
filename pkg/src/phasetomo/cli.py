"""Command-line front end: ``phasetomo <kind> --config FILE [--out DIR] [--seed N] [--threads N]``.

Thread count precedence is ``--threads`` > ``PHASETOMO_THREADS`` > all
available cores. Results do not depend on the thread count.
"""
from __future__ import annotations

import argparse
import os
import shutil
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

import numba
import numpy as np
import scipy

from . import __version__
from .config import KINDS, config_summary, load_config
from .errors import InputError, PhaseTomoError
from .experiments import fmt, run_experiment

THREADS_ENV = "PHASETOMO_THREADS"


def resolve_threads(flag: int | None, env: dict | None = None) -> int:
    """Apply ``flag > env > auto`` and clamp to what numba allows."""
    env = os.environ if env is None else env
    limit = numba.config.NUMBA_NUM_THREADS
    if flag is not None:
        n = flag
    elif env.get(THREADS_ENV, "").strip():
        try:
            n = int(env[THREADS_ENV])
        except ValueError:
            raise InputError(f"{THREADS_ENV} must be an integer, got {env[THREADS_ENV]!r}") from None
    else:
        n = limit
    if n < 1:
        raise InputError("thread count must be >= 1")
    return min(n, limit)


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="phasetomo", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"phasetomo {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in KINDS + ("validate",):
        p = sub.add_parser(kind, help="check a config without running" if kind == "validate" else f"run {kind}")
        p.add_argument("--config", required=True, help="experiment config file")
        if kind != "validate":
            p.add_argument("--out", help="output directory (default: output_dir from the config)")
            p.add_argument("--seed", type=_u64, help="override the config seed")
            p.add_argument("--threads", type=int, help=f"worker threads (overrides ${THREADS_ENV})")
    return ap


def _report_lines(cfg, outcome) -> list[str]:
    head = {
        "kind": cfg.kind,
        "seed": cfg.seed,
        "config_sha256": cfg.source_sha256,
        "version_phasetomo": __version__,
        "version_numpy": np.__version__,
        "version_scipy": scipy.__version__,
        "version_numba": numba.__version__,
    }
    lines = [f"{k}={fmt(v)}" for k, v in head.items()]
    summary = config_summary(cfg)
    for drop in ("kind", "seed", "source_sha256", "output_dir"):
        summary.pop(drop, None)
    lines += [f"config.{k}={v}" for k, v in summary.items()]
    lines += [f"{k}={fmt(v)}" for k, v in outcome.report.items()]
    return lines


def _publish(staging: Path, target: Path) -> None:
    """Swap ``staging`` into place; an existing ``target`` is replaced."""
    old = None
    if target.exists():
        old = target.with_name(f".{target.name}.old-{os.getpid()}")
        os.replace(target, old)
    os.replace(staging, target)
    if old is not None:
        shutil.rmtree(old, ignore_errors=True)


def run(kind: str, config: str, out: str | None = None, seed: int | None = None, threads: int | None = None) -> Path:
    cfg = load_config(config, kind)
    if seed is not None:
        cfg = replace(cfg, seed=seed).validate()
    numba.set_num_threads(resolve_threads(threads))
    target = Path(out if out is not None else cfg.output_dir).resolve()
    target.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=f".{target.name}.staging-", dir=target.parent))
    try:
        outcome = run_experiment(cfg)
        for name in sorted(outcome.artifacts):
            outcome.artifacts[name](str(staging / name))
        (staging / "report.txt").write_text("\n".join(_report_lines(cfg, outcome)) + "\n")
        _publish(staging, target)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    return target


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            cfg = load_config(args.config)
            print(f"valid kind={cfg.kind} config_sha256={cfg.source_sha256}")
            return 0
        target = run(args.command, args.config, args.out, args.seed, args.threads)
    except InputError as exc:
        print(f"phasetomo: invalid input: {exc}", file=sys.stderr)
        return 2
    except (PhaseTomoError, ValueError, OSError) as exc:
        print(f"phasetomo: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {target}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
