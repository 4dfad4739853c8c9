"""Run every shipped config through the CLI and print the headline numbers.

Usage: python3 scripts/run_all_configs.py [--out DIR] [--only KIND ...]
"""
import argparse
from pathlib import Path

from phasetomo import cli
from phasetomo.config import load_config

ROOT = Path(__file__).resolve().parents[1]
HEADLINES = (
    "anisotropy", "angular_spread", "collision_rate_per_atom", "l2_error_fringe", "rec_min_over_max",
    "t_min", "min_dx_ratio", "period_change", "max_amplitude_nK", "max_rel_diff_exact_vs_direct",
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(ROOT / "out"))
    ap.add_argument("--only", nargs="*", help="config stems to run (default: all)")
    ap.add_argument("--threads", type=int)
    args = ap.parse_args()
    for path in sorted((ROOT / "configs").glob("*.ini")):
        if args.only and path.stem not in args.only:
            continue
        kind = load_config(path).kind
        target = cli.run(kind, str(path), str(Path(args.out) / path.stem), threads=args.threads)
        report = dict(line.split("=", 1) for line in (target / "report.txt").read_text().splitlines())
        shown = ", ".join(f"{k}={report[k]}" for k in HEADLINES if k in report)
        print(f"{path.stem:24s} {shown}")


if __name__ == "__main__":
    main()
