"""Sensitivity of the squeezing minimum to the stroboscopic sampling offset.

Usage: python3 scripts/squeezing_strobe_scan.py [--offsets 2.5e-3 3e-3 3.5e-3]
"""
import argparse
from dataclasses import replace

import numpy as np

from phasetomo.quantum import SqueezingSettings, squeezing_study


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--offsets", type=float, nargs="+", default=[2.5e-3, 2.75e-3, 3e-3, 3.25e-3, 3.5e-3])
    args = ap.parse_args()
    base = SqueezingSettings()
    res = squeezing_study(settings=base)
    traj = res["trajectory"]
    k = int(np.argmin(traj["dx"]))
    print(f"continuous minimum: dx/dx0 = {traj['dx'][k] / res['dx0']:.4f} at {1e3 * traj['t'][k]:.1f} ms")
    print(f"period change: {100 * res['period_change']:+.3f}%")
    print("offset_ms  t_min_ms  ratio")
    for off in args.offsets:
        r = squeezing_study(settings=replace(base, strobe_offset=off))
        print(f"{1e3 * off:8.2f}  {1e3 * r['t_min']:8.1f}  {r['ratio']:.4f}")


if __name__ == "__main__":
    main()
