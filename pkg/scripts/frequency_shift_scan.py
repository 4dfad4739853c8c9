"""Frequency-shift curve of the synthetic corrugation versus its scale factor.

For each scale, prints the extrema of dw/w0 over the cloud's energy spread
(E_shift +- dE) and over a wider window, plus the lowest-order estimate at
E_shift. Usage: python3 scripts/frequency_shift_scan.py [--scales 1 2 3]
"""
import argparse
import math

import numpy as np

from phasetomo import dynamics as dyn
from phasetomo.experiments import release_energy_stats
from phasetomo.potential import PhysicalParams, Potential1D, synth_paper_corrugation


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scales", type=float, nargs="+", default=[0.5, 1.0, 2.0, 2.966, 4.0])
    ap.add_argument("--x-shift", type=float, default=85e-6)
    args = ap.parse_args()
    params = PhysicalParams()
    E_shift, dE = release_energy_stats(params, args.x_shift)
    T0 = 2 * math.pi / params.omega0
    print(f"E_shift = {E_shift:.4g} J, dE = {dE:.4g} J")
    print("scale   min(dw/w0)  max(dw/w0)  span     | wide min   wide max  | lowest-order dw/w0 at E_shift")
    for s in args.scales:
        pot = Potential1D(params, corrugation=synth_paper_corrugation(s))
        band = dyn.frequency_shift_curve(pot, np.linspace(E_shift - dE, E_shift + dE, 41)).shift
        wide = dyn.frequency_shift_curve(pot, np.linspace(0.1 * E_shift, E_shift + 3 * dE, 61)).shift
        dT = dyn.period_perturbative(pot, E_shift, "lowest_order")
        lo = T0 / (T0 + dT) - 1
        print(
            f"{s:5.3f}  {band.min():+.5f}    {band.max():+.5f}    {band.max() - band.min():.5f}  "
            f"| {wide.min():+.5f}   {wide.max():+.5f} | {lo:+.5f}"
        )


if __name__ == "__main__":
    main()
