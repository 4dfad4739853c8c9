"""13-angle FBP fidelity for a thermal cloud at increasing distance from the trap center.

Reconstructs from exact projections and from the imaging chain, and prints
the overlap with the directly binned ensemble. Usage:
python3 scripts/fbp_offset_ceiling.py [--shifts 0 30e-6 60e-6 85e-6] [--angles 13]
"""
import argparse

import numpy as np

from phasetomo.dynamics import sample_ensemble
from phasetomo.imaging import ImagingSettings, imaged_sinogram
from phasetomo.potential import PhysicalParams
from phasetomo.tomography import GridSpec, PhaseSpaceGrid, equal_angles, fbp_reconstruct, make_sinogram, overlap


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--shifts", type=float, nargs="+", default=[0.0, 30e-6, 60e-6, 85e-6])
    ap.add_argument("--angles", type=int, default=13)
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--k-c", type=float, default=0.43e6)
    args = ap.parse_args()
    params, spec = PhysicalParams(), GridSpec()
    angles = equal_angles(args.angles)
    settings = ImagingSettings(noise=0.0)
    print("shift_um  overlap_exact_proj  overlap_imaged  clipped_fraction")
    for xs in args.shifts:
        ens = sample_ensemble(params, xs, args.n, seed=3)
        direct = PhaseSpaceGrid.from_samples(ens.x, ens.pbar, spec, smooth_cells=1)
        exact = fbp_reconstruct(make_sinogram(direct, angles, pixel_centers(settings)), args.k_c, spec)
        imaged = fbp_reconstruct(imaged_sinogram(ens, angles, settings, seed=1), args.k_c, spec)
        print(f"{1e6 * xs:8.1f}  {overlap(exact, direct):18.4f}  {overlap(imaged, direct):14.4f}  {imaged.clipped_fraction:.4f}")


def pixel_centers(s: ImagingSettings) -> np.ndarray:
    n = int(round((s.x_range[1] - s.x_range[0]) / s.pixel))
    return s.x_range[0] + (np.arange(n) + 0.5) * s.pixel


if __name__ == "__main__":
    main()
