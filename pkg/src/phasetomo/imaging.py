"""Synthetic absorption images and their reduction to projection stacks."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .dynamics import Ensemble, phase_rotation
from .errors import InputError
from .rng import stream
from .tomography import Sinogram


@dataclass(frozen=True, eq=False)
class DensityImage:
    """Column density image; ``values[iy, ix]`` with ``x`` along columns.

    ``origin`` is the ``(x, y)`` position of the lower-left corner of pixel
    ``(0, 0)``. Values are in units of atom fraction per m^2 (an optical
    density up to a constant).
    """

    values: np.ndarray
    pixel: float
    origin: tuple[float, float]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise InputError("image must be 2D")
        if not self.pixel > 0:
            raise InputError("pixel size must be > 0")
        if not np.all(np.isfinite(v)):
            raise InputError("image values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return self.origin[0] + (np.arange(self.values.shape[1]) + 0.5) * self.pixel

    @property
    def y(self) -> np.ndarray:
        return self.origin[1] + (np.arange(self.values.shape[0]) + 0.5) * self.pixel


@dataclass(frozen=True)
class ImagingSettings:
    psf_sigma: float = 3e-6
    pixel: float = 1e-6
    noise: float = 0.01
    noise_relative: bool = True
    x_range: tuple[float, float] = (-150e-6, 150e-6)
    y_half_width: float = 30e-6


@dataclass(frozen=True, eq=False)
class Profile:
    """Longitudinal density on uniform ``x`` (unit area) plus the clipped mass fraction."""

    x: np.ndarray
    density: np.ndarray
    clipped_fraction: float = 0.0


def transverse_sigma(ens: Ensemble) -> float:
    p = ens.params
    return math.sqrt(p.kT / (p.mass * p.omega_perp**2))


def render_absorption_image(
    ens: Ensemble,
    psf_sigma: float = 3e-6,
    pixel: float = 1e-6,
    noise_rms: float = 0.0,
    seed: int = 0,
    *,
    image_index: int = 0,
    x_range: tuple[float, float] | None = None,
    y_half_width: float | None = None,
    noise_relative: bool = False,
) -> DensityImage:
    """Histogram, blur and add noise.

    The transverse coordinate of each atom is drawn from the thermal
    distribution of the transverse oscillator. ``noise_rms`` is absolute
    (image units) unless ``noise_relative`` is set, in which case it is a
    fraction of the noiseless peak. Random draws use the stream
    ``(seed, "image", image_index)``.
    """
    if not pixel > 0:
        raise InputError("pixel must be > 0")
    if psf_sigma < 0 or noise_rms < 0:
        raise InputError("psf_sigma and noise_rms must be >= 0")
    rng = stream(seed, "image", image_index)
    sy = transverse_sigma(ens)
    y = sy * rng.standard_normal(ens.N)
    margin = 5 * psf_sigma + 2 * pixel
    if x_range is None:
        x_range = (ens.x.min() - margin, ens.x.max() + margin)
    if y_half_width is None:
        y_half_width = 6 * sy + margin
    nx = max(1, int(math.ceil((x_range[1] - x_range[0]) / pixel)))
    ny = max(1, int(math.ceil(2 * y_half_width / pixel)))
    origin = (x_range[0], -0.5 * ny * pixel)
    H, _, _ = np.histogram2d(
        y,
        ens.x,
        bins=(ny, nx),
        range=((origin[1], origin[1] + ny * pixel), (origin[0], origin[0] + nx * pixel)),
    )
    img = H / (ens.N * pixel * pixel)
    if psf_sigma > 0:
        img = ndimage.gaussian_filter(img, psf_sigma / pixel, mode="constant", truncate=5.0)
    if noise_rms > 0:
        scale = noise_rms * (img.max() if noise_relative else 1.0)
        img = img + scale * rng.standard_normal(img.shape)
    return DensityImage(img, pixel, origin)


def column_integrate(img: DensityImage) -> Profile:
    """Sum over the transverse axis, clamp negative columns, normalize to unit area."""
    col = img.values.sum(axis=0) * img.pixel
    total_abs = np.abs(col).sum()
    if total_abs == 0:
        raise InputError("image is empty")
    neg = -col[col < 0].sum()
    col = np.clip(col, 0.0, None)
    s = col.sum() * img.pixel
    if not s > 0:
        raise InputError("image has no positive column density")
    return Profile(img.x, col / s, float(neg / total_abs))


def ingest_projection_stack(profiles, *, atol: float = 1e-12) -> Sinogram:
    """Average repeated profiles per angle and build a sorted, normalized sinogram.

    ``profiles`` is an iterable of ``(theta, Profile)`` or ``(theta, x, density)``.
    Angles closer than ``atol`` are treated as repeats.
    """
    groups: dict[float, list] = {}
    keys: list[float] = []
    x_ref = None
    for item in profiles:
        if len(item) == 2:
            theta, prof = item
            x, d = prof.x, prof.density
        else:
            theta, x, d = item
        theta = float(theta)
        x = np.asarray(x, dtype=float)
        d = np.asarray(d, dtype=float)
        if x.shape != d.shape:
            raise InputError("profile x and density differ in length")
        key = next((k for k in keys if abs(k - theta) <= atol), None)
        if key is None:
            keys.append(theta)
            groups[theta] = []
            key = theta
        elif not np.array_equal(groups[key][0][0], x):
            raise InputError(f"repeated angle {theta:.6g} with a different x grid")
        if x_ref is None:
            x_ref = x
        elif not np.array_equal(x_ref, x):
            raise InputError("all profiles must share one x grid")
        groups[key].append((x, d))
    if len(keys) < 2:
        raise InputError("need at least 2 distinct angles")
    keys.sort()
    dx = x_ref[1] - x_ref[0]
    rows = []
    for k in keys:
        mean = np.mean([d for _, d in groups[k]], axis=0)
        mean = np.clip(mean, 0.0, None)
        s = mean.sum() * dx
        rows.append(mean / s if s > 0 else mean)
    return Sinogram(np.array(keys), x_ref, np.array(rows))


def imaged_sinogram(ens: Ensemble, angles, settings: ImagingSettings, seed: int, repeats: int = 1) -> Sinogram:
    """Rotate to each angle, image, reduce and ingest (the full measurement chain).

    Image ``i`` of angle ``j`` uses stream index ``j * repeats + i``.
    """
    stack = []
    for j, th in enumerate(angles):
        rotated = phase_rotation(ens, -float(th))
        for i in range(repeats):
            img = render_absorption_image(
                rotated,
                settings.psf_sigma,
                settings.pixel,
                settings.noise,
                seed,
                image_index=j * repeats + i,
                x_range=settings.x_range,
                y_half_width=settings.y_half_width,
                noise_relative=settings.noise_relative,
            )
            stack.append((th, column_integrate(img)))
    return ingest_projection_stack(stack)


# --- files -----------------------------------------------------------------------


def write_pgm(path, values, comment: str = "", flip: bool = True) -> float:
    """Binary 8-bit PGM with ``[0, max] -> [0, 255]``; returns the scale (value per level).

    With ``flip`` the first array row is written at the bottom, so ``y`` (or
    ``pbar``) increases upwards.
    """
    v = np.asarray(values, dtype=float)
    top = v.max()
    scale = top / 255.0 if top > 0 else 1.0
    levels = np.clip(np.rint(np.clip(v, 0.0, None) / scale), 0, 255).astype(np.uint8)
    if flip:
        levels = levels[::-1]
    head = f"P5\n# {comment}\n{v.shape[1]} {v.shape[0]}\n255\n" if comment else f"P5\n{v.shape[1]} {v.shape[0]}\n255\n"
    with open(path, "wb") as fh:
        fh.write(head.encode("ascii"))
        fh.write(levels.tobytes())
    return scale


def save_image_pgm(path, img: DensityImage) -> None:
    top = max(img.values.max(), 0.0)
    write_pgm(path, img.values, f"pixel_m={img.pixel:.6g} od_max={top:.6g} od_per_level={top / 255:.6g}")


def read_pgm(path) -> tuple[np.ndarray, list[str]]:
    """Return ``(levels, comments)`` of a P5 file (rows as stored)."""
    data = Path(path).read_bytes()
    fields, comments = [], []
    pos = 0
    while len(fields) < 4:
        nl = data.index(b"\n", pos)
        line = data[pos:nl].decode("ascii")
        pos = nl + 1
        if line.startswith("#"):
            comments.append(line[1:].strip())
        else:
            fields.extend(line.split())
    if fields[0] != "P5":
        raise InputError(f"{path}: not a binary PGM")
    w, h = int(fields[1]), int(fields[2])
    return np.frombuffer(data[pos : pos + w * h], dtype=np.uint8).reshape(h, w), comments


def save_profile(path, prof: Profile) -> None:
    lines = ["# x_meters\tdensity"]
    lines.extend(f"{a:.17g}\t{b:.17g}" for a, b in zip(prof.x, prof.density))
    Path(path).write_text("\n".join(lines) + "\n")


def load_profile(path) -> Profile:
    rows = []
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InputError(f"{path}:{n}: expected two columns")
        rows.append((float(parts[0]), float(parts[1])))
    arr = np.array(rows)
    return Profile(arr[:, 0], arr[:, 1])
