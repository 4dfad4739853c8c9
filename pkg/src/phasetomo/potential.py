"""Longitudinal trap potentials: harmonic core plus corrugation and quartic terms.

All quantities are SI. The potential is

    V(x) = 1/2 m w0^2 (x - c)^2 * (1 + (x - c)^2 / w^2) + dU(x)

where ``dU`` is a gridded corrugation interpolated by a natural cubic spline
and ``w`` is the quartic scale (``inf`` disables the quartic term).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import constants as _const
from scipy.interpolate import CubicSpline

from .errors import InputError

KB = _const.k
HBAR = _const.hbar
MU_B = _const.physical_constants["Bohr magneton"][0]
RB87_MASS = 86.909180527 * _const.atomic_mass

#: trap and collision values of the reference experiment
OMEGA0 = 2 * np.pi * 38.0
OMEGA_PERP = 2 * np.pi * 110.0
TEMPERATURE = 160e-9
SIGMA_EL = 8e-12 * 1e-4  # 8e-12 cm^2


@dataclass(frozen=True)
class PhysicalParams:
    """Global physical constants of one experiment.

    Parameters
    ----------
    mass : float
        Atom mass in kg (87Rb by default).
    omega0 : float
        Longitudinal angular trap frequency in rad/s.
    omega_perp : float
        Transverse angular trap frequency in rad/s. Only used for collision
        bookkeeping and for drawing transverse image coordinates.
    temperature : float
        Cloud temperature in K.
    sigma_el : float
        s-wave elastic cross section in m^2.
    """

    mass: float = RB87_MASS
    omega0: float = OMEGA0
    omega_perp: float = OMEGA_PERP
    temperature: float = TEMPERATURE
    sigma_el: float = SIGMA_EL

    def __post_init__(self):
        for name in ("mass", "omega0", "omega_perp", "temperature"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InputError(f"PhysicalParams.{name} must be finite and > 0, got {v!r}")
        # zero cross section is allowed and means a collisionless gas
        if not (np.isfinite(self.sigma_el) and self.sigma_el >= 0):
            raise InputError(f"PhysicalParams.sigma_el must be finite and >= 0, got {self.sigma_el!r}")

    @property
    def kT(self) -> float:
        return KB * self.temperature

    @property
    def oscillator_length(self) -> float:
        """sqrt(hbar / m w0), the ground-state length scale."""
        return math.sqrt(HBAR / (self.mass * self.omega0))

    def replace(self, **changes) -> "PhysicalParams":
        from dataclasses import replace

        return replace(self, **changes)


class Corrugation:
    """Gridded potential deviation ``dU(x)`` with a natural cubic spline.

    Outside ``[x[0], x[-1]]`` the corrugation contributes nothing; callers
    that care can ask :meth:`outside` for the mask.
    """

    def __init__(self, x, dU):
        x = np.asarray(x, dtype=float)
        dU = np.asarray(dU, dtype=float)
        if x.ndim != 1 or x.shape != dU.shape or x.size < 4:
            raise InputError("corrugation grid needs matching 1D arrays with >= 4 points")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(dU))):
            raise InputError("corrugation grid contains non-finite values")
        if np.any(np.diff(x) <= 0):
            raise InputError("corrugation grid x must be strictly increasing")
        self.x = x
        self.dU = dU
        self._spline = CubicSpline(x, dU, bc_type="natural")
        # coefficients for a direct Horner evaluation: c[k, i] multiplies (x - x_i)^(3-k)
        self._c = self._spline.c
        h = np.diff(x)
        self._uniform = bool(np.allclose(h, h[0], rtol=1e-9, atol=0.0))
        self._h = float(h[0])

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.x[0]), float(self.x[-1])

    def outside(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x < self.x[0]) | (x > self.x[-1])

    def _interval(self, x):
        if self._uniform:
            i = np.floor((x - self.x[0]) / self._h).astype(np.intp)
        else:
            i = np.searchsorted(self.x, x, side="right") - 1
        return np.clip(i, 0, self.x.size - 2)

    def __call__(self, x):
        """Return ``(dU, dF)`` with ``dF = -d(dU)/dx``; zero outside the grid."""
        x = np.asarray(x, dtype=float)
        i = self._interval(x)
        t = x - self.x[i]
        c0, c1, c2, c3 = self._c[0, i], self._c[1, i], self._c[2, i], self._c[3, i]
        u = ((c0 * t + c1) * t + c2) * t + c3
        du = (3.0 * c0 * t + 2.0 * c1) * t + c2
        out = self.outside(x)
        u = np.where(out, 0.0, u)
        f = np.where(out, 0.0, -du)
        return u, f

    def scaled(self, factor: float) -> "Corrugation":
        return Corrugation(self.x, self.dU * factor)

    def __repr__(self):
        lo, hi = self.domain
        return f"Corrugation(n={self.x.size}, domain=[{lo:.3g}, {hi:.3g}] m, max|dU|={np.abs(self.dU).max():.3g} J)"


@dataclass(frozen=True)
class Potential1D:
    """Harmonic trap with optional corrugation and quartic perturbations."""

    params: PhysicalParams = field(default_factory=PhysicalParams)
    center: float = 0.0
    corrugation: Corrugation | None = None
    quartic_scale: float = math.inf

    def __post_init__(self):
        if not np.isfinite(self.center):
            raise InputError("potential center must be finite")
        if not (self.quartic_scale > 0):
            raise InputError("quartic_scale must be > 0 (inf disables it)")

    @property
    def stiffness(self) -> float:
        """m w0^2."""
        return self.params.mass * self.params.omega0**2

    @property
    def is_harmonic(self) -> bool:
        return self.corrugation is None and math.isinf(self.quartic_scale)

    def perturbation(self, x):
        """Deviation from the pure harmonic trap: ``(dU, dF)``."""
        x = np.asarray(x, dtype=float)
        if self.corrugation is not None:
            dU, dF = self.corrugation(x)
        else:
            dU = np.zeros_like(x)
            dF = np.zeros_like(x)
        if not math.isinf(self.quartic_scale):
            s = x - self.center
            w2 = self.quartic_scale**2
            dU = dU + 0.5 * self.stiffness * s**4 / w2
            dF = dF - 2.0 * self.stiffness * s**3 / w2
        return dU, dF

    def evaluate(self, x):
        """Return ``(V, F)`` at position(s) ``x`` with ``F = -dV/dx``."""
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise InputError("potential evaluated at non-finite position")
        s = x - self.center
        k = self.stiffness
        dU, dF = self.perturbation(x)
        return 0.5 * k * s * s + dU, -k * s + dF

    def force(self, x):
        return self.evaluate(x)[1]

    def energy(self, x, p):
        """Total longitudinal energy ``p^2/2m + V(x)``."""
        V, _ = self.evaluate(x)
        return np.asarray(p) ** 2 / (2 * self.params.mass) + V

    def outside_corrugation(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.corrugation is None:
            return np.zeros(x.shape, dtype=bool)
        return self.corrugation.outside(x)

    def with_corrugation_scale(self, factor: float) -> "Potential1D":
        if self.corrugation is None:
            return self
        from dataclasses import replace

        return replace(self, corrugation=self.corrugation.scaled(factor))


def evaluate(pot: Potential1D, x):
    """Module-level alias of :meth:`Potential1D.evaluate`."""
    return pot.evaluate(x)


# wells of the measured corrugation at 5 mA (positions in m, depths in K)
SYNTH_WELL_CENTERS = (-80e-6, -30e-6, 30e-6, 80e-6)
SYNTH_WELL_DEPTHS = (-22e-9, -7e-9, -7e-9, -22e-9)
SYNTH_WELL_WIDTH = 20e-6


def synth_paper_corrugation(
    amplitude_scale: float = 1.0,
    *,
    width: float = SYNTH_WELL_WIDTH,
    extent: float = 150e-6,
    n_points: int = 601,
) -> Corrugation:
    """Smooth stand-in for the measured corrugation of the reference chip.

    Four Gaussian wells (centers -80, -30, +30, +80 um; depths 22, 7, 7,
    22 nK) of common rms width ``width``. The sum is rescaled so that
    ``max|dU| = 22 nK * kB * amplitude_scale`` exactly.
    """
    if amplitude_scale < 0:
        raise InputError("amplitude_scale must be >= 0")
    x = np.linspace(-extent, extent, n_points)
    u = np.zeros_like(x)
    for c, d in zip(SYNTH_WELL_CENTERS, SYNTH_WELL_DEPTHS):
        u += d * np.exp(-((x - c) ** 2) / (2 * width**2))
    peak = max(abs(d) for d in SYNTH_WELL_DEPTHS)
    u *= peak / np.abs(u).max()
    return Corrugation(x, KB * amplitude_scale * u)


def save_corrugation(path, corr: Corrugation, comment: str | None = None) -> None:
    lines = []
    if comment:
        lines.extend(f"# {c}" for c in comment.splitlines())
    lines.append("# x_meters\tdeltaU_joules")
    lines.extend(f"{xi:.17g}\t{ui:.17g}" for xi, ui in zip(corr.x, corr.dU))
    Path(path).write_text("\n".join(lines) + "\n")


def load_corrugation(path) -> Corrugation:
    xs, us = [], []
    for n, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InputError(f"{path}:{n}: expected two columns, got {len(parts)}")
        try:
            xs.append(float(parts[0]))
            us.append(float(parts[1]))
        except ValueError as exc:
            raise InputError(f"{path}:{n}: {exc}") from None
    return Corrugation(xs, us)
