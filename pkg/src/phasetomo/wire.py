"""Corrugation amplitudes produced by imperfect wire edges.

The wire runs along x with its top surface at z = 0 and the atoms at
height ``distance`` above its center line. It is cut into ``n_trans`` x
``n_thick`` straight-segment filaments that each carry an equal share of
the current. A filament's transverse offset follows the edge displacement
profiles, linearly interpolated across the width, so a displacement of both
edges moves the whole current path while a displacement of one edge only
redistributes it.

The magnetic potential change is ``mu * (dB . b)`` with ``b`` the bias
(trap-bottom field) direction, valid when the perturbation is small
compared with the bias field.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import constants as _const

from .errors import InputError, RefinementError
from .potential import KB, MU_B

MU0 = _const.mu_0


@dataclass(frozen=True)
class EdgeDefect:
    """One periodic edge imperfection.

    ``transverse_amplitude`` displaces the edge sideways as
    ``a sin(2 pi x / wavelength + phase)``. ``longitudinal_stretch`` warps
    the x coordinate of every other component on the same edge by the same
    sinusoid, which is how a locally stretched period of a finer modulation
    is represented.
    """

    wavelength: float
    transverse_amplitude: float = 0.0
    longitudinal_stretch: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if not (self.wavelength > 0):
            raise InputError("defect wavelength must be > 0")


@dataclass(frozen=True)
class WireGeometry:
    width: float = 8e-6
    thickness: float = 0.5e-6
    current: float = 5e-3
    distance: float = 20e-6
    edge_left: tuple[EdgeDefect, ...] = ()
    edge_right: tuple[EdgeDefect, ...] = ()
    bias_direction: tuple[float, float, float] = (1.0, 0.0, 0.0)
    magnetic_moment: float = MU_B
    n_trans: int = 12
    n_thick: int = 2
    points_per_wavelength: int = 48

    def __post_init__(self):
        for name in ("width", "thickness", "current", "distance"):
            if not (getattr(self, name) > 0):
                raise InputError(f"WireGeometry.{name} must be > 0")
        b = np.asarray(self.bias_direction, dtype=float)
        if b.shape != (3,) or not np.isclose(np.linalg.norm(b), 1.0):
            raise InputError("bias_direction must be a 3D unit vector")


def uniform_shift(wavelength: float, peak_to_peak: float, phase: float = 0.0) -> dict:
    """Edge lists for a rigid sideways shift of the whole wire."""
    d = (EdgeDefect(wavelength, 0.5 * peak_to_peak, 0.0, phase),)
    return {"edge_left": d, "edge_right": d}


def segment_field(a, b, points, current):
    """Field of straight segments ``a -> b`` (each ``(S, 3)``) at ``points`` ``(P, 3)``.

    Exact finite-segment Biot-Savart expression; returns ``(P, 3)`` in tesla.
    """
    out = np.zeros((points.shape[0], 3))
    chunk = max(1, 2_000_000 // max(1, a.shape[0]))
    for s in range(0, points.shape[0], chunk):
        p = points[s : s + chunk]
        r1 = p[:, None, :] - a[None]
        r2 = p[:, None, :] - b[None]
        n1 = np.sqrt(np.einsum("psk,psk->ps", r1, r1))
        n2 = np.sqrt(np.einsum("psk,psk->ps", r2, r2))
        dot = np.einsum("psk,psk->ps", r1, r2)
        f = (n1 + n2) / (n1 * n2 * (n1 * n2 + dot))
        cr = np.cross(r1, r2)
        out[s : s + chunk] = np.einsum("psk,ps->pk", cr, f)
    return MU0 * current / (4 * np.pi) * out


def _edge_profile(x, defects, active_transverse, active_stretch):
    warp = np.zeros_like(x)
    for i, d in enumerate(defects):
        if i in active_stretch and d.longitudinal_stretch:
            warp += d.longitudinal_stretch * np.sin(2 * np.pi * x / d.wavelength + d.phase)
    u = x - warp
    y = np.zeros_like(x)
    for i, d in enumerate(defects):
        if i in active_transverse and d.transverse_amplitude:
            y += d.transverse_amplitude * np.sin(2 * np.pi * u / d.wavelength + d.phase)
    return y


def _filaments(geom: WireGeometry, x, left_active, right_active, n_trans, n_thick):
    yl = _edge_profile(x, geom.edge_left, *left_active)
    yr = _edge_profile(x, geom.edge_right, *right_active)
    a_list, b_list = [], []
    depth = geom.distance
    for i in range(n_trans):
        s = (i + 0.5) / n_trans
        y = -0.5 * geom.width + s * geom.width + (1 - s) * yl + s * yr
        for j in range(n_thick):
            z = -depth - (j + 0.5) / n_thick * geom.thickness
            pts = np.column_stack([x, y, np.full_like(x, z)])
            a_list.append(pts[:-1])
            b_list.append(pts[1:])
    return np.concatenate(a_list), np.concatenate(b_list)


def _bias_potential(geom, wavelength, active, n_trans, n_thick, ppw, n_eval):
    """Potential (K) along one period at the atom height for the active defect set."""
    all_wl = [d.wavelength for d in geom.edge_left + geom.edge_right]
    finest = min(all_wl) if all_wl else wavelength
    longest = max(all_wl) if all_wl else wavelength
    half = max(6 * longest, 30 * geom.distance)
    n = int(math.ceil(2 * half / finest * ppw)) + 1
    x = np.linspace(-half, half, n)
    a, b = _filaments(geom, x, active[0], active[1], n_trans, n_thick)
    xe = np.linspace(-0.5 * wavelength, 0.5 * wavelength, n_eval, endpoint=False)
    pts = np.column_stack([xe, np.zeros_like(xe), np.zeros_like(xe)])
    B = segment_field(a, b, pts, geom.current / (n_trans * n_thick))
    return geom.magnetic_moment * (B @ np.asarray(geom.bias_direction)) / KB


def _component_groups(geom: WireGeometry):
    groups: dict[float, dict[str, list[int]]] = {}
    for side, defects in (("left", geom.edge_left), ("right", geom.edge_right)):
        for i, d in enumerate(defects):
            groups.setdefault(d.wavelength, {"left": [], "right": []})[side].append(i)
    return groups


def _active_sets(geom, group, with_group=True):
    """Per-edge ``(transverse, stretch)`` index sets for one evaluation.

    A stretch component only matters through the finer modulations it warps,
    so when the group carries a stretch the other transverse components of
    that edge are switched on as carriers.
    """
    sides = []
    for side, defects in (("left", geom.edge_left), ("right", geom.edge_right)):
        mine = set(group[side])
        carriers = {i for i, d in enumerate(defects) if d.transverse_amplitude and i not in mine}
        stretch = {i for i in mine if defects[i].longitudinal_stretch}
        transverse = {i for i in mine if defects[i].transverse_amplitude}
        if stretch:
            transverse |= carriers
        if not with_group:
            transverse, stretch = transverse - mine, set()
        sides.append((transverse, stretch))
    return sides


def _amplitudes(geom, n_trans, n_thick, ppw, n_eval=64):
    out = []
    for wl, group in _component_groups(geom).items():
        on = _active_sets(geom, group)
        u = _bias_potential(geom, wl, on, n_trans, n_thick, ppw, n_eval)
        if any(s for _, s in on):
            u = u - _bias_potential(geom, wl, _active_sets(geom, group, False), n_trans, n_thick, ppw, n_eval)
        out.append((wl, float(u.max() - u.mean())))
    return out


def wire_corrugation_amplitude(geom: WireGeometry, *, check_refinement: bool = True):
    """Peak-to-mean corrugation amplitude (in K) for each defect wavelength.

    Returns a list of ``(wavelength, amplitude_K)`` in order of first
    appearance. Defects sharing a wavelength on the two edges are evaluated
    together, so a rigid shift is specified as the same component on both
    edges (see :func:`uniform_shift`).
    """
    if geom.distance < geom.width / 4:
        raise InputError(
            f"distance {geom.distance:.3g} m is below width/4 = {geom.width / 4:.3g} m; filament model invalid"
        )
    fine = _amplitudes(geom, geom.n_trans, geom.n_thick, geom.points_per_wavelength)
    if check_refinement:
        coarse = _amplitudes(
            geom, max(2, geom.n_trans // 2), max(1, geom.n_thick // 2), max(8, geom.points_per_wavelength // 2)
        )
        for (wl, af), (_, ac) in zip(fine, coarse):
            scale = max(abs(af), 1e-9)  # amplitudes below 1e-9 K are numerically zero
            err = abs(af - ac) / scale
            if err > 0.10:
                raise RefinementError(
                    f"wavelength {wl:.3g} m: halving the discretization changes the amplitude by "
                    f"{100 * err:.1f}% (fine {af:.4g} K, coarse {ac:.4g} K); increase n_trans/points_per_wavelength"
                )
    return fine


def amplitude_vs_distance(geom: WireGeometry, distances) -> np.ndarray:
    """Amplitude table ``(len(distances), n_wavelengths)`` in K."""
    rows = []
    for d in distances:
        rows.append([a for _, a in wire_corrugation_amplitude(replace(geom, distance=float(d)), check_refinement=False)])
    return np.asarray(rows)
