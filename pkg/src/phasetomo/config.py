"""Experiment configuration: INI-style ``key = value`` files with sections.

All values are SI unless the key name says otherwise (``*_hz``, ``mass_u``).
Unknown sections or keys are rejected so that typos do not pass silently.
"""
from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from scipy import constants as _const

from .errors import InputError
from .imaging import ImagingSettings
from .potential import PhysicalParams
from .quantum import QuantumTomographySettings, SqueezingSettings, WaveGrid
from .tomography import GridSpec
from .wire import EdgeDefect, WireGeometry, uniform_shift

KINDS = (
    "classical_oscillation",
    "harmonic_control",
    "quantum_wigner",
    "squeezing",
    "corrugation_scan",
    "period_analysis",
)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int = 1
    params: PhysicalParams = field(default_factory=PhysicalParams)
    # potential
    corrugation: str = "synth"
    corrugation_scale: float = 1.0
    normalize_span: float | None = None
    quartic_scale: float = math.inf
    # ensemble and evolution
    n_particles: int = 20000
    x_shift: float = 85e-6
    t1: float = 0.5
    dt: float = 10e-6
    method: str = "integrate"
    collisions: bool = False
    cell_size: float = 5e-6
    collision_interval: float = 1e-3
    # projection schedule and imaging
    n_angles: int = 13
    angle_spacing: float | None = None
    use_imaging: bool = True
    repeats: int = 1
    imaging: ImagingSettings = field(default_factory=ImagingSettings)
    # reconstruction
    k_c: float = 0.43e6
    grid: GridSpec = field(default_factory=GridSpec)
    mlem_iterations: int = 50
    # quantum
    superposition_k: float = 2 * math.pi / 2e-6
    sigma: float | None = None
    wave_grid: WaveGrid = field(default_factory=WaveGrid)
    quantum: QuantumTomographySettings = field(default_factory=QuantumTomographySettings)
    squeezing: SqueezingSettings = field(default_factory=SqueezingSettings)
    # wire
    wire: WireGeometry = field(default_factory=WireGeometry)
    distances: tuple[float, ...] = ()
    # period analysis
    energy_points: int = 41
    energy_span: float = 2.0
    # bookkeeping
    output_dir: str = "out"
    source_sha256: str = ""

    @property
    def angles(self) -> list[float]:
        step = self.angle_spacing if self.angle_spacing is not None else math.pi / self.n_angles
        return [i * step for i in range(self.n_angles)]

    def validate(self) -> "ExperimentConfig":
        if self.kind not in KINDS:
            raise InputError(f"unknown experiment kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if not 0 <= self.seed < 2**64:
            raise InputError("seed must be an unsigned 64-bit integer")
        for name in ("t1", "dt", "cell_size", "collision_interval"):
            if getattr(self, name) < 0:
                raise InputError(f"{name} must be >= 0")
        if self.quantum.t_f < 0 or self.squeezing.t_max < 0:
            raise InputError("times must be >= 0")
        if self.n_angles < 2:
            raise InputError("n_angles must be >= 2")
        ang = self.angles
        if ang[-1] >= math.pi or (self.angle_spacing is not None and self.angle_spacing <= 0):
            raise InputError("projection angles must lie in [0, pi)")
        if self.method not in ("integrate", "angle_evolution"):
            raise InputError(f"unknown evolution method {self.method!r}")
        if self.corrugation not in ("none", "synth") and not Path(self.corrugation).is_file():
            raise InputError(f"corrugation file not found: {self.corrugation}")
        if self.n_particles < 1 or self.repeats < 1 or self.mlem_iterations < 1:
            raise InputError("n_particles, repeats and mlem_iterations must be >= 1")
        return self


# --- parsing --------------------------------------------------------------------


def _bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise InputError(f"not a boolean: {v!r}")


def _float(v: str) -> float:
    s = v.strip().lower()
    if s in ("pi", "+pi"):
        return math.pi
    if "pi/" in s:
        num, den = s.split("pi/")
        return (float(num.rstrip("*")) if num.strip() else 1.0) * math.pi / float(den)
    try:
        return float(s)
    except ValueError:
        raise InputError(f"not a number: {v!r}") from None


def _floats(v: str) -> tuple[float, ...]:
    return tuple(_float(t) for t in v.replace(",", " ").split())


def _opt_float(v: str) -> float | None:
    return None if v.strip().lower() in ("", "none", "auto") else _float(v)


def _defects(v: str) -> tuple[EdgeDefect, ...]:
    """``wavelength:amplitude[:stretch[:phase]]`` items separated by ``;``."""
    out = []
    for item in v.split(";"):
        item = item.strip()
        if not item:
            continue
        parts = [_float(t) for t in item.split(":")]
        if not 2 <= len(parts) <= 4:
            raise InputError(f"bad edge defect {item!r}")
        out.append(EdgeDefect(*parts))
    return tuple(out)


# section -> key -> (target, converter); targets are dotted attribute paths
_SCHEMA = {
    "experiment": {
        "kind": ("kind", str),
        "seed": ("seed", int),
        "output_dir": ("output_dir", str),
    },
    "physics": {
        "mass_u": ("params.mass", lambda v: _float(v) * _const.atomic_mass),
        "mass": ("params.mass", _float),
        "trap_frequency_hz": ("params.omega0", lambda v: 2 * math.pi * _float(v)),
        "transverse_frequency_hz": ("params.omega_perp", lambda v: 2 * math.pi * _float(v)),
        "temperature": ("params.temperature", _float),
        "sigma_el": ("params.sigma_el", _float),
    },
    "potential": {
        "corrugation": ("corrugation", str),
        "corrugation_scale": ("corrugation_scale", _float),
        "normalize_span": ("normalize_span", _opt_float),
        "quartic_scale": ("quartic_scale", _float),
    },
    "ensemble": {
        "n_particles": ("n_particles", int),
        "x_shift": ("x_shift", _float),
    },
    "evolution": {
        "t1": ("t1", _float),
        "dt": ("dt", _float),
        "method": ("method", str),
        "collisions": ("collisions", _bool),
        "cell_size": ("cell_size", _float),
        "collision_interval": ("collision_interval", _float),
    },
    "projection": {
        "count": ("n_angles", int),
        "spacing": ("angle_spacing", _opt_float),
    },
    "imaging": {
        "enabled": ("use_imaging", _bool),
        "repeats": ("repeats", int),
        "psf_sigma": ("imaging.psf_sigma", _float),
        "pixel": ("imaging.pixel", _float),
        "noise": ("imaging.noise", _float),
        "noise_relative": ("imaging.noise_relative", _bool),
        "x_range": ("imaging.x_range", _floats),
        "y_half_width": ("imaging.y_half_width", _float),
    },
    "reconstruction": {
        "k_c": ("k_c", _float),
        "nq": ("grid.nq", int),
        "np": ("grid.np", int),
        "q_range": ("grid.q_range", _floats),
        "p_range": ("grid.p_range", _floats),
        "mlem_iterations": ("mlem_iterations", int),
    },
    "quantum": {
        "k": ("superposition_k", _float),
        "sigma": ("sigma", _opt_float),
        "grid_points": ("wave_grid.n", int),
        "x_range": ("wave_grid.x_range", _floats),
        "n_angles": ("quantum.n_angles", int),
        "t_f": ("quantum.t_f", _float),
        "k_c": ("quantum.k_c", _float),
        "hold_dt": ("quantum.hold_dt", _float),
        "tof_box": ("quantum.tof_box", _floats),
        "u_grid": ("quantum.u_grid", _floats),
        "nq": ("quantum.out.nq", int),
        "np": ("quantum.out.np", int),
        "q_range": ("quantum.out.q_range", _floats),
        "p_range": ("quantum.out.p_range", _floats),
    },
    "squeezing": {
        "quartic_scale": ("squeezing.quartic_scale", _float),
        "shift": ("squeezing.shift", _float),
        "t_max": ("squeezing.t_max", _float),
        "dt": ("squeezing.dt", _float),
        "grid_points": ("squeezing.grid.n", int),
        "x_range": ("squeezing.grid.x_range", _floats),
        "strobe_offset": ("squeezing.strobe_offset", _float),
    },
    "wire": {
        "width": ("wire.width", _float),
        "thickness": ("wire.thickness", _float),
        "current": ("wire.current", _float),
        "distance": ("wire.distance", _float),
        "left": ("wire.edge_left", _defects),
        "right": ("wire.edge_right", _defects),
        "both": ("wire.both", _defects),
        "shift": ("wire.shift", _floats),
        "distances": ("distances", _floats),
        "n_trans": ("wire.n_trans", int),
        "points_per_wavelength": ("wire.points_per_wavelength", int),
    },
    "period": {
        "energy_points": ("energy_points", int),
        "energy_span": ("energy_span", _float),
    },
}


def _set(obj, path: list[str], value):
    if len(path) == 1:
        return replace(obj, **{path[0]: value})
    child = getattr(obj, path[0])
    return replace(obj, **{path[0]: _set(child, path[1:], value)})


def parse_config(text: str, kind: str | None = None, base_dir: Path | None = None) -> ExperimentConfig:
    """Parse config text. ``kind`` (from the CLI subcommand) must match the file if both are given."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise InputError(f"config syntax error: {exc}") from None
    file_kind = cp.get("experiment", "kind", fallback=None)
    if kind and file_kind and kind != file_kind:
        raise InputError(f"config is for {file_kind!r} but subcommand is {kind!r}")
    cfg = ExperimentConfig(kind=kind or file_kind or "")
    wire_extra: dict[str, object] = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise InputError(f"unknown config section [{section}]")
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                raise InputError(f"unknown key {key!r} in [{section}]")
            target, conv = _SCHEMA[section][key]
            try:
                value = conv(raw)
            except InputError:
                raise
            except (TypeError, ValueError) as exc:
                raise InputError(f"[{section}] {key}: {exc}") from None
            if target in ("wire.both", "wire.shift"):
                wire_extra[target] = value
                continue
            if target == "corrugation" and value not in ("none", "synth") and base_dir is not None:
                p = Path(value)
                value = str(p if p.is_absolute() else base_dir / p)
            cfg = _set(cfg, target.split("."), value)
    if "wire.both" in wire_extra:
        d = wire_extra["wire.both"]
        cfg = replace(cfg, wire=replace(cfg.wire, edge_left=cfg.wire.edge_left + d, edge_right=cfg.wire.edge_right + d))
    if "wire.shift" in wire_extra:
        wl, ptp = wire_extra["wire.shift"]
        e = uniform_shift(wl, ptp)
        cfg = replace(
            cfg,
            wire=replace(
                cfg.wire,
                edge_left=cfg.wire.edge_left + e["edge_left"],
                edge_right=cfg.wire.edge_right + e["edge_right"],
            ),
        )
    sha = hashlib.sha256(text.encode()).hexdigest()
    return replace(cfg, source_sha256=sha).validate()


def load_config(path, kind: str | None = None) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"config file not found: {path}")
    return parse_config(p.read_text(), kind, p.parent)


def config_summary(cfg: ExperimentConfig) -> dict[str, str]:
    """Flat view of the scalar settings (for reports)."""
    out = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, (int, float, str, bool)) or v is None:
            out[f.name] = repr(v) if isinstance(v, float) else str(v)
    return out
