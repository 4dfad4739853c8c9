"""The named experiment pipelines used by the command-line front end.

Each runner takes an :class:`ExperimentConfig` and returns an
:class:`Outcome`: an ordered report plus a mapping of artifact names to
writer callables. Nothing here touches the filesystem directly, so the CLI
can stage outputs and publish them atomically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from . import dynamics as dyn
from . import imaging as img
from . import quantum as qm
from . import tomography as tomo
from . import wire
from .config import ExperimentConfig
from .errors import InputError
from .potential import KB, Potential1D, load_corrugation, save_corrugation, synth_paper_corrugation


@dataclass
class Outcome:
    report: dict = field(default_factory=dict)
    artifacts: dict[str, Callable[[str], None]] = field(default_factory=dict)


def fmt(v) -> str:
    """Deterministic text for report values."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return ",".join(fmt(x) for x in v)
    return str(v)


# --- shared helpers ----------------------------------------------------------------


def release_energy_stats(params, x_shift: float) -> tuple[float, float]:
    """Mean energy offset ``E_shift`` and spread ``dE`` of a cloud released from ``x_shift``."""
    E_shift = 0.5 * params.mass * params.omega0**2 * x_shift**2
    kT = params.kT
    return E_shift, math.sqrt(kT * (kT + 2 * E_shift))


def span_of(pot: Potential1D, energies) -> float:
    c = dyn.frequency_shift_curve(pot, energies)
    return float(c.shift.max() - c.shift.min())


def normalize_span(pot: Potential1D, target: float, energies) -> tuple[Potential1D, float]:
    """Rescale the corrugation so ``max - min`` of ``dw/w0`` over ``energies`` equals ``target``."""
    if pot.corrugation is None:
        raise InputError("normalize_span needs a corrugation")
    base = span_of(pot, energies)
    if base <= 0:
        raise InputError("corrugation produces no frequency dispersion to normalize")
    lo, hi = 0.25 * target / base, 4.0 * target / base

    def f(s):
        return span_of(pot.with_corrugation_scale(s), energies) - target

    scale = brentq(f, lo, hi, xtol=1e-6, rtol=1e-10)
    return pot.with_corrugation_scale(scale), scale


def build_potential(cfg: ExperimentConfig, corrugated: bool = True) -> tuple[Potential1D, dict]:
    info: dict = {}
    corr = None
    if corrugated and cfg.corrugation != "none":
        corr = synth_paper_corrugation() if cfg.corrugation == "synth" else load_corrugation(cfg.corrugation)
        corr = corr.scaled(cfg.corrugation_scale)
    pot = Potential1D(cfg.params, corrugation=corr, quartic_scale=cfg.quartic_scale)
    if corr is not None and cfg.normalize_span is not None:
        E_shift, dE = release_energy_stats(cfg.params, cfg.x_shift)
        pot, scale = normalize_span(pot, cfg.normalize_span, np.linspace(E_shift - dE, E_shift + dE, 21))
        info["span_scale"] = scale
    if pot.corrugation is not None:
        info["corrugation_max_nK"] = float(np.abs(pot.corrugation.dU).max() / KB * 1e9)
    return pot, info


def curve_for(pot: Potential1D, energies) -> dyn.FrequencyShiftCurve:
    lo, hi = float(np.min(energies)), float(np.max(energies))
    return dyn.frequency_shift_curve(pot, np.linspace(lo * (1 - 1e-3), hi * (1 + 1e-3), 161))


def _grid_writers(out: Outcome, name: str, grid: tomo.PhaseSpaceGrid, signed: bool = False):
    out.artifacts[f"{name}.psgrid"] = lambda p, g=grid: tomo.save_grid(p, g)
    if signed:
        lo, hi = float(grid.values.min()), float(grid.values.max())
        shifted = grid.values - lo
        note = f"signed map: level 0 = {lo:.6g}, level 255 = {hi:.6g} m^-2"
        out.artifacts[f"{name}.pgm"] = lambda p, v=shifted, c=note: img.write_pgm(p, v, c)
    else:
        top = float(grid.values.max())
        note = f"q {grid.q_range[0]:.4g}..{grid.q_range[1]:.4g} m, pbar {grid.p_range[0]:.4g}..{grid.p_range[1]:.4g} m, max {top:.6g} m^-2"
        out.artifacts[f"{name}.pgm"] = lambda p, v=grid.values, c=note: img.write_pgm(p, v, c)


# --- classical pipelines --------------------------------------------------------------


def _classical(cfg: ExperimentConfig, corrugated: bool) -> Outcome:
    out = Outcome()
    rep = out.report
    pot, info = build_potential(cfg, corrugated)
    rep.update(info)
    params = cfg.params
    ens0 = dyn.sample_ensemble(params, cfg.x_shift, cfg.n_particles, cfg.seed)
    run: dict = {}
    if cfg.method == "angle_evolution":
        E = pot.energy(ens0.x, ens0.p)
        curve = curve_for(pot, E)
        ens = dyn.angle_evolution(ens0, curve, cfg.t1, pot)
        run["n_outside_corrugation"] = int(pot.outside_corrugation(ens0.x).sum())
    else:
        colls = dyn.CollisionSettings(cfg.cell_size, cfg.collision_interval) if cfg.collisions else None
        ens = dyn.integrate(ens0, pot, cfg.dt, cfg.t1, collisions=colls, report=run)
    rep["n_particles"] = ens.N
    rep["t1"] = cfg.t1
    rep["method"] = cfg.method
    rep["n_outside_corrugation"] = run.get("n_outside_corrugation", 0)
    if cfg.collisions and cfg.method == "integrate":
        rep["n_collisions"] = ens.n_collisions
        rep["collision_rate_per_atom"] = 2 * ens.n_collisions / (ens.N * cfg.t1) if cfg.t1 > 0 else 0.0
    em = tomo.ensemble_metrics(ens.x, ens.pbar)
    rep["ensemble_anisotropy"] = em["anisotropy"]
    rep["ensemble_angular_spread"] = em["angular_spread"]
    rep["ensemble_emittance_ratio"] = dyn.emittance(ens) / dyn.emittance(ens0)

    angles = np.array(cfg.angles)
    if cfg.use_imaging:
        sino = img.imaged_sinogram(ens, angles, cfg.imaging, cfg.seed, cfg.repeats)
    else:
        lo, hi = cfg.imaging.x_range
        n = int(round((hi - lo) / cfg.imaging.pixel))
        x = lo + (np.arange(n) + 0.5) * cfg.imaging.pixel
        sino = tomo.make_sinogram(ens, angles, x)
    fbp = tomo.fbp_reconstruct(sino, cfg.k_c, cfg.grid)
    mlem = tomo.mlem_reconstruct(sino, cfg.mlem_iterations, cfg.grid)
    direct = tomo.PhaseSpaceGrid.from_samples(ens.x, ens.pbar, cfg.grid, smooth_cells=1.0)
    for name, g in (("fbp", fbp), ("mlem", mlem)):
        m = tomo.grid_metrics(g, direct)
        rep[f"{name}_anisotropy"] = m["anisotropy"]
        rep[f"{name}_anisotropy_full"] = m["anisotropy_full"]
        rep[f"{name}_angular_spread"] = m["angular_spread"]
        rep[f"{name}_circular_std"] = m["circular_std"]
        rep[f"{name}_overlap_direct"] = m["overlap"]
    rep["fbp_clipped_fraction"] = fbp.clipped_fraction
    rep["mlem_final_kl"] = mlem.info["kl_history"][-1]
    # headline numbers
    rep["anisotropy"] = rep["fbp_anisotropy"]
    rep["angular_spread"] = rep["ensemble_angular_spread"]

    out.artifacts["ensemble_final.txt"] = lambda p, e=ens: dyn.save_ensemble(p, e)
    out.artifacts["sinogram.txt"] = lambda p, s=sino: tomo.save_sinogram(p, s)
    _grid_writers(out, "fbp", fbp)
    _grid_writers(out, "mlem", mlem)
    _grid_writers(out, "direct", direct)
    if pot.corrugation is not None:
        out.artifacts["corrugation.txt"] = lambda p, c=pot.corrugation: save_corrugation(p, c, "corrugation used")
    return out


def classical_oscillation(cfg: ExperimentConfig) -> Outcome:
    return _classical(cfg, corrugated=True)


def harmonic_control(cfg: ExperimentConfig) -> Outcome:
    return _classical(cfg, corrugated=False)


# --- quantum pipelines ------------------------------------------------------------------


def quantum_wigner(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    rep = out.report
    params = cfg.params
    sigma = cfg.sigma if cfg.sigma is not None else params.oscillator_length
    psi = qm.init_superposition(sigma, cfg.superposition_k, cfg.wave_grid, params)
    pot = Potential1D(params)
    rec = qm.quantum_tomography(psi, pot, cfg.quantum)
    ref = qm.wigner_on(psi, cfg.quantum.out)
    mask = qm.fringe_mask(ref, 1.5 * sigma)
    fid = qm.wigner_fidelity(rec, ref)
    theta_f, stretch = qm.tof_angle_and_stretch(params.omega0, cfg.quantum.t_f)
    rep["sigma"] = sigma
    rep["k"] = cfg.superposition_k
    rep["n_angles"] = cfg.quantum.n_angles
    rep["t_f"] = cfg.quantum.t_f
    rep["theta_f"] = theta_f
    rep["stretch"] = stretch
    rep["l2_error_fringe"] = tomo.l2_error(rec, ref, mask)
    rep["l2_error_all"] = tomo.l2_error(rec, ref)
    rep["rec_min_over_max"] = float(rec.values.min() / rec.values.max())
    rep["direct_min_over_max"] = float(ref.values.min() / ref.values.max())
    rep.update({f"wigner_{k}": v for k, v in fid.items()})
    out.artifacts["psi0.txt"] = lambda p, w=psi: qm.save_wavefunction(p, w)
    out.artifacts["sinogram.txt"] = lambda p, s=rec.info["sinogram"]: tomo.save_sinogram(p, s)
    _grid_writers(out, "wigner_reconstructed", rec, signed=True)
    _grid_writers(out, "wigner_direct", ref, signed=True)
    return out


def squeezing(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    rep = out.report
    res = qm.squeezing_study(cfg.params, cfg.squeezing)
    rep["quartic_scale"] = cfg.squeezing.quartic_scale
    rep["shift"] = cfg.squeezing.shift
    rep["dx0"] = res["dx0"]
    rep["t_min"] = res["t_min"]
    rep["min_dx_ratio"] = res["ratio"]
    rep["period_change"] = res["period_change"]
    rep["n_turning_points"] = len(res["turning_times"])
    traj = res["trajectory"]

    def write_traj(p, tr=traj):
        rows = ["# t_s\tmean_x_m\tdx_m\tdp_kgms"]
        rows += [f"{a:.17g}\t{b:.17g}\t{c:.17g}\t{d:.17g}" for a, b, c, d in zip(tr["t"], tr["mean_x"], tr["dx"], tr["dp"])]
        with open(p, "w") as fh:
            fh.write("\n".join(rows) + "\n")

    def write_strobe(p, r=res):
        rows = ["# t_s\tdx_m"] + [f"{a:.17g}\t{b:.17g}" for a, b in zip(r["strobe_t"], r["strobe_dx"])]
        with open(p, "w") as fh:
            fh.write("\n".join(rows) + "\n")

    out.artifacts["moments.txt"] = write_traj
    out.artifacts["stroboscopic_dx.txt"] = write_strobe
    return out


# --- analytics --------------------------------------------------------------------------


def corrugation_scan(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    rep = out.report
    geom = cfg.wire
    if not geom.edge_left and not geom.edge_right:
        raise InputError("corrugation_scan needs at least one edge defect ([wire] left/right/both/shift)")
    amps = wire.wire_corrugation_amplitude(geom)
    rep["distance"] = geom.distance
    rep["current"] = geom.current
    for wl, a in amps:
        rep[f"amplitude_nK_at_{wl * 1e6:g}um"] = a * 1e9
    rep["max_amplitude_nK"] = max(a for _, a in amps) * 1e9
    if cfg.distances:
        table = wire.amplitude_vs_distance(geom, cfg.distances)

        def write_table(p, t=table, d=cfg.distances, w=[wl for wl, _ in amps]):
            rows = ["# distance_m\t" + "\t".join(f"amp_K_{x * 1e6:g}um" for x in w)]
            rows += [f"{di:.17g}\t" + "\t".join(f"{v:.17g}" for v in row) for di, row in zip(d, t)]
            with open(p, "w") as fh:
                fh.write("\n".join(rows) + "\n")

        out.artifacts["amplitude_vs_distance.txt"] = write_table
    return out


def period_analysis(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    rep = out.report
    pot, info = build_potential(cfg)
    rep.update(info)
    params = cfg.params
    E_shift, dE = release_energy_stats(params, cfg.x_shift)
    lo = max(E_shift - cfg.energy_span * dE, 0.05 * E_shift)
    E = np.linspace(lo, E_shift + cfg.energy_span * dE, cfg.energy_points)
    curve = dyn.frequency_shift_curve(pot, E)
    T0 = 2 * math.pi / params.omega0
    rows = []
    for e in curve.E:
        Td = dyn.period_direct(pot, float(e))
        try:
            ex = dyn.period_perturbative(pot, float(e), "exact_integral")
        except Exception:  # noqa: BLE001 - recorded as missing
            ex = math.nan
        try:
            lo_ = dyn.period_perturbative(pot, float(e), "lowest_order")
        except Exception:  # noqa: BLE001
            lo_ = math.nan
        rows.append((e, Td - T0, ex, lo_))
    arr = np.array(rows)
    inside = (curve.E >= E_shift - dE) & (curve.E <= E_shift + dE)
    rep["E_shift_J"] = E_shift
    rep["dE_J"] = dE
    rep["n_energies"] = curve.E.size
    rep["n_gaps"] = len(curve.gaps)
    rep["shift_min_in_span"] = float(curve.shift[inside].min())
    rep["shift_max_in_span"] = float(curve.shift[inside].max())
    rep["shift_at_low_end"] = float(curve.shift[0])
    rep["shift_at_high_end"] = float(curve.shift[-1])
    ok = np.isfinite(arr[:, 2])
    if ok.any():
        rep["max_rel_diff_exact_vs_direct"] = float(
            np.max(np.abs(arr[ok, 2] - arr[ok, 1]) / np.maximum(np.abs(arr[ok, 1]), 1e-300))
        )
    # quartic closed-form check at 15 um
    q = Potential1D(params, quartic_scale=100e-6)
    xm = 15e-6
    E_q = 0.5 * params.mass * params.omega0**2 * xm**2
    rep["quartic_lowest_order_dT_over_T"] = dyn.period_perturbative(q, E_q, "lowest_order") / T0
    rep["quartic_closed_form_dT_over_T"] = -0.75 * (xm / 100e-6) ** 2
    rep["quartic_direct_dT_over_T"] = dyn.period_direct(q, E_q + 0.5 * params.mass * params.omega0**2 * xm**4 / 100e-6**2) / T0 - 1

    def write_curve(p, a=arr, c=curve):
        lines = ["# E_J\tdw_over_w0\tdT_direct_s\tdT_exact_s\tdT_lowest_s"]
        lines += [f"{r[0]:.17g}\t{s:.17g}\t{r[1]:.17g}\t{r[2]:.17g}\t{r[3]:.17g}" for r, s in zip(a, c.shift)]
        with open(p, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    out.artifacts["frequency_shift.txt"] = write_curve
    if pot.corrugation is not None:
        out.artifacts["corrugation.txt"] = lambda p, c=pot.corrugation: save_corrugation(p, c, "corrugation used")
    return out


RUNNERS = {
    "classical_oscillation": classical_oscillation,
    "harmonic_control": harmonic_control,
    "quantum_wigner": quantum_wigner,
    "squeezing": squeezing,
    "corrugation_scan": corrugation_scan,
    "period_analysis": period_analysis,
}


def run_experiment(cfg: ExperimentConfig) -> Outcome:
    return RUNNERS[cfg.kind](cfg)


__all__ = ["Outcome", "RUNNERS", "run_experiment", "normalize_span", "release_energy_stats", "fmt", "replace"]
