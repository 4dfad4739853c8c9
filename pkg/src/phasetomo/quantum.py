"""Single-particle wave packets: split-operator evolution, Wigner functions,
time-of-flight tomography and the quartic squeezing study.

Wigner functions are returned on ``(x, pbar)`` grids with
``pbar = p / (m w0)``, the same units the classical tomography uses, so the
density carries an extra factor ``m w0`` relative to ``W(x, p)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.signal import argrelextrema

from .errors import BoundaryBreachError, GridError, InputError
from .potential import HBAR, PhysicalParams, Potential1D
from .tomography import GridSpec, PhaseSpaceGrid, Sinogram, fbp_reconstruct, resample


@dataclass(frozen=True)
class WaveGrid:
    """Periodic position grid ``x_j = x_min + j dx``, ``j < n``; ``x_max`` is excluded."""

    n: int = 4096
    x_range: tuple[float, float] = (-80e-6, 80e-6)

    def __post_init__(self):
        if self.n < 8 or not self.x_range[1] > self.x_range[0]:
            raise GridError("wave grid needs n >= 8 and a positive extent")

    @property
    def dx(self) -> float:
        return (self.x_range[1] - self.x_range[0]) / self.n

    @property
    def x(self) -> np.ndarray:
        return self.x_range[0] + self.dx * np.arange(self.n)

    @property
    def k(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.n, self.dx)


def _occupied(weights: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    return weights > tol * weights.sum()


@dataclass(frozen=True, eq=False)
class WaveFunction1D:
    psi: np.ndarray
    grid: WaveGrid
    t: float = 0.0
    params: PhysicalParams = field(default_factory=PhysicalParams)

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=complex)
        if psi.shape != (self.grid.n,):
            raise InputError(f"psi has shape {psi.shape}, grid expects ({self.grid.n},)")
        if not np.all(np.isfinite(psi)):
            raise InputError("psi must be finite")
        norm = np.sum(np.abs(psi) ** 2) * self.grid.dx
        if abs(norm - 1.0) > 1e-9:
            raise InputError(f"psi is not normalized (norm = {norm:.12g})")
        pk = np.abs(np.fft.fft(psi)) ** 2
        kmax = np.abs(self.grid.k[_occupied(pk)]).max()
        if kmax * self.grid.dx >= np.pi / 4:
            raise GridError(
                f"grid does not resolve the occupied momenta: k_max dx = {kmax * self.grid.dx:.3f} >= pi/4"
            )
        object.__setattr__(self, "psi", psi)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.psi) ** 2

    def momentum_density(self) -> tuple[np.ndarray, np.ndarray]:
        """``(p, |psi(p)|^2)`` sorted by ``p``, normalized to unit sum times ``dp``."""
        g = self.grid
        phi = np.fft.fftshift(np.fft.fft(self.psi))
        p = HBAR * np.fft.fftshift(g.k)
        dp = HBAR * 2 * np.pi / (g.n * g.dx)
        d = np.abs(phi) ** 2
        return p, d / (d.sum() * dp)


def normalized(psi, grid: WaveGrid) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return psi / math.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx)


def init_superposition(
    sigma: float,
    k: float,
    grid: WaveGrid | None = None,
    params: PhysicalParams | None = None,
    center: float = 0.0,
) -> WaveFunction1D:
    """``psi ~ exp(-(x-c)^2 / 2 sigma^2) (e^{ikx} + e^{-ikx})``, normalized numerically.

    ``k = 0`` gives the Gaussian packet.
    """
    grid = grid or WaveGrid()
    params = params or PhysicalParams()
    if not sigma > 0:
        raise InputError("sigma must be > 0")
    lo, hi = grid.x_range
    if min(center - lo, hi - center) < 4 * sigma:
        raise GridError("grid must span at least +-4 sigma around the packet")
    if (abs(k) + 6 / sigma) * grid.dx >= np.pi / 4:
        raise GridError(f"grid spacing {grid.dx:.3g} m does not resolve k = {k:.3g} 1/m")
    x = grid.x
    psi = np.exp(-((x - center) ** 2) / (2 * sigma**2)) * (2 * np.cos(k * x) if k else 1.0)
    return WaveFunction1D(normalized(psi, grid), grid, 0.0, params)


def ground_state_width(params: PhysicalParams) -> float:
    """``sqrt(hbar / m w0)``; the position standard deviation is this over sqrt(2)."""
    return params.oscillator_length


# --- evolution ------------------------------------------------------------------


def _check_boundary(psi, grid: WaveGrid, cells: int = 4, tol: float = 1e-6):
    d = np.abs(psi) ** 2 * grid.dx
    edge = d[:cells].sum() + d[-cells:].sum()
    if edge > tol:
        raise BoundaryBreachError(
            f"probability {edge:.3g} within {cells} cells of the box edge (limit {tol:g}); enlarge the grid"
        )


def phase_per_step(psi: WaveFunction1D, pot: Potential1D, dt: float) -> float:
    """``dt (max kinetic + max potential energy) / hbar`` over the occupied region."""
    g = psi.grid
    m = psi.params.mass
    V = pot.evaluate(g.x)[0]
    occ_x = _occupied(psi.density)
    pk = np.abs(np.fft.fft(psi.psi)) ** 2
    kmax = np.abs(g.k[_occupied(pk)]).max()
    ekin = HBAR**2 * kmax**2 / (2 * m)
    epot = V[occ_x].max() - V.min()
    return dt * (ekin + epot) / HBAR


def _split_operator(psi: WaveFunction1D, pot: Potential1D, dt: float, n_steps: int, record_every: int = 0):
    """Run ``n_steps`` symmetric split steps; optionally yield moments along the way."""
    g = psi.grid
    m = psi.params.mass
    V = pot.evaluate(g.x)[0]
    half_kin = np.exp(-0.25j * HBAR * g.k**2 / m * dt)
    pot_step = np.exp(-1j * (V - V.min()) * dt / HBAR)
    y = psi.psi.copy()
    rec = []
    for i in range(n_steps + 1):
        if record_every and i % record_every == 0:
            rec.append((i, y.copy()))
        if i == n_steps:
            break
        y = np.fft.ifft(half_kin * np.fft.fft(y))
        y *= pot_step
        y = np.fft.ifft(half_kin * np.fft.fft(y))
        if i % 256 == 255:
            _check_boundary(y, g)
    _check_boundary(y, g)
    return y, rec


def _steps(dt: float, t_total: float) -> tuple[int, float]:
    if dt <= 0 or t_total < 0:
        raise InputError("dt must be > 0 and t_total >= 0")
    n = int(math.ceil(t_total / dt - 1e-9)) if t_total > 0 else 0
    return n, (t_total / n if n else dt)


def evolve_schrodinger(psi: WaveFunction1D, pot: Potential1D, dt: float, t_total: float) -> WaveFunction1D:
    """Symmetric split-operator evolution (half kinetic, potential, half kinetic).

    ``dt`` is shrunk slightly so an integer number of steps spans
    ``t_total``. The accuracy guard requires less than 0.1 rad of phase per
    step from the largest occupied kinetic plus potential energy.
    """
    n, h = _steps(dt, t_total)
    if phase_per_step(psi, pot, h) >= 0.1:
        raise InputError(f"dt = {h:.3g} s too large: {phase_per_step(psi, pot, h):.3g} rad per step")
    y, _ = _split_operator(psi, pot, h, n)
    return WaveFunction1D(normalized(y, psi.grid), psi.grid, psi.t + t_total, psi.params)


def uncertainties(obj, params: PhysicalParams | None = None) -> tuple[float, float]:
    """Position and momentum standard deviations ``(dx [m], dp [kg m/s])``.

    Accepts a :class:`WaveFunction1D` or a signed phase-space grid in
    ``(x, pbar)`` units (``params`` then supplies ``m w0``).
    """
    if isinstance(obj, WaveFunction1D):
        d = obj.density * obj.grid.dx
        mx = np.sum(d * obj.x)
        sx = math.sqrt(np.sum(d * (obj.x - mx) ** 2))
        p, dp_d = obj.momentum_density()
        w = dp_d / dp_d.sum()
        mp = np.sum(w * p)
        sp = math.sqrt(np.sum(w * (p - mp) ** 2))
        return sx, sp
    if isinstance(obj, PhaseSpaceGrid):
        params = params or PhysicalParams()
        mw = params.mass * params.omega0
        total = obj.values.sum()
        wx = obj.values.sum(axis=0) / total
        wp = obj.values.sum(axis=1) / total
        mx = np.sum(wx * obj.q)
        mp = np.sum(wp * obj.p)
        sx = math.sqrt(np.sum(wx * (obj.q - mx) ** 2))
        sp = math.sqrt(np.sum(wp * (obj.p - mp) ** 2)) * mw
        return sx, sp
    raise InputError(f"uncertainties: unsupported type {type(obj).__name__}")


def moment_trajectory(psi: WaveFunction1D, pot: Potential1D, dt: float, t_total: float, every: int = 20) -> dict:
    """Evolve and record ``t``, ``<x>``, ``dx`` and ``dp`` every ``every`` steps."""
    n, h = _steps(dt, t_total)
    if phase_per_step(psi, pot, h) >= 0.1:
        raise InputError(f"dt = {h:.3g} s too large for this state")
    g = psi.grid
    x = g.x
    k = g.k
    t, mean_x, dx, dp = [], [], [], []
    _, rec = _split_operator(psi, pot, h, n, record_every=every)
    for i, y in rec:
        d = np.abs(y) ** 2
        d /= d.sum()
        mx = np.sum(d * x)
        pk = np.abs(np.fft.fft(y)) ** 2
        pk /= pk.sum()
        mk = np.sum(pk * k)
        t.append(psi.t + i * h)
        mean_x.append(mx)
        dx.append(math.sqrt(np.sum(d * (x - mx) ** 2)))
        dp.append(HBAR * math.sqrt(np.sum(pk * (k - mk) ** 2)))
    return {"t": np.array(t), "mean_x": np.array(mean_x), "dx": np.array(dx), "dp": np.array(dp), "dt": h}


# --- Wigner ----------------------------------------------------------------------


def wigner_from_wavefunction(
    psi: WaveFunction1D, x_window: tuple[float, float] | None = None, n_eta: int = 2048
) -> PhaseSpaceGrid:
    """Direct Wigner transform on ``(x, pbar)`` cells.

    For each grid ``x`` the correlation ``psi*(x - eta/2) psi(x + eta/2)`` is
    sampled at ``eta = 2 j dx`` (``|j| < n_eta/2``) and Fourier transformed,
    which gives ``p`` cells of width ``pi hbar / (n_eta dx)``. ``x_window``
    limits the x columns computed (default: whole grid).
    """
    g = psi.grid
    x = g.x
    if x_window is None:
        cols = np.arange(g.n)
    else:
        cols = np.flatnonzero((x >= x_window[0]) & (x <= x_window[1]))
        if cols.size < 2:
            raise GridError("x_window contains fewer than 2 grid points")
    if n_eta % 2 or n_eta < 4:
        raise GridError("n_eta must be even and >= 4")
    half = n_eta // 2
    j = np.arange(-half, half)
    y = psi.psi
    out = np.empty((n_eta, cols.size))
    for c0 in range(0, cols.size, 256):
        cc = cols[c0 : c0 + 256]
        ip = cc[:, None] + j[None, :]
        im = cc[:, None] - j[None, :]
        valid = (ip >= 0) & (ip < g.n) & (im >= 0) & (im < g.n)
        corr = np.where(valid, np.conj(y[np.clip(im, 0, g.n - 1)]) * y[np.clip(ip, 0, g.n - 1)], 0.0)
        # sum_j corr_j exp(-i p 2 j dx / hbar) with p_l = l dp; ifftshift puts j = 0 first
        spec = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(corr, axes=1), axis=1), axes=1)
        out[:, c0 : c0 + 256] = spec.real.T
    dp = np.pi * HBAR / (n_eta * g.dx)
    mw = psi.params.mass * psi.params.omega0
    vals = out * (2 * g.dx) / (2 * np.pi * HBAR) * mw
    dpb = dp / mw
    q_range = (x[cols[0]] - 0.5 * g.dx, x[cols[-1]] + 0.5 * g.dx)
    p_range = (-(half + 0.5) * dpb, (half - 0.5) * dpb)
    return PhaseSpaceGrid(vals, q_range, p_range, signed=True)


def wigner_on(psi: WaveFunction1D, spec: GridSpec, n_eta: int = 2048) -> PhaseSpaceGrid:
    """Direct Wigner function resampled bilinearly onto the cells of ``spec``."""
    pad = 4 * psi.grid.dx
    w = wigner_from_wavefunction(psi, (spec.q_range[0] - pad, spec.q_range[1] + pad), n_eta)
    target = spec.empty(signed=True)
    Q, P = np.meshgrid(target.q, target.p)
    return replace(target, values=resample(w, Q, P))


def wigner_fidelity(rec: PhaseSpaceGrid, ref: PhaseSpaceGrid, level: float = 0.1) -> dict:
    """Agreement of a signed reconstruction with a reference Wigner function.

    ``abs_overlap`` is the Bhattacharyya coefficient of ``|W|``;
    ``sign_agreement`` is the fraction of cells with ``|W_ref| > level max|W_ref|``
    where the signs match; ``fidelity`` is their product.
    """
    a = np.abs(rec.values)
    b = np.abs(ref.values)
    ov = float(np.sum(np.sqrt(a / a.sum() * b / b.sum())))
    strong = b > level * b.max()
    agree = float(np.mean(np.sign(rec.values[strong]) == np.sign(ref.values[strong])))
    return {"abs_overlap": ov, "sign_agreement": agree, "fidelity": ov * agree}


# --- time of flight --------------------------------------------------------------


def tof_angle_and_stretch(omega: float, t_f: float) -> tuple[float, float]:
    """``(theta_f, stretch) = (-arctan(w t_f), sqrt(1 + w^2 t_f^2))``."""
    if t_f < 0:
        raise InputError("t_f must be >= 0")
    wt = omega * t_f
    return -math.atan(wt), math.hypot(1.0, wt)


def tof_map(obj, omega: float, t_f: float, *, pad_to: tuple[float, float] | None = None):
    """Free flight for ``t_f``: ``x -> x + p t_f / m``.

    Grids (in ``(x, pbar)`` units) are sheared by ``x -> x + w t_f pbar`` and
    resampled on their own cells (area preserving). Wave functions evolve
    exactly under the kinetic term, optionally on a larger box ``pad_to``
    with the same spacing. Returns ``(mapped, theta_f, stretch)``.
    """
    theta_f, stretch = tof_angle_and_stretch(omega, t_f)
    if isinstance(obj, PhaseSpaceGrid):
        if t_f == 0:
            return obj, theta_f, stretch
        Q, P = np.meshgrid(obj.q, obj.p)
        return obj.with_values(resample(obj, Q - omega * t_f * P, P)), theta_f, stretch
    if isinstance(obj, WaveFunction1D):
        g = obj.grid
        y = obj.psi
        if pad_to is not None:
            lo = int(math.floor((g.x_range[0] - pad_to[0]) / g.dx + 0.5))
            hi = int(math.floor((pad_to[1] - g.x_range[1]) / g.dx + 0.5))
            if lo < 0 or hi < 0:
                raise GridError("pad_to must contain the wave-function grid")
            g = WaveGrid(g.n + lo + hi, (g.x_range[0] - lo * g.dx, g.x_range[1] + hi * g.dx))
            y = np.concatenate([np.zeros(lo, complex), y, np.zeros(hi, complex)])
        if t_f > 0:
            y = np.fft.ifft(np.exp(-0.5j * HBAR * g.k**2 / obj.params.mass * t_f) * np.fft.fft(y))
            _check_boundary(y, g)
        out = WaveFunction1D(normalized(y, g), g, obj.t + t_f, obj.params)
        return out, theta_f, stretch
    raise InputError(f"tof_map: unsupported type {type(obj).__name__}")


# --- tomography -------------------------------------------------------------------


@dataclass(frozen=True)
class QuantumTomographySettings:
    n_angles: int = 60
    t_f: float = 30e-3
    k_c: float = 10e6
    hold_dt: float = 5e-6
    tof_box: tuple[float, float] = (-200e-6, 200e-6)
    u_grid: tuple[float, float, float] = (-20e-6, 20e-6, 0.05e-6)
    out: GridSpec = GridSpec(120, 140, (-6e-6, 6e-6), (-14e-6, 14e-6))


def tomography_sinogram(psi0: WaveFunction1D, pot: Potential1D, settings: QuantumTomographySettings) -> Sinogram:
    """Simulated hold-plus-flight measurement.

    Hold angles are chosen so that the effective projection angles (hold
    angle plus the flight rotation ``arctan(w t_f)``, reduced to [0, pi))
    are ``j pi / n_angles``. A single continuous evolution visits the hold
    times in increasing order. Each flight density is rescaled by the
    stretch factor onto the common ``u`` grid.
    """
    n = settings.n_angles
    if n < 13:
        raise InputError("quantum tomography needs at least 13 angles")
    w = pot.params.omega0
    phi, stretch = tof_angle_and_stretch(w, settings.t_f)
    phi = -phi
    step = np.pi / n
    offset = (-phi) % step
    holds = offset + step * np.arange(n)  # hold angles in [0, pi)
    eff = holds + phi
    wrapped = eff >= np.pi
    eff = np.where(wrapped, eff - np.pi, eff)
    u0, u1, du = settings.u_grid
    if not math.isclose(u0, -u1):
        raise InputError("the projection grid must be symmetric about 0")
    u = np.arange(int(round((u1 - u0) / du)) + 1) * du + u0
    rows = {}
    cur = psi0
    t_prev = 0.0
    for a, b, flip in zip(holds, eff, wrapped):
        t_hold = a / w
        if t_hold > t_prev:
            cur = evolve_schrodinger(cur, pot, settings.hold_dt, t_hold - t_prev)
            t_prev = t_hold
        flown, _, _ = tof_map(cur, w, settings.t_f, pad_to=settings.tof_box)
        dens = np.interp(stretch * u, flown.x, flown.density, left=0.0, right=0.0) * stretch
        idx = int(round(b / step)) % n
        if flip:
            # projection at beta - pi is the mirror image of the one at beta
            dens = dens[::-1]
        rows[idx] = dens
    vals = np.array([rows[i] for i in range(n)])
    vals = vals / (vals.sum(axis=1, keepdims=True) * du)
    return Sinogram(step * np.arange(n), u, vals)


def quantum_tomography(
    psi0: WaveFunction1D, pot: Potential1D, settings: QuantumTomographySettings | None = None
) -> PhaseSpaceGrid:
    """Signed FBP reconstruction of the Wigner function from simulated images.

    The result is normalized by its total signed mass; the sinogram is kept
    in ``info["sinogram"]``.
    """
    settings = settings or QuantumTomographySettings()
    if not pot.is_harmonic:
        raise InputError("the hold potential must be harmonic")
    sino = tomography_sinogram(psi0, pot, settings)
    rec = fbp_reconstruct(sino, settings.k_c, settings.out, clip=False)
    m = rec.mass()
    if m != 0:
        rec = rec.with_values(rec.values / m)
    return replace(rec, info={"sinogram": sino})


def fringe_mask(grid: PhaseSpaceGrid, half_width: float) -> np.ndarray:
    """Cells with ``|x| <= half_width`` and ``|pbar| <= half_width``."""
    Q, P = np.meshgrid(grid.q, grid.p)
    return (np.abs(Q) <= half_width) & (np.abs(P) <= half_width)


# --- squeezing --------------------------------------------------------------------


@dataclass(frozen=True)
class SqueezingSettings:
    quartic_scale: float = 100e-6
    shift: float = 15e-6
    t_max: float = 0.25
    dt: float = 4e-6
    grid: WaveGrid = WaveGrid(2048, (-120e-6, 120e-6))
    record_every: int = 20
    strobe_offset: float = 3e-3


def squeezing_study(params: PhysicalParams | None = None, settings: SqueezingSettings | None = None) -> dict:
    """Ground-state packet released 15 um off center in the quartic trap.

    ``dx`` is sampled stroboscopically ``strobe_offset`` after each maximum
    of ``<x>`` (each return to the initial turning point). Returns the full
    moment trajectory, the stroboscopic samples, the time and ratio of the
    smallest sample, and the relative period change from the spacing of
    the ``<x>`` maxima.
    """
    params = params or PhysicalParams()
    s = settings or SqueezingSettings()
    pot = Potential1D(params, quartic_scale=s.quartic_scale)
    psi = init_superposition(params.oscillator_length, 0.0, s.grid, params, center=s.shift)
    traj = moment_trajectory(psi, pot, s.dt, s.t_max, s.record_every)
    t, mx, dx = traj["t"], traj["mean_x"], traj["dx"]
    peaks = argrelextrema(mx, np.greater_equal, order=5)[0]
    peaks = peaks[(peaks > 0) & (peaks < mx.size - 1)]
    # refine peak times with a parabola through the neighbours
    tp = []
    for i in peaks:
        y0, y1, y2 = mx[i - 1], mx[i], mx[i + 1]
        den = y0 - 2 * y1 + y2
        shift = 0.5 * (y0 - y2) / den if den != 0 else 0.0
        tp.append(t[i] + shift * (t[1] - t[0]))
    tp = np.array(tp)
    t_s = tp + s.strobe_offset
    t_s = t_s[t_s <= t[-1]]
    dx_s = np.interp(t_s, t, dx)
    k = int(np.argmin(dx_s))
    T0 = 2 * np.pi / params.omega0
    period = float(np.mean(np.diff(np.r_[0.0, tp]))) if tp.size else math.nan
    return {
        "trajectory": traj,
        "turning_times": tp,
        "strobe_t": t_s,
        "strobe_dx": dx_s,
        "t_min": float(t_s[k]),
        "dx0": float(dx[0]),
        "ratio": float(dx_s[k] / dx[0]),
        "period": period,
        "period_change": period / T0 - 1.0,
    }


# --- files ---------------------------------------------------------------------------


def save_wavefunction(path, psi: WaveFunction1D) -> None:
    g = psi.grid
    lines = [f"PSWF1 {g.n} {g.x_range[0]:.17g} {g.x_range[1]:.17g} {psi.t:.17g}"]
    lines.extend(f"{v.real:.17g}\t{v.imag:.17g}" for v in psi.psi)
    Path(path).write_text("\n".join(lines) + "\n")


def load_wavefunction(path, params: PhysicalParams | None = None) -> WaveFunction1D:
    lines = Path(path).read_text().splitlines()
    head = lines[0].split() if lines else []
    if len(head) != 5 or head[0] != "PSWF1":
        raise InputError(f"{path}: missing 'PSWF1 <n> <xmin> <xmax> <t>' header")
    n = int(head[1])
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != n:
        raise InputError(f"{path}: header says {n} points, found {len(body)}")
    arr = np.array([[float(v) for v in ln.split()] for ln in body])
    grid = WaveGrid(n, (float(head[2]), float(head[3])))
    return WaveFunction1D(arr[:, 0] + 1j * arr[:, 1], grid, float(head[4]), params or PhysicalParams())
