"""Classical ensembles in a 1D trap: sampling, Verlet integration, collisions,
and the period / angular-velocity analytics of weakly perturbed orbits.

Phase-space coordinates follow the tomography convention: ``q = x`` and
``pbar = p / (m w0)``, both in meters, measured from the origin (the center
of the trap the cloud is released into).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import integrate as _integrate
from scipy import optimize as _optimize
from scipy.interpolate import PchipInterpolator

from .errors import (
    ExtrapolationError,
    InputError,
    NonEncirclingError,
    PerturbationTooStrongError,
)
from .potential import PhysicalParams, Potential1D
from .rng import stream


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Classical particles: longitudinal ``x``, ``p`` and transverse energy.

    ``draws`` counts the stochastic operations applied so far; it keys the
    random streams so that a replayed operation sequence is bit-identical.
    """

    x: np.ndarray
    p: np.ndarray
    e_perp: np.ndarray
    params: PhysicalParams
    seed: int = 0
    draws: int = 0
    t: float = 0.0
    n_collisions: int = 0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        p = np.asarray(self.p, dtype=float)
        e = np.asarray(self.e_perp, dtype=float)
        if x.ndim != 1 or x.size < 1 or p.shape != x.shape or e.shape != x.shape:
            raise InputError("ensemble needs N >= 1 particles with matching x, p, e_perp")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p)) and np.all(np.isfinite(e))):
            raise InputError("ensemble coordinates must be finite")
        if np.any(e < 0):
            raise InputError("transverse energies must be >= 0")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "e_perp", e)

    @property
    def N(self) -> int:
        return self.x.size

    @property
    def pbar(self) -> np.ndarray:
        return self.p / (self.params.mass * self.params.omega0)

    def evolve(self, **changes) -> "Ensemble":
        return replace(self, **changes)


def sample_ensemble(params: PhysicalParams, x_shift: float, N: int, seed: int) -> Ensemble:
    """Thermal (Boltzmann) cloud at equilibrium in a trap centered at ``x_shift``."""
    if N < 1:
        raise InputError("N must be >= 1")
    rng = stream(seed, "sample")
    kT = params.kT
    sx = math.sqrt(kT / (params.mass * params.omega0**2))
    sp = math.sqrt(params.mass * kT)
    x = x_shift + sx * rng.standard_normal(N)
    p = sp * rng.standard_normal(N)
    e_perp = rng.exponential(kT, N)
    return Ensemble(x, p, e_perp, params, seed=int(seed), draws=1)


def second_moments(q, pbar, weights=None) -> np.ndarray:
    """Covariance matrix of ``(q, pbar)``."""
    return np.cov(np.vstack([q, pbar]), aweights=weights, bias=True)


def emittance(ens: Ensemble) -> float:
    """Area of the 2-sigma ellipse of the second moments (m^2 in q, pbar units)."""
    c = second_moments(ens.x, ens.pbar)
    return 4 * math.pi * math.sqrt(max(np.linalg.det(c), 0.0))


# --- collisions ------------------------------------------------------------


@dataclass(frozen=True)
class CollisionSettings:
    cell_size: float = 5e-6
    interval: float = 1e-3


def transverse_area(params: PhysicalParams) -> float:
    """Thermal transverse cross-section 2 pi kT / (m w_perp^2)."""
    return 2 * math.pi * params.kT / (params.mass * params.omega_perp**2)


def collide_pair(p1, p2, e1, e2, cos_phi, nz, mass):
    """Elastic collision of two atoms with 3D isotropic scattering.

    The transverse velocities have magnitudes fixed by ``e1``, ``e2`` and
    relative azimuth ``phi``. The relative speed is kept, its direction is
    redrawn (``nz`` is the longitudinal cosine of the new direction), the
    longitudinal center-of-mass momentum is kept, and the new transverse
    energy is shared equally.
    """
    u1 = math.sqrt(2 * e1 / mass)
    u2 = math.sqrt(2 * e2 / mass)
    gx = (p1 - p2) / mass
    g2 = gx * gx + max(u1 * u1 + u2 * u2 - 2 * u1 * u2 * cos_phi, 0.0)
    half_P = 0.5 * (p1 + p2)
    dp = 0.5 * mass * math.sqrt(g2) * nz
    e_cm = 0.25 * mass * max(u1 * u1 + u2 * u2 + 2 * u1 * u2 * cos_phi, 0.0)
    e_new = 0.5 * (e_cm + 0.25 * mass * g2 * (1.0 - nz * nz))
    return half_P + dp, half_P - dp, e_new, e_new


def collision_step(
    ens: Ensemble,
    dt: float,
    cell_size: float = 5e-6,
    seed: int | None = None,
    *,
    force_all: bool = False,
) -> Ensemble:
    """Stochastic pairwise collisions over one interval ``dt``.

    Particles are binned into cells of length ``cell_size``; the effective
    cell volume is ``cell_size`` times the thermal transverse area. Each pair
    in a cell collides with probability ``sigma_el * v_rel * dt / V`` where
    ``v_rel`` is the full 3D relative speed. Pairs are visited in
    lexicographic index order, each cell with its own random stream keyed by
    ``(seed, step, cell)``. ``force_all`` makes every pair collide (testing).
    """
    if cell_size <= 0:
        raise InputError("cell_size must be > 0")
    params = ens.params
    seed = ens.seed if seed is None else int(seed)
    step = ens.draws
    out = ens.evolve(draws=ens.draws + 1)
    if params.sigma_el == 0 and not force_all:
        return out
    m = params.mass
    vol = cell_size * transverse_area(params)
    p = ens.p.copy()
    e = ens.e_perp.copy()
    cells = np.floor(ens.x / cell_size).astype(np.int64)
    order = np.lexsort((np.arange(ens.N), cells))
    sorted_cells = cells[order]
    starts = np.flatnonzero(np.r_[True, sorted_cells[1:] != sorted_cells[:-1]])
    stops = np.r_[starts[1:], ens.N]
    n_coll = 0
    for s0, s1 in zip(starts, stops):
        k = s1 - s0
        if k < 2:
            continue
        members = order[s0:s1]
        rng = stream(seed, "collide", step, int(sorted_cells[s0]))
        ia, ib = np.triu_indices(k, 1)
        a, b = members[ia], members[ib]
        cos_phi = np.cos(rng.uniform(0.0, 2 * np.pi, a.size))
        draw = rng.random(a.size)
        if force_all:
            hits = np.arange(a.size)
        else:
            u1 = np.sqrt(2 * e[a] / m)
            u2 = np.sqrt(2 * e[b] / m)
            gx = (p[a] - p[b]) / m
            g = np.sqrt(gx * gx + np.maximum(u1 * u1 + u2 * u2 - 2 * u1 * u2 * cos_phi, 0.0))
            prob = params.sigma_el * g * dt / vol
            if prob.max() > 0.1:
                raise InputError(f"collision probability per pair {prob.max():.3g} > 0.1; reduce dt")
            hits = np.flatnonzero(draw < prob)
        if hits.size == 0:
            continue
        nz = rng.uniform(-1.0, 1.0, hits.size)
        for h, z in zip(hits, nz):
            i, j = a[h], b[h]
            p[i], p[j], e[i], e[j] = collide_pair(p[i], p[j], e[i], e[j], cos_phi[h], z, m)
        n_coll += hits.size
    return out.evolve(p=p, e_perp=e, n_collisions=ens.n_collisions + n_coll)


# --- integration -----------------------------------------------------------


def integrate(
    ens: Ensemble,
    pot: Potential1D,
    dt: float,
    t_total: float,
    *,
    collisions: CollisionSettings | None = None,
    report: dict | None = None,
) -> Ensemble:
    """Velocity-Verlet evolution for ``t_total`` (optionally with collisions).

    The step is shrunk slightly so that an integer number of steps spans
    ``t_total`` exactly. With ``collisions`` set, :func:`collision_step` runs
    after every ``collisions.interval`` worth of steps. Particles that leave
    the tabulated corrugation see the bare harmonic potential; their number
    is written to ``report["n_outside_corrugation"]``.
    """
    w0 = pot.params.omega0
    if dt <= 0 or dt > 2 * math.pi / (50 * w0) * (1 + 1e-12):
        raise InputError(f"dt must be in (0, T/50]; got {dt:.3g} s")
    if t_total < 0:
        raise InputError("t_total must be >= 0")
    n = int(math.ceil(t_total / dt - 1e-9)) if t_total > 0 else 0
    h = t_total / n if n else 0.0
    m = pot.params.mass
    x = ens.x.copy()
    p = ens.p.copy()
    track = pot.corrugation is not None
    outside = pot.outside_corrugation(x) if track else None
    every = 0
    if collisions is not None and n:
        every = max(1, int(round(collisions.interval / h)))
    cur = ens
    F = pot.force(x)
    for i in range(1, n + 1):
        p += 0.5 * h * F
        x += (h / m) * p
        F = pot.force(x)
        p += 0.5 * h * F
        if track:
            outside |= pot.outside_corrugation(x)
        if every and i % every == 0:
            cur = collision_step(cur.evolve(x=x, p=p), every * h, collisions.cell_size)
            x, p = cur.x.copy(), cur.p.copy()
    if report is not None:
        report["steps"] = report.get("steps", 0) + n
        report["n_outside_corrugation"] = int(outside.sum()) if track else 0
        report["n_collisions"] = cur.n_collisions
    return cur.evolve(x=x, p=p, t=ens.t + t_total)


# --- orbit analytics -------------------------------------------------------


def turning_points(pot: Potential1D, E: float) -> tuple[float, float]:
    """Inner turning points ``a < center < b`` of the orbit through the center.

    The search brackets outward from the center on a grid reaching 1.2 times
    the harmonic estimate (expanded if needed), then bisects to machine
    precision.
    """
    c = pot.center
    V0 = float(pot.evaluate(c)[0])
    if not E > V0:
        raise NonEncirclingError(f"E = {E:.4g} J does not exceed V(center) = {V0:.4g} J")
    xh = math.sqrt(2 * (E - V0) / pot.stiffness)

    def g(x):
        return E - pot.evaluate(x)[0]

    out = []
    for sign in (-1.0, 1.0):
        reach = 1.2 * xh
        for _ in range(12):
            s = c + sign * np.linspace(0.0, reach, 513)
            vals = g(s)
            bad = np.flatnonzero(vals <= 0)
            if bad.size:
                k = bad[0]
                lo, hi = s[k - 1], s[k]
                root = _optimize.brentq(g, min(lo, hi), max(lo, hi), xtol=1e-17 * max(xh, 1e-30), rtol=4 * np.finfo(float).eps, maxiter=200)
                out.append(root)
                break
            reach *= 1.5
        else:
            raise NonEncirclingError("no turning point found; potential does not confine this energy")
    return out[0], out[1]


def period_direct(pot: Potential1D, E: float) -> float:
    """Oscillation period by turning-point quadrature.

    ``T = 2 int_a^b dx / sqrt(2 (E - V) / m)`` with ``x = c + h sin(phi)``,
    which removes the inverse-square-root endpoint singularities.
    """
    a, b = turning_points(pot, E)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    m = pot.params.mass

    def f(phi):
        x = mid + half * math.sin(phi)
        num = (x - a) * (b - x)
        den = E - float(pot.evaluate(x)[0])
        if den <= 0 or num <= 0:
            # only reachable at the endpoints where the limit is finite
            return math.sqrt(2 * half / abs(float(pot.evaluate(b if phi > 0 else a)[1])))
        return math.sqrt(num / den)

    val, _ = _integrate.quad(f, -0.5 * math.pi, 0.5 * math.pi, epsabs=0.0, epsrel=1e-10, limit=400)
    return 2.0 * math.sqrt(m / 2.0) * val


def _orbit_radius(pot: Potential1D, E: float, theta: np.ndarray, max_iter: int = 50) -> np.ndarray:
    """Solve 1/2 m w0^2 r^2 + dU(r cos(theta)) = E for r by Newton iteration."""
    k = pot.stiffness
    c = pot.center
    cos = np.cos(theta)
    r = np.full(theta.shape, math.sqrt(2 * E / k))
    for _ in range(max_iter):
        dU, dF = pot.perturbation(c + r * cos)
        fval = 0.5 * k * r * r + dU - E
        fprime = k * r - dF * cos
        step = fval / fprime
        r = r - step
        if np.all(np.abs(step) <= 1e-14 * np.abs(r)):
            return r
    raise PerturbationTooStrongError("Newton iteration for r(theta, E) did not converge in 50 steps")


def period_perturbative(
    pot: Potential1D, E: float, mode: str = "exact_integral", *, n_theta: int = 2048
) -> float:
    """Period change relative to ``2 pi / w0`` at energy ``E`` (measured from the trap minimum).

    ``exact_integral`` integrates (x dF/2) / (E - dU - x dF/2) over the
    phase-space angle (exact for any separable 1D potential).
    ``lowest_order`` evaluates the weak-perturbation limit
    ``(1 / (w0 E)) int x dF / sqrt(x_max^2 - x^2) dx`` with ``x = x_max sin(phi)``.
    """
    w0 = pot.params.omega0
    c = pot.center
    if E <= 0:
        raise NonEncirclingError("E must be > 0")
    if mode == "exact_integral":
        theta = 2 * math.pi * np.arange(n_theta) / n_theta
        r = _orbit_radius(pot, E, theta)
        s = r * np.cos(theta)
        dU, dF = pot.perturbation(c + s)
        num = 0.5 * s * dF
        den = E - dU - num
        if np.any(den <= 0):
            raise NonEncirclingError("orbit does not complete a round trip about the origin")
        return float((2 * math.pi / n_theta) * np.sum(num / den) / w0)
    if mode == "lowest_order":
        xm = math.sqrt(2 * E / pot.stiffness)
        probe = c + xm * np.sin(np.linspace(-0.5 * math.pi, 0.5 * math.pi, 401))
        ratio = np.abs(pot.perturbation(probe)[0]).max() / E
        if ratio >= 0.3:
            raise PerturbationTooStrongError(f"max|dU|/E = {ratio:.3g} too large for the lowest-order formula")

        # Gauss-Legendre on each knot interval (the integrand is only C1 at the knots)
        edges = np.linspace(-0.5 * math.pi, 0.5 * math.pi, 17)
        if pot.corrugation is not None:
            u = (pot.corrugation.x - c) / xm
            edges = np.union1d(edges, np.arcsin(u[np.abs(u) < 1]))
        nodes, wts = np.polynomial.legendre.leggauss(10)
        half = 0.5 * np.diff(edges)
        phi = (0.5 * (edges[:-1] + edges[1:]))[:, None] + half[:, None] * nodes[None, :]
        s = xm * np.sin(phi)
        val = float(np.sum(half[:, None] * wts[None, :] * s * pot.perturbation(c + s)[1]))
        return val / (w0 * E)
    raise InputError(f"unknown mode {mode!r}")


@dataclass
class FrequencyShiftCurve:
    """Relative frequency shift ``dw/w0`` against total energy ``E``."""

    E: np.ndarray
    shift: np.ndarray
    potential: Potential1D | None = None
    gaps: list = field(default_factory=list)

    def __post_init__(self):
        self.E = np.asarray(self.E, dtype=float)
        self.shift = np.asarray(self.shift, dtype=float)
        if self.E.size < 2 or self.E.shape != self.shift.shape:
            raise InputError("curve needs >= 2 matching points")
        if np.any(np.diff(self.E) <= 0):
            raise InputError("curve energies must be strictly increasing")
        if np.any(np.abs(self.shift) >= 0.2):
            raise PerturbationTooStrongError("|dw/w0| >= 0.2: outside the weak-perturbation regime")
        self._interp = PchipInterpolator(self.E, self.shift, extrapolate=False)

    def __call__(self, E):
        E = np.asarray(E, dtype=float)
        if np.any(E < self.E[0]) or np.any(E > self.E[-1]):
            raise ExtrapolationError(
                f"energies outside curve domain [{self.E[0]:.4g}, {self.E[-1]:.4g}] J"
            )
        return self._interp(E)


def frequency_shift_curve(pot: Potential1D, E_grid) -> FrequencyShiftCurve:
    """Tabulate ``dw/w0 = T0/T - 1`` from :func:`period_direct` on ``E_grid``.

    Energies where the period cannot be computed are skipped and listed in
    ``gaps`` as ``(E, message)``.
    """
    T0 = 2 * math.pi / pot.params.omega0
    Es, shifts, gaps = [], [], []
    for E in np.asarray(E_grid, dtype=float):
        try:
            T = period_direct(pot, float(E))
        except (NonEncirclingError, PerturbationTooStrongError) as exc:
            gaps.append((float(E), str(exc)))
            continue
        Es.append(E)
        shifts.append(T0 / T - 1.0)
    return FrequencyShiftCurve(np.array(Es), np.array(shifts), pot, gaps)


def angle_evolution(ens: Ensemble, curve: FrequencyShiftCurve, t: float, pot: Potential1D | None = None) -> Ensemble:
    """Advance each particle's phase-space angle by ``-(w0 + dw(E)) t``.

    The radius of each particle is kept; ``E`` includes the perturbation.
    """
    pot = pot if pot is not None else curve.potential
    if pot is None:
        raise InputError("angle_evolution needs the potential the curve was built from")
    params = ens.params
    w0 = params.omega0
    mw = params.mass * w0
    E = pot.energy(ens.x, ens.p)
    shift = curve(E)
    q = ens.x - pot.center
    pb = ens.pbar
    r = np.hypot(q, pb)
    theta = np.arctan2(pb, q) - w0 * (1.0 + shift) * t
    return ens.evolve(x=pot.center + r * np.cos(theta), p=mw * r * np.sin(theta), t=ens.t + t)


def phase_rotation(obj, theta: float):
    """Rotate phase space counter-clockwise by ``theta``.

    ``q -> q cos(theta) - pbar sin(theta)``, ``pbar -> pbar cos(theta) + q sin(theta)``.
    Harmonic evolution for a time ``t`` is ``phase_rotation(-w0 t)``. Grids are
    resampled bilinearly onto their own (fixed) cells.
    """
    c, s = math.cos(theta), math.sin(theta)
    if isinstance(obj, Ensemble):
        mw = obj.params.mass * obj.params.omega0
        q, pb = obj.x, obj.pbar
        return obj.evolve(x=q * c - pb * s, p=mw * (pb * c + q * s))
    from .tomography import PhaseSpaceGrid, resample

    if isinstance(obj, PhaseSpaceGrid):
        Q, P = np.meshgrid(obj.q, obj.p)
        # value at output point y is the input value at R(-theta) y
        return obj.with_values(resample(obj, Q * c + P * s, -Q * s + P * c))
    raise InputError(f"cannot rotate object of type {type(obj).__name__}")


# --- snapshots ------------------------------------------------------------


def save_ensemble(path, ens: Ensemble) -> None:
    lines = [
        f"# N={ens.N} t={ens.t:.17g} seed={ens.seed}",
        f"# draws={ens.draws} collisions={ens.n_collisions}",
    ]
    lines.extend(f"{a:.17g}\t{b:.17g}\t{c:.17g}" for a, b, c in zip(ens.x, ens.p, ens.e_perp))
    Path(path).write_text("\n".join(lines) + "\n")


def load_ensemble(path, params: PhysicalParams | None = None) -> Ensemble:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("# N="):
        raise InputError(f"{path}: missing '# N=<n> t=<seconds> seed=<u64>' header")
    meta = dict(tok.split("=", 1) for tok in text[0][1:].split())
    extra = {}
    rows = []
    for line in text[1:]:
        if line.startswith("#"):
            extra.update(tok.split("=", 1) for tok in line[1:].split() if "=" in tok)
            continue
        if line.strip():
            rows.append([float(v) for v in line.split("\t")])
    arr = np.array(rows, dtype=float).reshape(-1, 3)
    if arr.shape[0] != int(meta["N"]):
        raise InputError(f"{path}: header says N={meta['N']} but found {arr.shape[0]} rows")
    return Ensemble(
        arr[:, 0],
        arr[:, 1],
        arr[:, 2],
        params or PhysicalParams(),
        seed=int(meta["seed"]),
        draws=int(extra.get("draws", 0)),
        t=float(meta["t"]),
        n_collisions=int(extra.get("collisions", 0)),
    )
