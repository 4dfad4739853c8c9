"""Projections, regularized filtered back-projection, MLEM and grid metrics.

Phase-space grids are cell-centered. ``values`` has shape ``(n_p, n_q)`` so
that a row-major dump has ``q`` varying fastest.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numba
import numpy as np
from scipy import ndimage, sparse

from .errors import GridError, InputError


@dataclass(frozen=True)
class GridSpec:
    """Output grid for reconstructions (edges of the outer cells, in m)."""

    nq: int = 128
    np: int = 128
    q_range: tuple[float, float] = (-150e-6, 150e-6)
    p_range: tuple[float, float] = (-150e-6, 150e-6)

    def __post_init__(self):
        if self.nq < 2 or self.np < 2:
            raise GridError("grid needs at least 2 x 2 cells")
        if not (self.q_range[1] > self.q_range[0] and self.p_range[1] > self.p_range[0]):
            raise GridError("grid extents must be positive")

    def empty(self, **kw) -> "PhaseSpaceGrid":
        return PhaseSpaceGrid(np.zeros((self.np, self.nq)), self.q_range, self.p_range, **kw)


@dataclass(frozen=True, eq=False)
class PhaseSpaceGrid:
    """Density over ``(q, pbar)`` in m^-2.

    Parameters
    ----------
    values : ndarray, shape (n_p, n_q)
    q_range, p_range : (float, float)
        Outer cell edges.
    signed : bool
        ``False`` for classical densities (nonnegative up to FBP ringing),
        ``True`` for Wigner functions.
    raw : ndarray or None
        Unclipped values when ``values`` were clipped and renormalized.
    clipped_fraction : float
        Fraction of absolute mass removed by clipping.
    info : dict
        Free-form diagnostics (e.g. the MLEM divergence history).
    """

    values: np.ndarray
    q_range: tuple[float, float]
    p_range: tuple[float, float]
    signed: bool = False
    raw: np.ndarray | None = None
    clipped_fraction: float = 0.0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or min(v.shape) < 2:
            raise GridError("grid values must be 2D with at least 2 x 2 cells")
        if not np.all(np.isfinite(v)):
            raise GridError("grid values must be finite")
        if not (self.q_range[1] > self.q_range[0] and self.p_range[1] > self.p_range[0]):
            raise GridError("grid extents must be positive")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "q_range", (float(self.q_range[0]), float(self.q_range[1])))
        object.__setattr__(self, "p_range", (float(self.p_range[0]), float(self.p_range[1])))

    @property
    def nq(self) -> int:
        return self.values.shape[1]

    @property
    def np(self) -> int:
        return self.values.shape[0]

    @property
    def dq(self) -> float:
        return (self.q_range[1] - self.q_range[0]) / self.nq

    @property
    def dp(self) -> float:
        return (self.p_range[1] - self.p_range[0]) / self.np

    @property
    def q(self) -> np.ndarray:
        return self.q_range[0] + (np.arange(self.nq) + 0.5) * self.dq

    @property
    def p(self) -> np.ndarray:
        return self.p_range[0] + (np.arange(self.np) + 0.5) * self.dp

    @property
    def spec(self) -> GridSpec:
        return GridSpec(self.nq, self.np, self.q_range, self.p_range)

    def mass(self) -> float:
        return float(self.values.sum() * self.dq * self.dp)

    def normalized(self) -> "PhaseSpaceGrid":
        m = self.mass()
        if not m > 0:
            raise InputError("grid has no positive mass to normalize")
        return self.with_values(self.values / m)

    def with_values(self, values) -> "PhaseSpaceGrid":
        return replace(self, values=values, raw=None, clipped_fraction=0.0, info={})

    def clipped(self) -> "PhaseSpaceGrid":
        """Zero negative cells and renormalize; keep the raw values."""
        v = self.values
        total = np.abs(v).sum()
        frac = float(-v[v < 0].sum() / total) if total > 0 else 0.0
        c = np.clip(v, 0.0, None)
        s = c.sum() * self.dq * self.dp
        if s > 0:
            c = c / s
        return replace(self, values=c, signed=False, raw=v.copy(), clipped_fraction=frac)

    @classmethod
    def from_function(cls, f, spec: GridSpec, signed: bool = False) -> "PhaseSpaceGrid":
        g = spec.empty(signed=signed)
        Q, P = np.meshgrid(g.q, g.p)
        return g.with_values(np.asarray(f(Q, P), dtype=float))

    @classmethod
    def gaussian(cls, spec: GridSpec, sigma_q: float, sigma_p: float, center=(0.0, 0.0)) -> "PhaseSpaceGrid":
        q0, p0 = center

        def f(Q, P):
            return np.exp(-0.5 * ((Q - q0) / sigma_q) ** 2 - 0.5 * ((P - p0) / sigma_p) ** 2) / (
                2 * np.pi * sigma_q * sigma_p
            )

        return cls.from_function(f, spec)

    @classmethod
    def from_samples(cls, q, pbar, spec: GridSpec, smooth_cells: float = 0.0) -> "PhaseSpaceGrid":
        """Histogram samples onto the grid, optionally Gaussian-smoothed (KDE binning)."""
        H, _, _ = np.histogram2d(
            pbar, q, bins=(spec.np, spec.nq), range=(spec.p_range, spec.q_range)
        )
        if smooth_cells > 0:
            H = ndimage.gaussian_filter(H, smooth_cells, mode="constant")
        g = spec.empty().with_values(H)
        return g.normalized() if H.sum() > 0 else g


def resample(grid: PhaseSpaceGrid, Q, P) -> np.ndarray:
    """Bilinear interpolation of ``grid`` at points ``(Q, P)``; zero outside."""
    iq = (np.asarray(Q) - grid.q_range[0]) / grid.dq - 0.5
    ip = (np.asarray(P) - grid.p_range[0]) / grid.dp - 0.5
    coords = np.stack([ip.ravel(), iq.ravel()])
    out = ndimage.map_coordinates(grid.values, coords, order=1, mode="grid-constant", cval=0.0)
    return out.reshape(np.shape(Q))


def rotate_grid(grid: PhaseSpaceGrid, theta: float) -> PhaseSpaceGrid:
    from .dynamics import phase_rotation

    return phase_rotation(grid, theta)


# --- sinograms ---------------------------------------------------------------


def _check_uniform(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise InputError("x grid needs at least 2 points")
    h = np.diff(x)
    if np.any(h <= 0) or not np.allclose(h, h[0], rtol=1e-9, atol=0.0):
        raise InputError("x grid must be uniform and increasing")
    return x


@dataclass(frozen=True, eq=False)
class Sinogram:
    """Projections ``values[i, j] = pr(x_j, theta_i)``."""

    angles: np.ndarray
    x: np.ndarray
    values: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        a = np.asarray(self.angles, dtype=float)
        x = _check_uniform(self.x)
        v = np.asarray(self.values, dtype=float)
        if a.ndim != 1 or a.size < 1:
            raise InputError("sinogram needs at least one angle")
        if np.any(a < 0) or np.any(a >= np.pi) or np.any(np.diff(a) <= 0):
            raise InputError("angles must be strictly increasing within [0, pi)")
        if v.shape != (a.size, x.size):
            raise InputError(f"values shape {v.shape} does not match (n_angles, n_x) = {(a.size, x.size)}")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise InputError("projection values must be finite and nonnegative")
        if self.normalized:
            sums = v.sum(axis=1) * (x[1] - x[0])
            nz = sums > 0
            if np.any(np.abs(sums[nz] - 1.0) > 1e-6):
                raise InputError("normalized sinogram rows must integrate to 1")
        object.__setattr__(self, "angles", a)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", v)

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    def scaled(self, factor: float) -> "Sinogram":
        return Sinogram(self.angles, self.x, self.values * factor, normalized=False)

    def __add__(self, other: "Sinogram") -> "Sinogram":
        if not (np.array_equal(self.x, other.x) and np.array_equal(self.angles, other.angles)):
            raise InputError("sinograms must share angles and x grid")
        return Sinogram(self.angles, self.x, self.values + other.values, normalized=False)


def _normalize_rows(v: np.ndarray, dx: float) -> np.ndarray:
    s = v.sum(axis=-1, keepdims=True) * dx
    return np.divide(v, s, out=np.zeros_like(v), where=s > 0)


def project(obj, theta: float, x_grid) -> np.ndarray:
    """Density of ``q cos(theta) + pbar sin(theta)`` on ``x_grid``, unit area.

    ``obj`` is a :class:`PhaseSpaceGrid` (line integrals by the midpoint
    rule with nodes spaced like the grid's p cells) or anything with ``x``
    and ``pbar`` attributes (histogram of the samples).
    """
    if not (0.0 <= theta < np.pi):
        raise InputError("projection angle must lie in [0, pi)")
    x = _check_uniform(x_grid)
    dx = x[1] - x[0]
    c, s = math.cos(theta), math.sin(theta)
    if isinstance(obj, PhaseSpaceGrid):
        g = obj
        # node positions along the line, aligned to the p cell centers
        reach = math.hypot(*map(abs, g.q_range), *map(abs, g.p_range)) + abs(x).max()
        p0 = g.p[0]
        k0 = math.floor((-reach - p0) / g.dp)
        k1 = math.ceil((reach - p0) / g.dp)
        t = p0 + g.dp * np.arange(k0, k1 + 1)
        X, T = np.meshgrid(x, t)
        vals = resample(g, X * c - T * s, X * s + T * c)
        pr = vals.sum(axis=0) * g.dp
    else:
        q = np.asarray(obj.x)
        pb = np.asarray(obj.pbar)
        if q.size == 0:
            raise InputError("cannot project an empty ensemble")
        u = q * c + pb * s
        edges = np.concatenate([x - 0.5 * dx, [x[-1] + 0.5 * dx]])
        pr, _ = np.histogram(u, bins=edges)
        pr = pr.astype(float)
    return _normalize_rows(pr, dx)


def make_sinogram(obj, angles, x_grid) -> Sinogram:
    angles = np.asarray(angles, dtype=float)
    x = _check_uniform(x_grid)
    return Sinogram(angles, x, np.array([project(obj, float(a), x) for a in angles]))


def equal_angles(n: int) -> np.ndarray:
    """``n`` angles ``i pi / n``."""
    return np.pi * np.arange(n) / n


# --- FBP ---------------------------------------------------------------------


def kernel_K(x, k_c: float):
    """Band-limited ramp-filter kernel (m^-2), even in ``x``.

    ``[cos(k x) + k x sin(k x) - 1] / x^2`` for ``k |x| > 0.1`` and the
    series ``(k^2/2) [1 - (k x)^2/4 + (k x)^4/72]`` below.
    """
    if not k_c > 0:
        raise InputError("k_c must be > 0")
    x = np.abs(np.asarray(x, dtype=float))
    u = k_c * x
    small = u <= 0.1
    with np.errstate(divide="ignore", invalid="ignore"):
        big = (np.cos(u) + u * np.sin(u) - 1.0) / (x * x)
    ser = 0.5 * k_c * k_c * (1.0 - u * u / 4.0 + u**4 / 72.0)
    out = np.where(small, ser, big)
    return out if out.ndim else float(out)


@numba.njit(cache=True, inline="always")
def _kernel_scalar(x, k):
    x = abs(x)
    u = k * x
    if u <= 0.1:
        u2 = u * u
        return 0.5 * k * k * (1.0 - u2 / 4.0 + u2 * u2 / 72.0)
    return (math.cos(u) + u * math.sin(u) - 1.0) / (x * x)


@numba.njit(parallel=True, cache=True)
def _fbp_kernel(qc, pc, cos_t, sin_t, x0, dx, wpr, k):
    nq = qc.size
    npp = pc.size
    nx = wpr.shape[1]
    # cos/sin of k (u - x_j) advance along the uniform x grid by a fixed rotation
    cs, sn = math.cos(k * dx), math.sin(k * dx)
    out = np.zeros(npp * nq)
    for cell in numba.prange(npp * nq):
        q = qc[cell % nq]
        p = pc[cell // nq]
        acc = 0.0
        for i in range(cos_t.size):
            a0 = q * cos_t[i] + p * sin_t[i] - x0
            c = math.cos(k * a0)
            s = math.sin(k * a0)
            row = 0.0
            for j in range(nx):
                a = a0 - j * dx
                w = wpr[i, j]
                if w != 0.0:
                    if abs(k * a) <= 0.1:
                        row += w * _kernel_scalar(a, k)
                    else:
                        row += w * (c + k * a * s - 1.0) / (a * a)
                c, s = c * cs + s * sn, s * cs - c * sn
            acc += row
        out[cell] = acc
    return out.reshape(npp, nq)


def fbp_reconstruct(
    sino: Sinogram, k_c: float, spec: GridSpec | None = None, *, clip: bool = True
) -> PhaseSpaceGrid:
    """Filtered back-projection with the regularized kernel.

    ``P = 1/(2 pi^2) (pi / N) sum_i sum_j w_j K(q cos t_i + p sin t_i - x_j) pr_ij``
    with trapezoid weights ``w_j``. With ``clip`` the result is clipped at
    zero and renormalized (raw values kept on the grid); otherwise a signed
    grid is returned.
    """
    if not k_c > 0:
        raise InputError("k_c must be > 0")
    if sino.angles.size < 2:
        raise InputError("need at least 2 projection angles")
    spec = spec or GridSpec()
    g = spec.empty()
    w = np.full(sino.x.size, sino.dx)
    w[0] = w[-1] = 0.5 * sino.dx
    wpr = np.ascontiguousarray(sino.values * w[None, :])
    vals = _fbp_kernel(
        g.q, g.p, np.cos(sino.angles), np.sin(sino.angles), float(sino.x[0]), sino.dx, wpr, float(k_c)
    )
    vals *= 1.0 / (2 * np.pi**2) * (np.pi / sino.angles.size)
    out = replace(g, values=vals, signed=True)
    if clip and np.any(vals != 0):
        return out.clipped()
    return out


# --- MLEM --------------------------------------------------------------------


def system_matrix(sino: Sinogram, spec: GridSpec) -> sparse.csr_matrix:
    """Linear-interpolation projector from cell masses to sinogram bins."""
    g = spec.empty()
    Q, P = np.meshgrid(g.q, g.p)
    q, p = Q.ravel(), P.ravel()
    ncell = q.size
    nx = sino.x.size
    rows, cols, data = [], [], []
    cells = np.arange(ncell)
    for i, th in enumerate(sino.angles):
        f = (q * math.cos(th) + p * math.sin(th) - sino.x[0]) / sino.dx
        j = np.floor(f).astype(np.int64)
        a = f - j
        for jj, ww in ((j, 1.0 - a), (j + 1, a)):
            ok = (jj >= 0) & (jj < nx) & (ww > 0)
            rows.append(i * nx + jj[ok])
            cols.append(cells[ok])
            data.append(ww[ok])
    A = sparse.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(sino.angles.size * nx, ncell),
    )
    return A.tocsr()


def kl_divergence(measured, model) -> float:
    """Generalized Kullback-Leibler divergence ``sum m log(m/y) - m + y``."""
    m = np.asarray(measured, dtype=float)
    y = np.asarray(model, dtype=float)
    pos = m > 0
    with np.errstate(divide="ignore"):
        return float(np.sum(m[pos] * np.log(m[pos] / y[pos])) - m.sum() + y.sum())


def mlem_reconstruct(sino: Sinogram, n_iter: int, spec: GridSpec | None = None) -> PhaseSpaceGrid:
    """Multiplicative EM reconstruction from a uniform start.

    Works on bin probabilities ``pr * dx``; each update is
    ``P <- P / s * A^T (m / A P)`` with sensitivity ``s = A^T 1`` and
    ``0/0 -> 0``. The generalized KL divergence after every iteration is in
    ``info["kl_history"]``, with the whole sinogram scaled to unit total
    mass (one distribution over all angle and x bins).
    """
    if n_iter < 1:
        raise InputError("n_iter must be >= 1")
    spec = spec or GridSpec()
    A = system_matrix(sino, spec)
    meas = (sino.values * sino.dx).ravel()
    meas = meas / meas.sum() if meas.sum() > 0 else meas
    # bins no cell projects into cannot be modeled; leave them out of the divergence
    reach = np.asarray(A.sum(axis=1)).ravel() > 0
    sens = np.asarray(A.sum(axis=0)).ravel()
    seen = sens > 0
    P = np.where(seen, 1.0 / max(seen.sum(), 1), 0.0)
    inv_sens = np.divide(1.0, sens, out=np.zeros_like(sens), where=seen)
    history = []
    for _ in range(n_iter):
        y = A @ P
        ratio = np.divide(meas, y, out=np.zeros_like(meas), where=y > 0)
        P = P * inv_sens * (A.T @ ratio)
        history.append(kl_divergence(meas[reach], (A @ P)[reach]))
    g = spec.empty()
    vals = P.reshape(spec.np, spec.nq) / (g.dq * g.dp)
    total = vals.sum() * g.dq * g.dp
    if total > 0:
        vals = vals / total
    info = {"kl_history": history, "unreachable_mass": float(meas[~reach].sum())}
    return replace(g, values=vals, info=info)


# --- metrics -----------------------------------------------------------------


def _weights(grid: PhaseSpaceGrid) -> np.ndarray:
    w = np.clip(grid.values, 0.0, None)
    if not w.sum() > 0:
        raise InputError("grid has zero positive mass")
    return w / w.sum()


def overlap(g1: PhaseSpaceGrid, g2: PhaseSpaceGrid) -> float:
    """Bhattacharyya coefficient of the two (clipped, normalized) densities."""
    if g1.values.shape != g2.values.shape or g1.q_range != g2.q_range or g1.p_range != g2.p_range:
        raise InputError("overlap needs grids on the same cells")
    return float(np.sum(np.sqrt(_weights(g1) * _weights(g2))))


def angular_stats(theta, weights) -> tuple[float, float, float]:
    """``(circular mean, central 68.27% width, circular std)`` of weighted angles."""
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    C = np.sum(w * np.cos(theta))
    S = np.sum(w * np.sin(theta))
    mean = math.atan2(S, C)
    R = min(math.hypot(C, S), 1.0)
    circ_std = math.sqrt(-2.0 * math.log(R)) if R > 0 else math.inf
    d = np.angle(np.exp(1j * (np.asarray(theta) - mean)))
    order = np.argsort(d)
    cdf = np.cumsum(w[order])
    lo = np.interp(0.5 - 0.6827 / 2, cdf, d[order])
    hi = np.interp(0.5 + 0.6827 / 2, cdf, d[order])
    return mean, float(hi - lo), circ_std


def _moments(w, Q, P):
    w = w / w.sum()
    mq, mp = float(np.sum(w * Q)), float(np.sum(w * P))
    cqq = np.sum(w * (Q - mq) ** 2)
    cpp = np.sum(w * (P - mp) ** 2)
    cqp = np.sum(w * (Q - mq) * (P - mp))
    return (mq, mp), np.array([[cqq, cqp], [cqp, cpp]])


def _anisotropy(cov) -> float:
    lam = np.linalg.eigvalsh(cov)
    return math.sqrt(lam[1] / lam[0]) if lam[0] > 0 else math.inf


def grid_metrics(grid: PhaseSpaceGrid, other: PhaseSpaceGrid | None = None, roi_level: float = 0.2) -> dict:
    """Summary statistics of a phase-space density.

    Returns ``centroid`` and ``second_moments`` (2x2 covariance about the
    centroid) of the clipped mass, ``anisotropy`` (ratio of principal
    standard deviations) over the level set ``P >= roi_level * max``,
    ``anisotropy_full`` over all cells, ``angular_spread`` (width of the
    central 68.27% of the mass-weighted polar angle about the origin),
    ``circular_std`` and, when ``other`` is given, ``overlap``.

    A level set of an elliptical density is a scaled copy of its covariance
    ellipse, so the level-set anisotropy is unbiased for such shapes while
    ignoring the low-level streaks of few-angle back-projection.
    """
    w = _weights(grid)
    Q, P = np.meshgrid(grid.q, grid.p)
    centroid, cov = _moments(w, Q, P)
    roi = np.where(w >= roi_level * w.max(), w, 0.0)
    _, cov_roi = _moments(roi, Q, P)
    keep = w > 0
    _, spread, cstd = angular_stats(np.arctan2(P[keep], Q[keep]), w[keep])
    out = {
        "centroid": centroid,
        "second_moments": cov,
        "anisotropy": _anisotropy(cov_roi),
        "anisotropy_full": _anisotropy(cov),
        "angular_spread": spread,
        "circular_std": cstd,
    }
    if other is not None:
        out["overlap"] = overlap(grid, other)
    return out


def ensemble_metrics(q, pbar) -> dict:
    """Sample counterparts of :func:`grid_metrics` for point clouds."""
    q = np.asarray(q)
    pbar = np.asarray(pbar)
    cov = np.cov(np.vstack([q, pbar]), bias=True)
    _, spread, cstd = angular_stats(np.arctan2(pbar, q), np.ones(q.size))
    return {
        "centroid": (float(q.mean()), float(pbar.mean())),
        "second_moments": cov,
        "anisotropy": _anisotropy(cov),
        "angular_spread": spread,
        "circular_std": cstd,
    }


def l2_error(grid: PhaseSpaceGrid, truth: PhaseSpaceGrid, mask=None) -> float:
    """Relative L2 distance ``||g - t|| / ||t||`` over ``mask`` (all cells by default)."""
    d = grid.values - truth.values
    t = truth.values
    if mask is not None:
        d, t = d[mask], t[mask]
    return float(np.sqrt(np.sum(d * d) / np.sum(t * t)))


# --- files ---------------------------------------------------------------------


def save_sinogram(path, sino: Sinogram) -> None:
    lines = [f"PSSINO1 {sino.angles.size} {sino.x.size} {sino.x[0]:.17g} {sino.x[-1]:.17g}"]
    for a, row in zip(sino.angles, sino.values):
        lines.append(f"theta={a:.17g}")
        lines.append(" ".join(f"{v:.17g}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_sinogram(path) -> Sinogram:
    tokens = Path(path).read_text().split()
    if len(tokens) < 5 or tokens[0] != "PSSINO1":
        raise InputError(f"{path}: not a PSSINO1 file")
    n_a, n_x = int(tokens[1]), int(tokens[2])
    x = np.linspace(float(tokens[3]), float(tokens[4]), n_x)
    pos = 5
    angles, rows = [], []
    for _ in range(n_a):
        tag = tokens[pos]
        if not tag.startswith("theta="):
            raise InputError(f"{path}: expected 'theta=' line, got {tag!r}")
        angles.append(float(tag[6:]))
        rows.append([float(v) for v in tokens[pos + 1 : pos + 1 + n_x]])
        if len(rows[-1]) != n_x:
            raise InputError(f"{path}: projection {len(angles)} has {len(rows[-1])} values, expected {n_x}")
        pos += 1 + n_x
    v = np.array(rows)
    sums = v.sum(axis=1) * (x[1] - x[0])
    norm = bool(np.all(np.abs(sums - 1.0) <= 1e-6))
    return Sinogram(np.array(angles), x, v, normalized=norm)


def save_grid(path, grid: PhaseSpaceGrid) -> None:
    head = (
        f"PSGRID1 {grid.nq} {grid.np} {grid.q_range[0]:.17g} {grid.q_range[1]:.17g} "
        f"{grid.p_range[0]:.17g} {grid.p_range[1]:.17g}\n"
    )
    with open(path, "wb") as fh:
        fh.write(head.encode("ascii"))
        fh.write(np.ascontiguousarray(grid.values, dtype="<f8").tobytes())


def load_grid(path, signed: bool = False) -> PhaseSpaceGrid:
    data = Path(path).read_bytes()
    nl = data.index(b"\n")
    parts = data[:nl].decode("ascii").split()
    if len(parts) != 7 or parts[0] != "PSGRID1":
        raise InputError(f"{path}: not a PSGRID1 file")
    nq, npp = int(parts[1]), int(parts[2])
    body = data[nl + 1 :]
    if len(body) != 8 * nq * npp:
        raise InputError(f"{path}: expected {nq * npp} float64 values, found {len(body) / 8:g}")
    vals = np.frombuffer(body, dtype="<f8").reshape(npp, nq).astype(float)
    return PhaseSpaceGrid(
        vals, (float(parts[3]), float(parts[4])), (float(parts[5]), float(parts[6])), signed=signed
    )
