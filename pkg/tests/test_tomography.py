import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phasetomo import dynamics as dyn
from phasetomo import tomography as tomo
from phasetomo.errors import GridError, InputError
from phasetomo.tomography import GridSpec, PhaseSpaceGrid, Sinogram

KC = 0.43e6
SMALL = GridSpec(64, 64, (-80e-6, 80e-6), (-80e-6, 80e-6))
X = np.arange(-100e-6, 100e-6 + 1e-12, 1e-6)


def gaussian_sinogram(sigma, angles, x=X, center=(0.0, 0.0)):
    """Exact projections of an isotropic Gaussian."""
    q0, p0 = center
    rows = []
    for th in angles:
        m = q0 * math.cos(th) + p0 * math.sin(th)
        rows.append(np.exp(-0.5 * ((x - m) / sigma) ** 2) / (math.sqrt(2 * math.pi) * sigma))
    return Sinogram(np.asarray(angles), x, tomo._normalize_rows(np.array(rows), x[1] - x[0]))


# --- projection ------------------------------------------------------------------


@pytest.mark.parametrize("theta", [0.0, 0.4, 1.3, 2.9])
def test_isotropic_gaussian_projection(theta):
    g = PhaseSpaceGrid.gaussian(GridSpec(160, 160, (-80e-6, 80e-6), (-80e-6, 80e-6)), 15e-6, 15e-6)
    pr = tomo.project(g, theta, X)
    mean = np.sum(pr * X) * 1e-6
    sd = math.sqrt(np.sum(pr * (X - mean) ** 2) * 1e-6)
    assert abs(mean) < 1e-9
    assert sd == pytest.approx(15e-6, rel=5e-3)


def test_zero_angle_projection_is_p_marginal():
    spec = GridSpec(60, 50, (-30e-6, 30e-6), (-25e-6, 25e-6))
    rng = np.random.default_rng(1)
    g = PhaseSpaceGrid(rng.random((50, 60)), spec.q_range, spec.p_range).normalized()
    pr = tomo.project(g, 0.0, g.q)
    marginal = g.values.sum(axis=0) * g.dp
    assert np.allclose(pr, marginal / (marginal.sum() * g.dq), rtol=1e-12, atol=0)


def test_ensemble_and_binned_grid_project_alike(params):
    ens = dyn.sample_ensemble(params, 20e-6, 100_000, seed=4)
    spec = GridSpec(150, 150, (-150e-6, 150e-6), (-150e-6, 150e-6))
    g = PhaseSpaceGrid.from_samples(ens.x, ens.pbar, spec, smooth_cells=1.0)
    x = np.arange(-140e-6, 140e-6 + 1e-12, 2e-6)
    for th in (0.0, 0.7, 2.0):
        a = tomo.project(ens, th, x)
        b = tomo.project(g, th, x)
        assert np.sum(np.abs(a - b)) * 2e-6 < 0.05


def test_projection_errors(params):
    g = PhaseSpaceGrid.gaussian(SMALL, 10e-6, 10e-6)
    with pytest.raises(InputError):
        tomo.project(g, math.pi, X)

    class Empty:
        x = np.array([])
        pbar = np.array([])

    with pytest.raises(InputError, match="empty"):
        tomo.project(Empty(), 0.0, X)


def test_sinogram_validation():
    x = np.linspace(-1e-5, 1e-5, 21)
    ok = np.full((2, 21), 1 / (x[-1] - x[0] + 1e-6))
    with pytest.raises(InputError):
        Sinogram(np.array([0.5, 0.2]), x, ok, normalized=False)
    with pytest.raises(InputError):
        Sinogram(np.array([0.0, 1.0]), x, ok[:, :20], normalized=False)
    with pytest.raises(InputError):
        Sinogram(np.array([0.0, 1.0]), x, -ok, normalized=False)
    with pytest.raises(InputError):
        Sinogram(np.array([0.0, 1.0]), x**3, ok, normalized=False)


# --- kernel ------------------------------------------------------------------------


def test_kernel_at_zero():
    assert tomo.kernel_K(0.0, KC) == pytest.approx(KC**2 / 2, rel=1e-15)
    assert tomo.kernel_K(0.0, KC) * 1e-12 == pytest.approx(0.09245, abs=5e-6)


def test_kernel_branch_agreement():
    x = 0.1 / KC
    closed = (math.cos(0.1) + 0.1 * math.sin(0.1) - 1) / x**2
    assert tomo.kernel_K(x, KC) == pytest.approx(closed, rel=1e-6)


def test_kernel_at_pi():
    x = math.pi / KC
    assert tomo.kernel_K(x, KC) == pytest.approx(-2 / x**2, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(-50e-6, 50e-6), st.floats(0.05e6, 20e6))
def test_kernel_is_even_and_bounded(x, k):
    a = tomo.kernel_K(x, k)
    assert a == tomo.kernel_K(-x, k)
    assert a <= k * k / 2 * (1 + 1e-12)


# --- FBP -----------------------------------------------------------------------------


def test_fbp_gaussian_round_trip():
    angles = tomo.equal_angles(13)
    rec = tomo.fbp_reconstruct(gaussian_sinogram(15e-6, angles), KC, SMALL)
    truth = PhaseSpaceGrid.gaussian(SMALL, 15e-6, 15e-6)
    assert tomo.l2_error(rec, truth) < 0.1
    assert abs(tomo.grid_metrics(rec)["anisotropy"] - 1) < 0.05


def test_fbp_point_mass_peak():
    q0 = 40e-6
    angles = tomo.equal_angles(60)
    sino = gaussian_sinogram(1.0e-6, angles, x=np.arange(-120e-6, 120e-6 + 1e-12, 0.5e-6), center=(q0, 0.0))
    spec = GridSpec(81, 81, (-81e-6, 81e-6), (-81e-6, 81e-6))
    rec = tomo.fbp_reconstruct(sino, 2e6, spec, clip=False)
    ip, iq = np.unravel_index(np.argmax(rec.values), rec.values.shape)
    assert abs(rec.q[iq] - q0) <= rec.dq and abs(rec.p[ip]) <= rec.dp


def test_fbp_matches_brute_force_sum():
    angles = tomo.equal_angles(7)
    x = np.arange(-60e-6, 60e-6 + 1e-12, 1e-6)
    sino = gaussian_sinogram(12e-6, angles, x=x, center=(10e-6, -5e-6))
    spec = GridSpec(12, 10, (-30e-6, 30e-6), (-25e-6, 25e-6))
    rec = tomo.fbp_reconstruct(sino, KC, spec, clip=False)
    g = spec.empty()
    w = np.full(x.size, 1e-6)
    w[0] = w[-1] = 0.5e-6
    ref = np.zeros((spec.np, spec.nq))
    for i, p in enumerate(g.p):
        for j, q in enumerate(g.q):
            s = 0.0
            for th, row in zip(angles, sino.values):
                s += np.sum(w * tomo.kernel_K(q * math.cos(th) + p * math.sin(th) - x, KC) * row)
            ref[i, j] = s / (2 * math.pi**2) * math.pi / angles.size
    assert np.allclose(rec.values, ref, rtol=1e-9, atol=1e-9 * np.abs(ref).max())


def test_fbp_zero_sinogram():
    sino = Sinogram(tomo.equal_angles(5), X, np.zeros((5, X.size)), normalized=False)
    rec = tomo.fbp_reconstruct(sino, KC, SMALL)
    assert np.all(rec.values == 0)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(0.1, 3.0))
def test_fbp_is_linear(a, b):
    angles = tomo.equal_angles(5)
    s1 = gaussian_sinogram(10e-6, angles)
    s2 = gaussian_sinogram(20e-6, angles, center=(15e-6, 0.0))
    spec = GridSpec(16, 16, (-40e-6, 40e-6), (-40e-6, 40e-6))
    lhs = tomo.fbp_reconstruct(s1.scaled(a) + s2.scaled(b), KC, spec, clip=False).values
    rhs = a * tomo.fbp_reconstruct(s1, KC, spec, clip=False).values + b * tomo.fbp_reconstruct(s2, KC, spec, clip=False).values
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-10 * np.abs(rhs).max())


def test_fbp_clipping_keeps_raw():
    rec = tomo.fbp_reconstruct(gaussian_sinogram(15e-6, tomo.equal_angles(5)), KC, SMALL)
    assert rec.raw is not None and rec.raw.min() < 0
    assert rec.values.min() >= 0 and rec.mass() == pytest.approx(1.0)
    assert 0 < rec.clipped_fraction < 1


# --- MLEM ------------------------------------------------------------------------------


def disk_sinogram(radius, angles, x, spec):
    """Forward projection of a uniform disk discretized on ``spec`` (exactly representable)."""
    template = Sinogram(np.asarray(angles), x, np.zeros((len(angles), x.size)), normalized=False)
    A = tomo.system_matrix(template, spec)
    g = spec.empty()
    Q, P = np.meshgrid(g.q, g.p)
    disk = (Q**2 + P**2 < radius**2).astype(float).ravel()
    rows = (A @ disk).reshape(len(angles), x.size)
    return Sinogram(np.asarray(angles), x, tomo._normalize_rows(rows, x[1] - x[0]))


def test_mlem_disk_self_consistency():
    spec = GridSpec(48, 48, (-60e-6, 60e-6), (-60e-6, 60e-6))
    x = np.arange(-70e-6, 70e-6 + 1e-12, 2.5e-6)
    sino = disk_sinogram(40e-6, tomo.equal_angles(13), x, spec)
    rec = tomo.mlem_reconstruct(sino, 50, spec)
    kl = rec.info["kl_history"]
    assert kl[-1] < 1e-3
    # EM never increases the divergence
    assert np.all(np.diff(kl) <= 1e-12)


def test_mlem_first_iteration_is_normalized_backprojection():
    spec = GridSpec(24, 24, (-50e-6, 50e-6), (-50e-6, 50e-6))
    x = np.arange(-70e-6, 70e-6 + 1e-12, 2e-6)
    sino = gaussian_sinogram(15e-6, tomo.equal_angles(9), x=x)
    rec = tomo.mlem_reconstruct(sino, 1, spec)
    A = tomo.system_matrix(sino, spec)
    m = (sino.values * sino.dx).ravel()
    flat = A @ np.ones(A.shape[1])
    bp = A.T @ np.divide(m, flat, out=np.zeros_like(m), where=flat > 0)
    sens = np.asarray(A.sum(axis=0)).ravel()
    expect = (bp / sens).reshape(spec.np, spec.nq)
    expect /= expect.sum()
    got = rec.values / rec.values.sum()
    assert np.allclose(got, expect, rtol=1e-10, atol=1e-14)


def test_mlem_gaussian_is_isotropic_and_nonnegative():
    rec = tomo.mlem_reconstruct(gaussian_sinogram(15e-6, tomo.equal_angles(13)), 50, SMALL)
    assert rec.values.min() >= 0
    assert abs(tomo.grid_metrics(rec)["anisotropy"] - 1) < 0.05


def test_mlem_handles_zero_bins_and_rejects_zero_iterations():
    sino = disk_sinogram(30e-6, tomo.equal_angles(4), X, SMALL)
    assert np.any(sino.values == 0)
    rec = tomo.mlem_reconstruct(sino, 3, SMALL)
    assert np.all(np.isfinite(rec.values))
    with pytest.raises(InputError):
        tomo.mlem_reconstruct(sino, 0, SMALL)


# --- metrics ---------------------------------------------------------------------------


def test_metrics_isotropic_gaussian():
    g = PhaseSpaceGrid.gaussian(SMALL, 12e-6, 12e-6)
    m = tomo.grid_metrics(g, g)
    assert m["anisotropy"] == pytest.approx(1.0, abs=0.01)
    assert m["anisotropy_full"] == pytest.approx(1.0, abs=0.01)
    assert m["overlap"] == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(8e-6, 25e-6), st.floats(8e-6, 25e-6), st.floats(0, math.pi))
def test_anisotropy_of_elliptical_gaussian(sq, sp, rot):
    spec = GridSpec(128, 128, (-120e-6, 120e-6), (-120e-6, 120e-6))
    g = dyn.phase_rotation(PhaseSpaceGrid.gaussian(spec, sq, sp), rot)
    expect = max(sq, sp) / min(sq, sp)
    # bilinear resampling widens narrow Gaussians by ~dq^2/12 per axis
    assert tomo.grid_metrics(g)["anisotropy"] == pytest.approx(expect, rel=0.05)


def test_crescent_angular_spread(params, harmonic, E_shift):
    dE = math.sqrt(params.kT * (params.kT + 2 * E_shift))
    slope = 0.024 / (2 * dE)
    E = np.array([0.0, E_shift + 10 * dE])
    curve = dyn.FrequencyShiftCurve(E, slope * (E - E_shift), harmonic)
    ens = dyn.angle_evolution(dyn.sample_ensemble(params, 85e-6, 50_000, seed=8), curve, 0.5)
    g = PhaseSpaceGrid.from_samples(ens.x, ens.pbar, GridSpec(), smooth_cells=1.0)
    spread = tomo.grid_metrics(g)["angular_spread"]
    assert 2.5 <= spread <= 3.2


def test_zero_mass_grid_is_rejected():
    with pytest.raises(InputError):
        tomo.grid_metrics(SMALL.empty())


def test_grid_validation():
    with pytest.raises(GridError):
        GridSpec(1, 10)
    with pytest.raises(GridError):
        PhaseSpaceGrid(np.full((3, 3), np.nan), (0, 1), (0, 1))


# --- files -----------------------------------------------------------------------------


def test_sinogram_and_grid_files(tmp_path):
    sino = gaussian_sinogram(15e-6, tomo.equal_angles(13))
    tomo.save_sinogram(tmp_path / "s.txt", sino)
    back = tomo.load_sinogram(tmp_path / "s.txt")
    assert np.array_equal(back.angles, sino.angles)
    assert np.allclose(back.x, sino.x, rtol=0, atol=1e-18)
    assert np.array_equal(back.values, sino.values) and back.normalized
    g = tomo.fbp_reconstruct(sino, KC, SMALL)
    tomo.save_grid(tmp_path / "g.psgrid", g)
    gb = tomo.load_grid(tmp_path / "g.psgrid")
    assert np.array_equal(gb.values, g.values) and gb.q_range == g.q_range and gb.p_range == g.p_range


def test_corrupt_files(tmp_path):
    (tmp_path / "bad.txt").write_text("PSSINO1 1 3 0 1\nnope 1 2 3\n")
    with pytest.raises(InputError):
        tomo.load_sinogram(tmp_path / "bad.txt")
    (tmp_path / "bad.psgrid").write_bytes(b"PSGRID1 2 2 0 1 0 1\n" + b"\0" * 8)
    with pytest.raises(InputError):
        tomo.load_grid(tmp_path / "bad.psgrid")
