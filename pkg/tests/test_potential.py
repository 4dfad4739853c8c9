import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phasetomo.errors import InputError
from phasetomo.potential import (
    KB,
    Corrugation,
    PhysicalParams,
    Potential1D,
    load_corrugation,
    save_corrugation,
    synth_paper_corrugation,
)


def test_harmonic_minimum(harmonic):
    V, F = harmonic.evaluate(0.0)
    assert V == 0.0 and F == 0.0


def test_harmonic_energy_at_release_point(harmonic, params):
    V, _ = harmonic.evaluate(85e-6)
    # independent evaluation of 1/2 m w^2 x^2
    ref = 0.5 * params.mass * (2 * math.pi * 38) ** 2 * (85e-6) ** 2
    assert V == pytest.approx(ref, rel=1e-12)
    assert V == pytest.approx(2.97e-29, rel=2e-3)
    assert V / KB == pytest.approx(2.15e-6, rel=5e-3)


def test_mean_energy_oracle_matches_release_energy(params):
    # Monte Carlo: a cloud at rest in the trap centered on x=0 has <p^2/2m + V> = kT
    # plus the displacement energy when the trap is moved by x_shift
    from phasetomo.dynamics import sample_ensemble

    ens = sample_ensemble(params, 85e-6, 100_000, seed=3)
    pot = Potential1D(params)
    assert pot.energy(ens.x, ens.p).mean() == pytest.approx(
        0.5 * pot.stiffness * (85e-6) ** 2 + params.kT, rel=0.01
    )


def test_quartic_doubles_harmonic_at_scale(params):
    pot = Potential1D(params, quartic_scale=100e-6)
    V, _ = pot.evaluate(100e-6)
    assert V == pytest.approx(2 * 0.5 * pot.stiffness * (100e-6) ** 2, rel=1e-12)


def test_non_finite_position_rejected(harmonic):
    with pytest.raises(InputError):
        harmonic.evaluate(np.array([0.0, np.nan]))


def test_synth_scale_zero_is_null():
    c = synth_paper_corrugation(0.0)
    assert np.all(c.dU == 0)
    dU, dF = c(np.linspace(-140e-6, 140e-6, 57))
    assert np.all(dU == 0) and np.all(dF == 0)


def test_synth_amplitude_and_extremum_location():
    c = synth_paper_corrugation(1.0)
    x = np.linspace(-149e-6, 149e-6, 20001)
    dU, _ = c(x)
    assert np.abs(dU).max() / KB == pytest.approx(22e-9, abs=1e-9)
    xm = abs(x[np.argmax(np.abs(dU))])
    assert xm == pytest.approx(80e-6, abs=5e-6)


def test_synth_wells_are_symmetric():
    c = synth_paper_corrugation(1.0)
    x = np.linspace(-140e-6, 140e-6, 301)
    assert np.allclose(c(x)[0], c(-x)[0], rtol=0, atol=1e-12 * np.abs(c.dU).max())


@pytest.mark.parametrize("quartic", [math.inf, 100e-6])
def test_force_is_minus_gradient(params, quartic):
    pot = Potential1D(params, corrugation=synth_paper_corrugation(), quartic_scale=quartic)
    x = np.linspace(-140e-6, 140e-6, 97)
    h = 1e-9
    fd = -(pot.evaluate(x + h)[0] - pot.evaluate(x - h)[0]) / (2 * h)
    F = pot.force(x)
    scale = np.abs(F).max()
    assert np.all(np.abs(fd - F) <= 1e-6 * np.maximum(np.abs(F), 1e-3 * scale))


def test_interpolated_corrugation_is_c1():
    c = synth_paper_corrugation()
    knots = c.x[1:-1]
    eps = 1e-12
    left = c(knots - eps)[1]
    right = c(knots + eps)[1]
    assert np.max(np.abs(left - right)) < 1e-6 * np.abs(c(c.x)[1]).max()


def test_outside_domain_contributes_nothing(params):
    c = synth_paper_corrugation()
    pot = Potential1D(params, corrugation=c)
    x = np.array([-200e-6, 200e-6])
    assert np.all(pot.outside_corrugation(x))
    V, F = pot.evaluate(x)
    assert np.allclose(V, 0.5 * pot.stiffness * x**2, rtol=1e-14)
    assert np.allclose(F, -pot.stiffness * x, rtol=1e-14)


@pytest.mark.parametrize(
    "x,u",
    [
        ([0, 1, 2, 3], [0, 1, np.inf, 0]),
        ([0, 2, 1, 3], [0, 0, 0, 0]),
        ([0, 1, 2], [0, 0, 0]),
    ],
)
def test_bad_corrugation_grids(x, u):
    with pytest.raises(InputError):
        Corrugation(np.array(x, float) * 1e-6, u)


def test_params_validation():
    with pytest.raises(InputError):
        PhysicalParams(temperature=0.0)
    with pytest.raises(InputError):
        PhysicalParams(sigma_el=-1.0)
    assert PhysicalParams(sigma_el=0.0).sigma_el == 0.0


def test_corrugation_roundtrip(tmp_path):
    c = synth_paper_corrugation(0.7)
    save_corrugation(tmp_path / "c.txt", c, "test grid")
    back = load_corrugation(tmp_path / "c.txt")
    assert np.array_equal(back.x, c.x) and np.array_equal(back.dU, c.dU)


def test_corrugation_file_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("0 1\n1 2 3\n")
    with pytest.raises(InputError, match="two columns"):
        load_corrugation(p)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(-149e-6, 149e-6))
def test_scaling_is_linear(scale, x):
    c = synth_paper_corrugation()
    a = c.scaled(scale)(np.array([x]))
    b = c(np.array([x]))
    assert a[0][0] == pytest.approx(scale * b[0][0], rel=1e-12, abs=1e-40)
    assert a[1][0] == pytest.approx(scale * b[1][0], rel=1e-12, abs=1e-40)


@settings(max_examples=40, deadline=None)
@given(st.floats(-300e-6, 300e-6), st.floats(20e-6, 1e-3))
def test_potential_bounded_below_by_harmonic_plus_min_corrugation(x, w):
    pot = Potential1D(PhysicalParams(), corrugation=synth_paper_corrugation(), quartic_scale=w)
    V = float(pot.evaluate(x)[0])
    assert V >= 0.5 * pot.stiffness * x * x - 22e-9 * KB * (1 + 1e-9)
