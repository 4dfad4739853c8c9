from dataclasses import replace

import numpy as np
import pytest

from phasetomo.errors import InputError, RefinementError
from phasetomo.wire import EdgeDefect, WireGeometry, amplitude_vs_distance, segment_field, uniform_shift, wire_corrugation_amplitude


def test_segment_field_matches_closed_form():
    # finite straight segment, field point above its midpoint:
    # |B| = mu0 I / (4 pi r) * 2 L / sqrt(L^2 + r^2) for half-length L
    from scipy.constants import mu_0

    L, r = 0.5e-3, 20e-6
    a = np.array([[-L, 0.0, 0.0]])
    b = np.array([[L, 0.0, 0.0]])
    B = segment_field(a, b, np.array([[0.0, 0.0, r]]), 5e-3)
    ref = mu_0 * 5e-3 / (4 * np.pi * r) * 2 * L / np.hypot(L, r)
    assert np.linalg.norm(B) == pytest.approx(ref, rel=1e-9)
    # field circulates around the current: along -y above a wire carrying +x current
    assert B[0, 1] < 0 and abs(B[0, 0]) < 1e-12 * ref and abs(B[0, 2]) < 1e-12 * ref


def shift_geometry(**kw):
    return WireGeometry(**uniform_shift(160e-6, 60e-9), **kw)


def test_shift_amplitude_order_of_magnitude():
    (_, amp), = wire_corrugation_amplitude(shift_geometry())
    assert 10e-9 <= amp <= 40e-9


def test_current_linearity():
    g = shift_geometry()
    (_, a1), = wire_corrugation_amplitude(g)
    (_, a2), = wire_corrugation_amplitude(replace(g, current=2 * g.current))
    assert a2 == pytest.approx(2 * a1, rel=1e-12)


def test_straight_wire_has_no_corrugation():
    g = WireGeometry(edge_left=(EdgeDefect(50e-6, 0.0),), edge_right=(EdgeDefect(50e-6, 0.0),))
    (_, amp), = wire_corrugation_amplitude(g)
    assert amp < 1e-15


def test_amplitude_falls_with_distance():
    table = amplitude_vs_distance(shift_geometry(), [15e-6, 20e-6, 40e-6])
    assert table.shape == (3, 1)
    assert np.all(np.diff(table[:, 0]) < 0)


def test_too_close_is_rejected():
    with pytest.raises(InputError, match="width/4"):
        wire_corrugation_amplitude(shift_geometry(distance=1e-6))


def test_coarse_discretization_is_flagged():
    g = replace(
        WireGeometry(edge_left=(EdgeDefect(5e-6, 1e-6),), edge_right=(EdgeDefect(5e-6, 1e-6),)),
        n_trans=4,
        points_per_wavelength=8,
        distance=2e-6,
    )
    with pytest.raises(RefinementError, match="discretization"):
        wire_corrugation_amplitude(g)


@pytest.mark.parametrize("kw", [{"width": 0.0}, {"current": -1.0}, {"bias_direction": (1.0, 1.0, 0.0)}])
def test_geometry_validation(kw):
    with pytest.raises(InputError):
        WireGeometry(**kw)
