import numpy as np
import pytest
from hypothesis import given, strategies as st

from stationary_light.diagnostics import (DiagnosticsRecorder, DiagnosticsSeries, peak_position,
                                          window_weights, windowed_intensity)
from stationary_light.model import FieldState, Grid


def test_window_weights_trapezoid():
    g = Grid(0, 10, 11, 0.5, 1)
    w = window_weights(g, (2, 5))
    assert np.allclose(w, [0, 0, 0.5, 1, 1, 0.5, 0, 0, 0, 0, 0])
    assert window_weights(g, (0, 10)).sum() == pytest.approx(10)


@pytest.mark.parametrize("window", [(5, 2), (-1, 3), (2.2, 2.8)])
def test_window_errors(window):
    with pytest.raises(ValueError):
        window_weights(Grid(0, 10, 11, 0.5, 1), window)


def test_windowed_gaussian_intensity():
    g = Grid.centered(40, 1601, 1)
    s = FieldState(0.0, np.exp(-g.xi ** 2 / 25), np.zeros(g.n_xi))
    # |E+|^2 + |E-|^2 = Es^2 / 2 for Ed = 0
    assert windowed_intensity(s, (-40, 40), g) == pytest.approx(0.5 * 5 * np.sqrt(np.pi / 2), rel=1e-12)
    with pytest.raises(ValueError):
        windowed_intensity(s, (-1, 1), Grid.centered(40, 11, 1))


@given(st.floats(-3.0, 3.0))
def test_peak_position_parabola(c):
    x = np.linspace(-5, 5, 101)
    y = 100.0 - (x - c) ** 2
    assert peak_position(x, y) == pytest.approx(c, abs=1e-12)


def test_peak_at_edge_is_not_refined():
    x = np.arange(5.0)
    assert peak_position(x, x) == 4.0


def test_recorder_rows():
    g = Grid.centered(10, 101, 1)
    rec = DiagnosticsRecorder(g, (-2, 2))
    Es = np.exp(-(g.xi - 1) ** 2)
    rec.record(FieldState(0.0, Es, Es))
    rec.record(FieldState(0.1, Es, -Es))
    s = rec.series()
    assert len(s) == 2
    assert s.peak_plus_pos[0] == pytest.approx(1.0, abs=1e-3)
    assert s.peak_minus_amp[0] == 0.0 and s.peak_plus_amp[1] == 0.0
    assert s.I_window[0] == s.I_window[1] < s.I_total[0]


def test_series_length_check():
    with pytest.raises(ValueError):
        DiagnosticsSeries(tau=[0, 1], I_window=[1])
