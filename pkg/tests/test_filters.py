import numpy as np
import pytest
from scipy import signal as sps

from ppgtune.errors import InsufficientData, InvalidBand, InvalidFrequency, InvalidInput, NyquistViolation
from ppgtune.filters import (
    Family,
    FilterSpec,
    SosCascade,
    apply_zero_phase,
    design_bandpass,
    ecg_filter,
    frequency_response,
    padlen,
    ppg_filter,
    sosfiltfilt,
)
from ppgtune.optimize import grid_combinations
from ppgtune.signals import Signal

# float64 round-off on a -40 dB edge; the design itself places the edge exactly
EDGE_TOL = 1e-9


def _probe(fs, n=256):
    return np.linspace(0.0, fs / 2, n)


def _reference(spec, fs):
    if spec.family is Family.CHEBYSHEV2:
        return sps.cheby2(spec.order, spec.stopband_atten_db, [spec.f_low, spec.f_high], "bandpass", fs=fs, output="sos")
    if spec.family is Family.ELLIPTIC:
        return sps.ellip(spec.order, spec.passband_ripple_db, spec.stopband_atten_db, [spec.f_low, spec.f_high],
                         "bandpass", fs=fs, output="sos")
    return sps.butter(spec.order, [spec.f_low, spec.f_high], "bandpass", fs=fs, output="sos")


@pytest.mark.parametrize(
    "spec,fs",
    [
        (ppg_filter(0.5, 4.0), 64.0),
        (ppg_filter(1.7, 1.8), 64.0),
        (ppg_filter(0.4, 5.0, order=6, stopband_atten_db=60), 128.0),
        (ecg_filter(), 250.0),
        (ecg_filter(), 700.0),
        (FilterSpec(Family.ELLIPTIC, 6, 2.0, 30.0, 50.0, 0.5), 500.0),
        (FilterSpec(Family.BUTTERWORTH, 4, 0.2, 5.0), 100.0),
        (FilterSpec(Family.BUTTERWORTH, 2, 0.5, 8.0), 32.0),
    ],
)
def test_magnitude_matches_reference_design(spec, fs):
    c = design_bandpass(spec, fs)
    f = _probe(fs)
    _, h_ref = sps.sosfreqz(_reference(spec, fs), worN=f, fs=fs)
    assert np.max(np.abs(np.abs(frequency_response(c, f, fs)) - np.abs(h_ref))) < 1e-9
    assert c.n_sections == spec.order
    assert c.is_stable()


def test_prototype_order_convention():
    # order counts the low-pass prototype: 4 -> 8 poles in 4 biquads
    c = design_bandpass(ppg_filter(0.5, 4.0), 64.0)
    assert c.n_sections == 4 and len(c.poles()) == 8
    assert abs(frequency_response(c, [2.0], 64.0)[0]) >= 0.9


def test_chebyshev2_edges_sit_at_stopband_level():
    fs = 64.0
    for pair in grid_combinations()[::7]:
        c = design_bandpass(ppg_filter(pair.f_low, pair.f_high), fs)
        h = np.abs(frequency_response(c, [pair.f_low, pair.f_high], fs))
        assert np.all(h <= 0.01 + EDGE_TOL)
        assert np.all(h >= 0.01 - 1e-6)  # equiripple: the edge is exactly the stopband level


def test_frequency_response_matches_direct_polynomial_evaluation():
    c = design_bandpass(ppg_filter(0.7, 3.3), 64.0)
    f = np.array([0.0, 0.3, 1.5, 10.0, 32.0])
    z = np.exp(2j * np.pi * f / 64.0)
    h = np.ones(len(f), complex)
    for b0, b1, b2, a0, a1, a2 in c.sos:
        h *= (b0 * z**2 + b1 * z + b2) / (a0 * z**2 + a1 * z + a2)
    assert np.allclose(frequency_response(c, f, 64.0), h, atol=1e-12)


def test_design_errors():
    with pytest.raises(InvalidBand):
        design_bandpass(ppg_filter(4.0, 0.5), 64.0)
    with pytest.raises(InvalidBand):
        design_bandpass(ppg_filter(0.0, 4.0), 64.0)
    with pytest.raises(NyquistViolation):
        design_bandpass(ppg_filter(0.5, 32.0), 64.0)
    with pytest.raises(InvalidInput):
        ppg_filter(0.5, 4.0, order=3)
    c = design_bandpass(ppg_filter(0.5, 4.0), 64.0)
    with pytest.raises(InvalidFrequency):
        frequency_response(c, [33.0], 64.0)
    with pytest.raises(InvalidFrequency):
        frequency_response(c, [-1.0], 64.0)


@pytest.mark.parametrize("spec,fs,n", [(ppg_filter(0.5, 4.0), 64.0, 4000), (ecg_filter(), 250.0, 3000)])
def test_sosfiltfilt_matches_reference(backend, rng, spec, fs, n):
    c = design_bandpass(spec, fs)
    x = rng.normal(size=n).cumsum()
    ref = sps.sosfiltfilt(c.sos.copy(), x, padlen=padlen(c))
    assert np.max(np.abs(sosfiltfilt(c.sos, x) - ref)) < 1e-9 * max(1.0, np.max(np.abs(ref)))


def test_zero_phase_keeps_symmetric_pulse_centered(backend):
    fs = 64.0
    t = np.arange(2048) / fs
    x = np.exp(-0.5 * ((t - 16.0) / 0.1) ** 2)
    y = apply_zero_phase(design_bandpass(ppg_filter(0.5, 4.0), fs), Signal(x, fs))
    assert np.argmax(y.samples) == np.argmax(x)


def test_passband_sinusoid_survives(backend):
    fs = 64.0
    t = np.arange(60 * 64) / fs
    x = np.sin(2 * np.pi * 1.5 * t)
    y = sosfiltfilt(design_bandpass(ppg_filter(0.5, 4.0), fs).sos, x)
    mid = slice(600, -600)
    gain = np.abs(frequency_response(design_bandpass(ppg_filter(0.5, 4.0), fs), [1.5], fs)[0]) ** 2
    assert np.allclose(y[mid], gain * x[mid], atol=1e-3)


def test_sosfiltfilt_too_short():
    c = design_bandpass(ppg_filter(0.5, 4.0), 64.0)
    with pytest.raises(InsufficientData):
        sosfiltfilt(c.sos, np.zeros(padlen(c)))


def test_cascade_is_read_only():
    c = SosCascade(np.array([[1.0, 0, 0, 1.0, 0, 0]]))
    with pytest.raises(ValueError):
        c.sos[0, 0] = 2.0
    assert c.sections == [(1.0, 0.0, 0.0, 0.0, 0.0)]
