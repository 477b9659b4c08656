import warnings

import numpy as np
import pytest

from dmfreq.dmd import SignalWindow
from dmfreq.spectrum import (CANONICAL_BANDS, BandDef, amplitude_spectra, amplitude_spectrum,
                             band_average, fft_512, parse_bands, spectrum_freqs)


def direct_dft(x, n=512):
    xp = np.zeros(n)
    xp[: len(x)] = x
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) @ xp


def test_fft_matches_direct_dft():
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.standard_normal(rng.integers(1, 513))
        assert np.max(np.abs(fft_512(x) - direct_dft(x))) < 1e-9


def test_parseval():
    x = np.random.default_rng(1).standard_normal(512)
    X = fft_512(x)
    assert abs(np.sum(x**2) - np.sum(np.abs(X) ** 2) / 512) < 1e-9


def test_fft_rejects_long_or_empty():
    with pytest.raises(ValueError):
        fft_512(np.zeros(513))
    with pytest.raises(ValueError):
        fft_512([])


def test_bin_spacing():
    f = spectrum_freqs()
    assert f.size == 257
    assert f[1] == pytest.approx(0.9765625)
    assert f[-1] == 250.0


def test_unit_sinusoid_peak_near_one():
    t = np.arange(500) / 500
    # 0.9765625 * 10 Hz sits exactly on bin 10
    x = np.sin(2 * np.pi * 9.765625 * t)
    amps = amplitude_spectra(x[None])[0]
    assert np.argmax(amps) == 10
    assert amps[10] == pytest.approx(1.0, abs=0.02)


def test_dc_not_doubled():
    amps = amplitude_spectra(np.full((1, 500), 3.0))[0]
    assert amps[0] == pytest.approx(3.0)


def test_amplitude_spectrum_checks_rate():
    w = SignalWindow(np.zeros((2, 500)), 1 / 250)
    with pytest.raises(ValueError):
        amplitude_spectrum(w, 0)
    with pytest.raises(IndexError):
        amplitude_spectrum(SignalWindow(np.zeros((2, 500)), 1 / 500), 2)


def test_alpha_band_of_9_77hz_bin():
    # only bin 10 (9.77 Hz) is set; the alpha band [8, 13) holds bins 9..13, five in all
    amps = np.zeros(257)
    amps[10] = 1.0
    avg = band_average(amps, CANONICAL_BANDS)
    assert avg[3] == pytest.approx(1 / 5)
    assert np.count_nonzero(avg) == 1


def test_band_half_open():
    f = spectrum_freqs()
    b = BandDef("x", f[4], f[6])
    amps = np.arange(257, dtype=float)
    assert band_average(amps, [b])[0] == pytest.approx(4.5)


def test_empty_band_warns():
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        out = band_average(np.ones(257), [BandDef("gap", 0.1, 0.2)])
    assert out[0] == 0.0 and rec


def test_parse_bands():
    bands = parse_bands("0-1, a:1-4")
    assert [(b.name, b.lo, b.hi) for b in bands] == [("0-1", 0, 1), ("a", 1, 4)]
    with pytest.raises(ValueError):
        parse_bands("4-1")
    with pytest.raises(ValueError):
        parse_bands("12")
