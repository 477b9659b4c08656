"""Hamming-windowed 512-point amplitude spectra and band averages."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

NFFT = 512
FS = 500.0
WINDOW_SAMPLES = 500


@dataclass(frozen=True)
class BandDef:
    name: str
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"band {self.name!r}: lo={self.lo} must be < hi={self.hi}")


CANONICAL_BANDS: tuple[BandDef, ...] = (
    BandDef("low-delta", 0.0, 1.0),
    BandDef("high-delta", 1.0, 4.0),
    BandDef("theta", 4.0, 8.0),
    BandDef("alpha", 8.0, 13.0),
    BandDef("beta", 13.0, 30.0),
    BandDef("low-gamma", 30.0, 80.0),
    BandDef("high-gamma", 80.0, 250.0),
)


def parse_bands(text: str) -> tuple[BandDef, ...]:
    """Parse ``"0-1,1-4,4-8"`` (optionally ``name:lo-hi``) into bands."""
    bands = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        name, _, rng = item.rpartition(":")
        lo, sep, hi = rng.partition("-")
        if not sep:
            raise ValueError(f"malformed band {item!r}, expected lo-hi")
        lo_f, hi_f = float(lo), float(hi)
        bands.append(BandDef(name or f"{lo}-{hi}", lo_f, hi_f))
    if not bands:
        raise ValueError("no bands given")
    return tuple(bands)


@dataclass(frozen=True)
class AmplitudeSpectrum:
    freqs: np.ndarray
    amps: np.ndarray


def spectrum_freqs(fs: float = FS, nfft: int = NFFT) -> np.ndarray:
    return np.arange(nfft // 2 + 1) * (fs / nfft)


def fft_512(x) -> np.ndarray:
    """DFT of ``x`` zero-padded to 512 points (all 512 bins)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("fft_512 needs a non-empty 1-D sequence")
    if x.size > NFFT:
        raise ValueError(f"input length {x.size} exceeds {NFFT}")
    return np.fft.fft(x, NFFT)


def _one_sided(bins: np.ndarray, window_sum: float) -> np.ndarray:
    amps = np.abs(bins[..., : NFFT // 2 + 1]) / window_sum
    amps[..., 1 : NFFT // 2] *= 2.0
    return amps


def amplitude_spectra(data: np.ndarray) -> np.ndarray:
    """One-sided amplitude spectra of every row of a ``(P, 500)`` array."""
    data = np.asarray(data, dtype=float)
    if data.shape[-1] != WINDOW_SAMPLES:
        raise ValueError(f"expected {WINDOW_SAMPLES} samples per channel, got {data.shape[-1]}")
    ham = np.hamming(WINDOW_SAMPLES)
    return _one_sided(np.fft.fft(data * ham, NFFT, axis=-1), ham.sum())


def amplitude_spectrum(w, channel: int) -> AmplitudeSpectrum:
    """Amplitude spectrum of one channel of a 1 s, 500 Hz window.

    Scaled so a unit sinusoid spanning the window reads about 1 at its
    peak bin.
    """
    data = w.data
    if not 0 <= channel < data.shape[0]:
        raise IndexError(f"channel {channel} out of range for {data.shape[0]} channels")
    if not np.isclose(w.dt, 1.0 / FS):
        raise ValueError(f"expected dt={1.0 / FS}, got {w.dt}")
    amps = amplitude_spectra(data[channel : channel + 1])[0]
    return AmplitudeSpectrum(spectrum_freqs(), amps)


def band_masks(freqs: np.ndarray, bands: Sequence[BandDef]) -> list[np.ndarray]:
    return [(freqs >= b.lo) & (freqs < b.hi) for b in bands]


def band_average(spec, bands: Sequence[BandDef] = CANONICAL_BANDS) -> np.ndarray:
    """Mean amplitude over bins with ``lo <= freq < hi`` for each band.

    Accepts an :class:`AmplitudeSpectrum` or a bare ``(..., 257)`` array of
    amplitudes. Empty bands yield 0 and emit a warning.
    """
    if isinstance(spec, AmplitudeSpectrum):
        freqs, amps = spec.freqs, spec.amps
    else:
        amps = np.asarray(spec, dtype=float)
        freqs = spectrum_freqs()
    out = np.zeros(amps.shape[:-1] + (len(bands),))
    for i, (band, mask) in enumerate(zip(bands, band_masks(freqs, bands))):
        if not mask.any():
            warnings.warn(f"band {band.name!r} contains no spectral bins", stacklevel=2)
            continue
        out[..., i] = amps[..., mask].mean(axis=-1)
    return out
