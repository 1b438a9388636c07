"""Render scatterer tracks into a 48x80 micro-Doppler spectrogram.

Synthesis chain: complex baseband signal from per-track Doppler histories,
Hann-window STFT, magnitude in dB clipped to a fixed dynamic range, crop to
the 48 Doppler bins centred on zero, linear time-resampling to exactly 80
frames, min-max normalisation to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
from scipy import signal as sps

from .motion import ScattererTrack

SPEED_OF_LIGHT_MPS = 3.0e8


@dataclass(frozen=True)
class RenderParams:
    """Time-frequency parameters of the synthesis chain."""

    sample_rate_hz: float = 500.0
    carrier_hz: float = 5.8e9
    window_len: int = 64
    hop: int = 16
    fft_size: int = 96
    n_doppler: int = 48
    n_frames: int = 80
    dynamic_range_db: float = 40.0

    @property
    def doppler_bin_hz(self) -> float:
        return self.sample_rate_hz / self.fft_size

    @property
    def doppler_extent_hz(self) -> float:
        """Half-span of the cropped Doppler axis."""
        return self.doppler_bin_hz * self.n_doppler / 2.0

    def doppler_bins_hz(self) -> np.ndarray:
        """Centre frequency of each of the n_doppler rows (row 0 most negative)."""
        return (np.arange(self.n_doppler) - self.n_doppler // 2) * self.doppler_bin_hz

    def max_in_band_speed_mps(self) -> float:
        """Largest |velocity| whose Doppler peak still falls inside the crop."""
        f_max = (self.n_doppler // 2 - 1) * self.doppler_bin_hz
        return f_max * SPEED_OF_LIGHT_MPS / (2.0 * self.carrier_hz)

    def to_dict(self) -> dict:
        return asdict(self)


DEFAULT_RENDER = RenderParams()


@dataclass
class Spectrogram:
    """A 48x80 Doppler-time grid in [0, 1] with axis metadata."""

    values: np.ndarray
    doppler_extent_hz: float = DEFAULT_RENDER.doppler_extent_hz
    duration_s: float = 5.0

    def validate(self) -> None:
        expected = (DEFAULT_RENDER.n_doppler, DEFAULT_RENDER.n_frames)
        if self.values.shape != expected:
            raise ValueError(f"spectrogram shape {self.values.shape}, expected {expected}")
        v = self.values
        if not (np.isfinite(v).all() and v.min() >= 0.0 and v.max() <= 1.0):
            raise ValueError("spectrogram values must be finite and within [0, 1]")
        if v.min() != 0.0 or v.max() != 1.0:
            raise ValueError("spectrogram must attain both 0 and 1 after normalisation")


class OutOfBandError(ValueError):
    """A track's Doppler shift falls outside the rendered Doppler span."""


def doppler_shift_hz(velocity_mps, carrier_hz: float = DEFAULT_RENDER.carrier_hz):
    """Monostatic Doppler shift f_d = 2 v f_c / c."""
    return 2.0 * np.asarray(velocity_mps) * carrier_hz / SPEED_OF_LIGHT_MPS


def min_max_normalize(values: np.ndarray) -> np.ndarray:
    lo = values.min()
    hi = values.max()
    if hi <= lo:
        raise ValueError("cannot min-max normalise a constant array")
    return (values - lo) / (hi - lo)


def render_clean(tracks: list[ScattererTrack], params: RenderParams = DEFAULT_RENDER) -> Spectrogram:
    """Render tracks to a normalised Doppler-time grid.

    Raises OutOfBandError if any track's peak Doppler shift lies outside the
    cropped Doppler span.
    """
    if not tracks:
        raise ValueError("tracks must be non-empty")
    n = tracks[0].velocity_series.shape[0]
    for track in tracks:
        if track.velocity_series.shape[0] != n:
            raise ValueError("all tracks must share the same number of samples")

    v_limit = params.max_in_band_speed_mps()
    for i, track in enumerate(tracks):
        peak = float(np.max(np.abs(track.velocity_series)))
        if peak > v_limit:
            raise OutOfBandError(
                f"track {i} ({track.part.value}) peaks at {peak:.3f} m/s "
                f"({doppler_shift_hz(peak, params.carrier_hz):.1f} Hz), beyond the "
                f"{params.doppler_extent_hz:.1f} Hz span (max {v_limit:.3f} m/s)"
            )

    x = np.zeros(n, dtype=np.complex128)
    for track in tracks:
        f_d = doppler_shift_hz(track.velocity_series, params.carrier_hz)
        phase = 2.0 * np.pi * np.cumsum(f_d) / params.sample_rate_hz
        x += track.amplitude * np.exp(1j * phase)

    _, _, stft = sps.stft(
        x,
        fs=params.sample_rate_hz,
        window="hann",
        nperseg=params.window_len,
        noverlap=params.window_len - params.hop,
        nfft=params.fft_size,
        detrend=False,
        return_onesided=False,
        boundary=None,
        padded=False,
    )
    stft = np.fft.fftshift(stft, axes=0)
    n_frames_raw = stft.shape[1]
    if n_frames_raw < params.n_frames:
        raise ValueError(
            f"signal too short: {n_frames_raw} STFT frames, need >= {params.n_frames}"
        )

    mag_db = 20.0 * np.log10(np.abs(stft) + 1e-12)
    mag_db = np.maximum(mag_db, mag_db.max() - params.dynamic_range_db)

    half = params.fft_size // 2
    rows = slice(half - params.n_doppler // 2, half + params.n_doppler // 2)
    cropped = mag_db[rows, :]

    # Linear resampling of the time axis to exactly n_frames columns.
    src = np.arange(n_frames_raw, dtype=np.float64)
    dst = np.linspace(0.0, n_frames_raw - 1.0, params.n_frames)
    resampled = np.empty((params.n_doppler, params.n_frames))
    for r in range(params.n_doppler):
        resampled[r] = np.interp(dst, src, cropped[r])

    values = min_max_normalize(resampled).astype(np.float32)
    spec = Spectrogram(values, params.doppler_extent_hz, n / params.sample_rate_hz)
    spec.validate()
    return spec
