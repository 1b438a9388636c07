"""Parametric corruption of clean spectrograms into "measured"-style ones.

The model composes attenuation of the clean component, multipath ghost
copies, a zero-Doppler clutter ridge, spatially correlated noise and
per-frame gain jitter, followed by clipping and min-max renormalisation.
Two presets are provided: "los" (line of sight) and "ttw" (through the
wall), the latter with weaker signal, more ghosts and stronger noise.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .render import Spectrogram, min_max_normalize

# Fixed blur applied to ghost copies (bins); ghosts are defocused replicas.
GHOST_BLUR_BINS = 1.0


@dataclass(frozen=True)
class CorruptionProfile:
    """Parameters of the measured-spectrogram corruption model."""

    name: str
    clutter_amp: float
    clutter_width_bins: float
    ghost_count: int
    ghost_atten: float
    ghost_doppler_shift_bins: int
    ghost_time_shift_frames: int
    noise_sigma: float
    noise_corr_bins: float
    gain_jitter: float
    signal_atten: float

    def validate(self) -> None:
        if not 0.0 < self.signal_atten <= 1.0:
            raise ValueError(f"signal_atten must be in (0, 1], got {self.signal_atten}")
        if not 0.0 < self.ghost_atten < 1.0:
            raise ValueError(f"ghost_atten must be in (0, 1), got {self.ghost_atten}")
        if self.ghost_count < 0:
            raise ValueError("ghost_count must be >= 0")
        for name in ("clutter_amp", "clutter_width_bins", "noise_sigma", "noise_corr_bins", "gain_jitter"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


LOS_PROFILE = CorruptionProfile(
    name="los",
    clutter_amp=0.9,
    clutter_width_bins=1.6,
    ghost_count=2,
    ghost_atten=0.45,
    ghost_doppler_shift_bins=5,
    ghost_time_shift_frames=6,
    noise_sigma=0.14,
    noise_corr_bins=1.2,
    gain_jitter=0.15,
    signal_atten=0.72,
)

TTW_PROFILE = dataclasses.replace(
    LOS_PROFILE,
    name="ttw",
    signal_atten=LOS_PROFILE.signal_atten * 0.5,
    ghost_count=LOS_PROFILE.ghost_count + 2,
    noise_sigma=LOS_PROFILE.noise_sigma * 1.5,
)

PROFILES = {p.name: p for p in (LOS_PROFILE, TTW_PROFILE)}


def get_profile(name: str) -> CorruptionProfile:
    try:
        return PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown corruption profile {name!r}; expected one of {sorted(PROFILES)}") from None


def _shift2d(a: np.ndarray, d_rows: int, d_cols: int) -> np.ndarray:
    """Integer shift with zero fill (no wrap-around)."""
    out = np.zeros_like(a)
    src_r = slice(max(0, -d_rows), a.shape[0] - max(0, d_rows))
    src_c = slice(max(0, -d_cols), a.shape[1] - max(0, d_cols))
    dst_r = slice(max(0, d_rows), a.shape[0] - max(0, -d_rows))
    dst_c = slice(max(0, d_cols), a.shape[1] - max(0, -d_cols))
    out[dst_r, dst_c] = a[src_r, src_c]
    return out


def corrupt(clean: Spectrogram, profile: CorruptionProfile, seed: int) -> Spectrogram:
    """Corrupt a clean spectrogram deterministically for a given seed.

    Random draw order (fixed): noise field, then per-frame gain jitter.
    With an identity profile (unit attenuation, all other amplitudes zero)
    the output equals the input exactly.
    """
    profile.validate()
    clean.validate()
    rng = np.random.default_rng(seed)
    v = clean.values.astype(np.float32, copy=False)
    n_rows, n_cols = v.shape

    out = profile.signal_atten * v

    for g in range(1, profile.ghost_count + 1):
        ghost = _shift2d(v, g * profile.ghost_doppler_shift_bins, g * profile.ghost_time_shift_frames)
        ghost = gaussian_filter(ghost, GHOST_BLUR_BINS, mode="constant")
        out = out + (profile.ghost_atten**g) * ghost

    if profile.clutter_amp > 0.0:
        rows = np.arange(n_rows) - n_rows // 2
        ridge = profile.clutter_amp * np.exp(-0.5 * (rows / profile.clutter_width_bins) ** 2)
        out = out + ridge.astype(np.float32)[:, None]

    noise = rng.standard_normal((n_rows, n_cols))
    if profile.noise_corr_bins > 0.0:
        noise = gaussian_filter(noise, profile.noise_corr_bins)
        noise = noise / noise.std()  # restore unit variance after smoothing
    out = out + (profile.noise_sigma * noise).astype(np.float32)

    jitter = 1.0 + profile.gain_jitter * rng.standard_normal(n_cols)
    out = out * np.maximum(jitter, 0.0).astype(np.float32)[None, :]

    out = np.clip(out, 0.0, None)
    values = min_max_normalize(out).astype(np.float32)
    spec = Spectrogram(values, clean.doppler_extent_hz, clean.duration_s)
    spec.validate()
    return spec
