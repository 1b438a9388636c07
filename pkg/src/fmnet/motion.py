"""Seeded velocity-envelope templates for six human activities.

Each activity maps to a hand-designed radial-velocity template for a torso
scatterer plus limb scatterers. Template parameters (peak velocity, phase
boundaries, gait frequency) are drawn from per-activity uniform ranges using
only the provided seed, so track synthesis is fully reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

MAX_SPEED_MPS = 4.0  # hard bound on any human radial velocity

DEFAULT_SAMPLE_RATE_HZ = 500.0

# Per-subject scaling of drawn peak velocities; keeps the three subjects
# distinguishable without separate template families.
SUBJECT_SPEED_SCALE = {1: 0.92, 2: 1.0, 3: 1.08}


class Activity(str, Enum):
    SIT_DOWN = "sit_down"
    STAND_UP = "stand_up"
    SIT_TO_WALK = "sit_to_walk"
    WALK_TO_SIT = "walk_to_sit"
    WALK_TO_FALL = "walk_to_fall"
    FLOOR_TO_WALK = "floor_to_walk"


ACTIVITIES = tuple(a.value for a in Activity)

# Short labels used on confusion-matrix axes.
ACTIVITY_ABBREV = {
    Activity.STAND_UP: "SU",
    Activity.SIT_DOWN: "SD",
    Activity.SIT_TO_WALK: "SW",
    Activity.WALK_TO_SIT: "WS",
    Activity.WALK_TO_FALL: "WF",
    Activity.FLOOR_TO_WALK: "FW",
}


class Part(str, Enum):
    TORSO = "torso"
    LEFT_LIMB = "left_limb"
    RIGHT_LIMB = "right_limb"


@dataclass
class ScattererTrack:
    """One point scatterer: a reflectivity and a radial-velocity series."""

    amplitude: float
    velocity_series: np.ndarray
    part: Part

    def validate(self, duration_s: float, sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ) -> None:
        n_expected = int(round(duration_s * sample_rate_hz))
        if self.velocity_series.shape != (n_expected,):
            raise ValueError(
                f"velocity series has {self.velocity_series.shape[0]} samples, "
                f"expected {n_expected} for {duration_s} s at {sample_rate_hz} Hz"
            )
        if not 0.0 < self.amplitude <= 1.0:
            raise ValueError(f"amplitude must be in (0, 1], got {self.amplitude}")
        peak = float(np.max(np.abs(self.velocity_series)))
        if peak > MAX_SPEED_MPS:
            raise ValueError(f"velocity exceeds {MAX_SPEED_MPS} m/s bound: {peak:.3f}")


def _half_sine(t: np.ndarray, start: float, duration: float) -> np.ndarray:
    """Unit half-sine lobe supported on [start, start + duration], zero outside."""
    u = (t - start) / duration
    lobe = np.sin(np.pi * np.clip(u, 0.0, 1.0))
    lobe[(u < 0.0) | (u > 1.0)] = 0.0
    return lobe


def _ramp(t: np.ndarray, start: float, rise: float = 0.35) -> np.ndarray:
    """0->1 linear ramp starting at `start` over `rise` seconds."""
    return np.clip((t - start) / rise, 0.0, 1.0)


def _sit_stand_tracks(rng: np.random.Generator, t: np.ndarray, sign: float, scale: float):
    """Shared template for sit-down (sign=-1) and stand-up (sign=+1).

    The two activities are exact mirrors: under the same seed the stand-up
    torso series is the negation of the sit-down torso series.
    """
    start = rng.uniform(0.6, 1.2)
    move_dur = rng.uniform(1.0, 1.8)
    v_peak = rng.uniform(0.9, 1.3) * scale
    lean = rng.uniform(0.45, 0.65)

    torso = sign * v_peak * _half_sine(t, start, move_dur)
    # Legs articulate slightly later and weaker than the torso.
    left = sign * lean * v_peak * _half_sine(t, start + 0.15 * move_dur, 0.9 * move_dur)
    right = sign * (lean - 0.1) * v_peak * _half_sine(t, start + 0.25 * move_dur, 0.8 * move_dur)
    return torso, left, right


def _walk_components(rng: np.random.Generator, t: np.ndarray, scale: float):
    """Draw shared walking-gait parameters: forward speed and limb swing."""
    v_walk = rng.uniform(0.8, 1.2) * scale
    gait_hz = rng.uniform(1.5, 2.5)
    swing = rng.uniform(0.6, 1.1) * scale
    phase0 = rng.uniform(0.0, 2.0 * np.pi)
    osc = np.sin(2.0 * np.pi * gait_hz * t + phase0)
    return v_walk, swing, osc


def synth_tracks(
    activity: Activity | str,
    duration_s: float,
    seed: int,
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
    subject: int | None = None,
) -> list[ScattererTrack]:
    """Synthesize 3-5 scatterer tracks for one activity realisation.

    All randomness comes from `seed`; calling twice with the same arguments
    returns bit-identical tracks. `subject`, when given, scales drawn peak
    velocities by a fixed per-subject factor.
    """
    try:
        activity = Activity(activity)
    except ValueError:
        raise ValueError(f"unknown activity {activity!r}; expected one of {ACTIVITIES}") from None
    if not 4.0 <= duration_s <= 10.0:
        raise ValueError(f"duration_s must be in [4, 10], got {duration_s}")
    scale = 1.0 if subject is None else SUBJECT_SPEED_SCALE[subject]

    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sample_rate_hz))
    t = np.arange(n) / sample_rate_hz

    if activity in (Activity.SIT_DOWN, Activity.STAND_UP):
        sign = -1.0 if activity is Activity.SIT_DOWN else 1.0
        torso, left, right = _sit_stand_tracks(rng, t, sign, scale)

    elif activity is Activity.SIT_TO_WALK:
        rise_start = rng.uniform(0.4, 0.8)
        rise_dur = rng.uniform(0.8, 1.4)
        v_rise = rng.uniform(0.8, 1.2) * scale
        v_walk, swing, osc = _walk_components(rng, t, scale)
        walk_start = rise_start + rise_dur
        gate = _ramp(t, walk_start)
        torso = v_rise * _half_sine(t, rise_start, rise_dur) + v_walk * gate
        left = torso + swing * osc * gate
        right = torso - swing * osc * gate

    elif activity is Activity.WALK_TO_SIT:
        sit_dur = rng.uniform(1.0, 1.6)
        stop = duration_s - sit_dur - rng.uniform(0.4, 0.9)
        v_sit = rng.uniform(0.9, 1.3) * scale
        v_walk, swing, osc = _walk_components(rng, t, scale)
        gate = 1.0 - _ramp(t, stop)
        torso = v_walk * _ramp(t, 0.2) * gate - v_sit * _half_sine(t, stop, sit_dur)
        left = torso + swing * osc * gate
        right = torso - swing * osc * gate

    elif activity is Activity.WALK_TO_FALL:
        fall_dur = rng.uniform(0.3, 0.5)
        fall_start = duration_s - fall_dur - rng.uniform(0.8, 1.5)
        v_fall = rng.uniform(2.3, 2.8) * scale
        v_walk, swing, osc = _walk_components(rng, t, scale)
        gate = 1.0 - _ramp(t, fall_start, rise=0.15)
        torso = v_walk * _ramp(t, 0.2) * gate - v_fall * _half_sine(t, fall_start, fall_dur)
        left = torso + swing * osc * gate
        right = torso - swing * osc * gate

    elif activity is Activity.FLOOR_TO_WALK:
        rise_start = rng.uniform(0.3, 0.7)
        d1 = rng.uniform(0.7, 1.1)
        d2 = rng.uniform(0.6, 1.0)
        v_rise = rng.uniform(1.4, 1.9) * scale
        v_walk, swing, osc = _walk_components(rng, t, scale)
        walk_start = rise_start + d1 + d2
        gate = _ramp(t, walk_start)
        # Two-lobe rise (floor -> kneel -> stand) distinguishes this class
        # from the single-burst sit-to-walk template.
        torso = (
            0.7 * v_rise * _half_sine(t, rise_start, d1)
            + v_rise * _half_sine(t, rise_start + d1, d2)
            + v_walk * gate
        )
        left = torso + swing * osc * gate
        right = torso - swing * osc * gate

    tracks = [
        ScattererTrack(float(rng.uniform(0.85, 1.0)), torso, Part.TORSO),
        ScattererTrack(float(rng.uniform(0.3, 0.5)), left, Part.LEFT_LIMB),
        ScattererTrack(float(rng.uniform(0.3, 0.5)), right, Part.RIGHT_LIMB),
    ]
    # 0-2 extra arm scatterers, swinging against the legs.
    n_arms = int(rng.integers(0, 3))
    for k in range(n_arms):
        side = Part.LEFT_LIMB if k == 0 else Part.RIGHT_LIMB
        arm_sign = -1.0 if k == 0 else 1.0
        arm = 0.5 * torso + arm_sign * 0.3 * (left - torso)
        tracks.append(ScattererTrack(float(rng.uniform(0.15, 0.28)), arm, side))

    for track in tracks:
        track.validate(duration_s, sample_rate_hz)
    return tracks
