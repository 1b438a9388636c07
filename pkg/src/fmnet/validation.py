"""Input validation helpers shared by the estimators and metrics."""

from __future__ import annotations

import numpy as np

from .render import Spectrogram

GRID_SHAPE = (48, 80)


def as_spectrogram_batch(X, name: str = "X") -> np.ndarray:
    """Coerce input to a float32 array of shape (N, 48, 80).

    Accepts an (N, 48, 80) or (N, 48, 80, 1) array, a single (48, 80) grid,
    or a sequence of Spectrogram objects / 2-D arrays.
    """
    if isinstance(X, Spectrogram):
        X = X.values[None]
    elif isinstance(X, (list, tuple)) and len(X) > 0 and isinstance(X[0], Spectrogram):
        X = np.stack([s.values for s in X])
    X = np.asarray(X, dtype=np.float32)
    if X.ndim == 2:
        X = X[None]
    if X.ndim == 4 and X.shape[-1] == 1:
        X = X[..., 0]
    if X.ndim != 3 or X.shape[1:] != GRID_SHAPE:
        raise ValueError(
            f"{name}: expected spectrogram batch of shape (N, 48, 80), got {tuple(np.shape(X))}"
        )
    if not np.isfinite(X).all():
        raise ValueError(f"{name}: spectrogram values must be finite")
    return X


def check_matched(X: np.ndarray, y: np.ndarray, name_x: str = "X", name_y: str = "y") -> None:
    if X.shape[0] != y.shape[0]:
        raise ValueError(
            f"{name_x} and {name_y} must pair up sample-for-sample: "
            f"{X.shape[0]} vs {y.shape[0]} rows"
        )
    if X.shape[0] == 0:
        raise ValueError("training set is empty")
