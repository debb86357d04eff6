"""Bundled synthetic dataset plus loaders for CSV and raw float32 files.

The synthetic set is seeded Gaussian blobs: one random center per class,
isotropic noise around it. File formats:

- CSV: one sample per row, feature values then the integer label last.
- .f32: raw little-endian float32, each row `features + 1` values with the
  label stored as a float in the final slot.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def make_blobs(
    samples: int,
    classes: int,
    features: int,
    rng: np.random.Generator,
    center_scale: float = 6.0,
    noise: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded Gaussian blobs: (X float32 of shape (samples, features), y int64).

    Class centers are drawn once from N(0, center_scale^2 / features) so the
    expected center separation stays O(center_scale) regardless of
    dimensionality; samples add N(0, noise^2) per coordinate.
    """
    if samples < 1 or classes < 2 or features < 1:
        raise ValueError("need samples >= 1, classes >= 2, features >= 1")
    centers = rng.normal(0.0, center_scale / np.sqrt(features), size=(classes, features))
    y = rng.integers(0, classes, size=samples)
    x = centers[y] + rng.normal(0.0, noise, size=(samples, features))
    return x.astype(np.float32), y.astype(np.int64)


def train_val_split(
    x: np.ndarray, y: np.ndarray, val_fraction: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Shuffle once and split off the trailing fraction for validation."""
    if not 0.0 < val_fraction < 1.0:
        raise ValueError(f"val_fraction must be in (0, 1), got {val_fraction}")
    order = rng.permutation(len(x))
    n_val = max(1, int(round(len(x) * val_fraction)))
    train, val = order[:-n_val], order[-n_val:]
    return x[train], y[train], x[val], y[val]


def save_csv(path: str | Path, x: np.ndarray, y: np.ndarray) -> None:
    rows = np.column_stack([x.astype(np.float64), y.astype(np.float64)])
    np.savetxt(path, rows, delimiter=",", fmt="%.9g")


def load_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    rows = np.loadtxt(path, delimiter=",", ndmin=2)
    if rows.shape[1] < 2:
        raise ValueError(f"{path}: need at least one feature column plus a label")
    return rows[:, :-1].astype(np.float32), rows[:, -1].astype(np.int64)


def save_f32(path: str | Path, x: np.ndarray, y: np.ndarray) -> None:
    rows = np.column_stack([x, y.astype(np.float32)]).astype("<f4")
    rows.tofile(path)


def load_f32(path: str | Path, features: int) -> tuple[np.ndarray, np.ndarray]:
    flat = np.fromfile(path, dtype="<f4")
    width = features + 1
    if flat.size % width:
        raise ValueError(f"{path}: {flat.size} values do not tile rows of {width}")
    rows = flat.reshape(-1, width)
    return rows[:, :-1].astype(np.float32), rows[:, -1].astype(np.int64)
