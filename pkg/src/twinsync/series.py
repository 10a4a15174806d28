"""Chronological splitting, min-max normalization, and sliding-window datasets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, TooShort
from .ingest import TrafficSeries


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.45
    val_frac: float = 0.275
    test_frac: float = 0.275

    def __post_init__(self):
        if min(self.train_frac, self.val_frac, self.test_frac) <= 0:
            raise ValueError("split fractions must be positive")
        if abs(self.train_frac + self.val_frac + self.test_frac - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1.0")


@dataclass(frozen=True)
class Normalizer:
    """Affine map fit on the training split only.

    Out-of-range values are transformed by the same map without clipping, so
    val/test bursts can exceed [0, 1]. A constant training series maps
    everything to 0.
    """

    min_val: float
    max_val: float

    @property
    def span(self) -> float:
        return self.max_val - self.min_val

    def transform(self, x):
        if self.span == 0:
            return np.zeros_like(np.asarray(x, dtype=np.float64))
        return (np.asarray(x, dtype=np.float64) - self.min_val) / self.span

    def inverse(self, y):
        return np.asarray(y, dtype=np.float64) * self.span + self.min_val


IDENTITY_NORMALIZER = Normalizer(0.0, 1.0)


@dataclass
class WindowedDataset:
    inputs: np.ndarray  # (n, window_len), normalized
    targets: np.ndarray  # (n, horizon), normalized
    window_len: int
    horizon: int

    def __len__(self):
        return len(self.inputs)


def split(
    series: TrafficSeries, spec: SplitSpec = SplitSpec()
) -> tuple[TrafficSeries, TrafficSeries, TrafficSeries]:
    """First train_frac, next val_frac, remainder to test (floor rounding)."""
    n = len(series)
    if n < 10:
        raise TooShort(f"need at least 10 points to split, got {n}")
    # cumulative floors keep every split within 1/n of its nominal fraction
    # (flooring train and val independently can push test off by up to 2/n)
    n_train = int(np.floor(spec.train_frac * n))
    n_val = int(np.floor((spec.train_frac + spec.val_frac) * n)) - n_train
    return (
        series.slice(0, n_train, label=f"{series.label}/train"),
        series.slice(n_train, n_train + n_val, label=f"{series.label}/val"),
        series.slice(n_train + n_val, n, label=f"{series.label}/test"),
    )


def fit_normalizer(train: TrafficSeries) -> Normalizer:
    if len(train) == 0:
        raise EmptyInput("cannot fit a normalizer on an empty split")
    return Normalizer(float(train.values.min()), float(train.values.max()))


def make_windows(
    series: TrafficSeries,
    window_len: int,
    horizon: int,
    normalizer: Normalizer = IDENTITY_NORMALIZER,
) -> WindowedDataset:
    """Stride-1 sliding windows; each target immediately follows its window."""
    n = len(series)
    count = n - window_len - horizon + 1
    if count < 1:
        raise TooShort(
            f"series of {n} points cannot supply window {window_len} + horizon {horizon}"
        )
    norm = normalizer.transform(series.values)
    inputs = np.empty((count, window_len), dtype=np.float64)
    targets = np.empty((count, horizon), dtype=np.float64)
    for i in range(count):
        inputs[i] = norm[i : i + window_len]
        targets[i] = norm[i + window_len : i + window_len + horizon]
    return WindowedDataset(inputs, targets, window_len, horizon)
