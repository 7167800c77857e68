"""Epoch extraction, baseline correction, phone inventories, and balanced
pairwise datasets."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .dataio import EventTable, Recording


class EpochError(ValueError):
    pass


DEFAULT_TMIN = -0.1
DEFAULT_TMAX = 0.2
DEFAULT_MIN_COUNT = 50


@dataclass(frozen=True)
class Epoch:
    data: np.ndarray  # [n_channels, n_times], baseline-corrected
    label: str
    onset: float


@dataclass(frozen=True)
class PhoneInventory:
    counts: dict
    selected: tuple[str, ...]


@dataclass(frozen=True)
class PairDataset:
    X: np.ndarray  # [n_epochs, n_channels * n_times], channel-major rows
    y: np.ndarray  # {0, 1}
    pair: tuple[str, str]
    seed: int
    n_channels: int
    n_times: int


def count_phones(events: EventTable, min_count: int = DEFAULT_MIN_COUNT) -> PhoneInventory:
    """Occurrence counts per label; ``selected`` keeps labels reaching
    ``min_count``, most frequent first."""
    counts = Counter(events.labels())
    selected = [lab for lab, c in counts.items() if c >= min_count]
    selected.sort(key=lambda lab: (-counts[lab], lab))
    return PhoneInventory(counts=dict(counts), selected=tuple(selected))


def extract_epochs(
    rec: Recording,
    events: EventTable,
    tmin: float = DEFAULT_TMIN,
    tmax: float = DEFAULT_TMAX,
) -> tuple[list[Epoch], int]:
    """Cut one window per event and subtract the per-channel pre-onset mean.

    The window holds round((tmax - tmin) * fs) + 1 samples starting at
    round((onset + tmin) * fs).  Events whose window falls outside the
    recording are skipped; the skip count is returned alongside the epochs.
    The baseline segment is [tmin, 0), excluding the onset sample.
    """
    fs = rec.sample_rate
    if fs <= 0:
        raise EpochError("sample rate must be positive")
    if tmin >= tmax:
        raise EpochError("tmin must be below tmax")
    n_times = int(round((tmax - tmin) * fs)) + 1
    n_baseline = int(round(-tmin * fs))  # samples strictly before the onset
    epochs = []
    skipped = 0
    for ev in events:
        start = int(round((ev.onset + tmin) * fs))
        if start < 0 or start + n_times > rec.n_samples:
            skipped += 1
            continue
        window = rec.data[:, start: start + n_times].astype(float)
        if n_baseline > 0:
            window = window - window[:, :n_baseline].mean(axis=1, keepdims=True)
        epochs.append(Epoch(data=window, label=ev.label, onset=ev.onset))
    return epochs, skipped


def flatten_epoch(epoch_data: np.ndarray) -> np.ndarray:
    """Channel-major row vector; inverse of :func:`unflatten_epoch`."""
    return np.asarray(epoch_data).reshape(-1)


def unflatten_epoch(row: np.ndarray, n_channels: int, n_times: int) -> np.ndarray:
    return np.asarray(row).reshape(n_channels, n_times)


def build_pair_dataset(epochs, phone_a: str, phone_b: str, seed: int = 0) -> PairDataset:
    """Balanced binary dataset for one phone pair.

    The majority class is down-sampled uniformly at random (seeded) and the
    rows are shuffled deterministically.  Label 0 goes to the
    lexicographically smaller phone.
    """
    lo, hi = sorted((phone_a, phone_b))
    group0 = [e for e in epochs if e.label == lo]
    group1 = [e for e in epochs if e.label == hi]
    if not group0 or not group1:
        missing = lo if not group0 else hi
        raise EpochError(f"no epochs for phone {missing!r}")
    rng = np.random.default_rng(seed)
    m = min(len(group0), len(group1))

    def _subsample(group):
        if len(group) == m:
            return list(group)
        idx = rng.choice(len(group), size=m, replace=False)
        return [group[i] for i in sorted(idx)]

    group0 = _subsample(group0)
    group1 = _subsample(group1)
    rows = [(flatten_epoch(e.data), 0) for e in group0] + [
        (flatten_epoch(e.data), 1) for e in group1
    ]
    order = rng.permutation(len(rows))
    X = np.vstack([rows[i][0] for i in order])
    y = np.array([rows[i][1] for i in order], dtype=int)
    if not np.all(np.isfinite(X)):
        raise EpochError("pair dataset contains non-finite values")
    n_channels, n_times = group0[0].data.shape
    return PairDataset(
        X=X, y=y, pair=(lo, hi), seed=seed, n_channels=n_channels, n_times=n_times
    )
