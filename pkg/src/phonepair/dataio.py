"""On-disk formats for recordings and event tables.

A recording lives in two files: ``<name>.nrd`` holding raw little-endian
float32 samples in channel-major order, and ``<name>.nrd.json`` describing
the sample rate and channel list.  Events are UTF-8 TSV files with an
``onset\toffset\tlabel`` header.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

CHANNEL_KINDS = ("gradiometer", "magnetometer", "misc", "audio")

TASKS = ("production", "listening", "playback")


class DataError(ValueError):
    """Raised for malformed or inconsistent on-disk data."""


@dataclass(frozen=True)
class ChannelInfo:
    name: str
    kind: str
    unit: str = ""

    def __post_init__(self):
        if not self.name:
            raise DataError("channel name must be nonempty")
        if self.kind not in CHANNEL_KINDS:
            raise DataError(f"unknown channel kind {self.kind!r}")


@dataclass(frozen=True)
class Recording:
    """Multichannel time series with per-channel metadata."""

    sample_rate: float
    channels: tuple[ChannelInfo, ...]
    data: np.ndarray  # [n_channels, n_samples]

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise DataError("sample_rate must be positive")
        object.__setattr__(self, "channels", tuple(self.channels))
        names = [c.name for c in self.channels]
        if len(set(names)) != len(names):
            raise DataError("channel names must be unique")
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise DataError("data must be a 2-D [channels x samples] array")
        if data.shape[0] != len(self.channels):
            raise DataError(
                f"data has {data.shape[0]} rows but {len(self.channels)} channels"
            )
        if data.shape[1] == 0:
            raise DataError("recording must contain at least one sample")
        if not np.all(np.isfinite(data)):
            raise DataError("recording contains non-finite samples")
        object.__setattr__(self, "data", data)

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    def with_data(self, data: np.ndarray, sample_rate: float | None = None) -> "Recording":
        """Copy of this recording with new samples (same channels)."""
        return Recording(
            sample_rate=self.sample_rate if sample_rate is None else sample_rate,
            channels=self.channels,
            data=data,
        )


@dataclass(frozen=True)
class Event:
    onset: float
    offset: float
    label: str


@dataclass(frozen=True)
class EventTable:
    events: tuple[Event, ...]

    def __post_init__(self):
        evs = tuple(sorted(self.events, key=lambda e: (e.onset, e.offset, e.label)))
        for e in evs:
            if not (0 <= e.onset < e.offset):
                raise DataError(
                    f"invalid event interval [{e.onset}, {e.offset}] for {e.label!r}"
                )
            if not e.label:
                raise DataError("event label must be nonempty")
        object.__setattr__(self, "events", evs)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def labels(self) -> list[str]:
        return [e.label for e in self.events]


@dataclass(frozen=True)
class Manifest:
    subject_id: str
    task: str
    recording_path: str
    events_path: str
    sample_rate: float

    def __post_init__(self):
        if self.task not in TASKS:
            raise DataError(f"unknown task {self.task!r}")


def save_recording(rec: Recording, path: str) -> None:
    """Write ``path`` (raw f32 LE, channel-major) plus its JSON sidecar."""
    payload = np.ascontiguousarray(rec.data, dtype="<f4")
    header = {
        "sample_rate": rec.sample_rate,
        "n_samples": rec.n_samples,
        "channels": [
            {"name": c.name, "kind": c.kind, "unit": c.unit} for c in rec.channels
        ],
    }
    with open(path, "wb") as f:
        f.write(payload.tobytes())
    with open(path + ".json", "w", encoding="utf-8") as f:
        json.dump(header, f, indent=2, sort_keys=True)
        f.write("\n")


def load_recording(path: str) -> Recording:
    """Load a ``.nrd`` recording, validating header/payload consistency."""
    sidecar = path + ".json"
    if not os.path.exists(path):
        raise DataError(f"recording payload not found: {path}")
    if not os.path.exists(sidecar):
        raise DataError(f"recording sidecar not found: {sidecar}")
    with open(sidecar, encoding="utf-8") as f:
        try:
            header = json.load(f)
        except json.JSONDecodeError as exc:
            raise DataError(f"malformed header {sidecar}: {exc}") from exc
    try:
        sample_rate = float(header["sample_rate"])
        n_samples = int(header["n_samples"])
        channels = tuple(
            ChannelInfo(ch["name"], ch["kind"], ch.get("unit", ""))
            for ch in header["channels"]
        )
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed header {sidecar}: {exc}") from exc
    raw = np.fromfile(path, dtype="<f4")
    expected = len(channels) * n_samples
    if raw.size != expected:
        raise DataError(
            f"sample-count mismatch: header implies {expected} values, "
            f"payload holds {raw.size}"
        )
    data = raw.reshape(len(channels), n_samples)
    return Recording(sample_rate=sample_rate, channels=channels, data=data)


def load_events(path: str) -> EventTable:
    """Load and validate a tab-separated event table."""
    events = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if lineno == 1 and line.split("\t")[:3] == ["onset", "offset", "label"]:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 tab-separated fields")
            try:
                onset, offset = float(parts[0]), float(parts[1])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: unparsable number: {exc}") from exc
            if not (0 <= onset < offset):
                raise DataError(
                    f"{path}:{lineno}: onset {onset} must be >= 0 and < offset {offset}"
                )
            if not parts[2]:
                raise DataError(f"{path}:{lineno}: empty label")
            events.append(Event(onset, offset, parts[2]))
    return EventTable(tuple(events))


def save_events(table: EventTable, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("onset\toffset\tlabel\n")
        for e in table:
            f.write(f"{e.onset:.6f}\t{e.offset:.6f}\t{e.label}\n")


def select_channels(rec: Recording, kinds) -> Recording:
    """Keep only channels whose kind is in ``kinds``, order preserved."""
    if isinstance(kinds, str):
        kinds = {kinds}
    kinds = set(kinds)
    unknown = kinds - set(CHANNEL_KINDS)
    if unknown:
        raise DataError(f"unknown channel kinds: {sorted(unknown)}")
    idx = [i for i, c in enumerate(rec.channels) if c.kind in kinds]
    if not idx:
        raise DataError(f"no channels of kind {sorted(kinds)} present")
    return Recording(
        sample_rate=rec.sample_rate,
        channels=tuple(rec.channels[i] for i in idx),
        data=rec.data[idx],
    )


def load_manifest(path: str) -> Manifest:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    base = os.path.dirname(os.path.abspath(path))

    def _resolve(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    m = Manifest(
        subject_id=str(doc["subject_id"]),
        task=doc["task"],
        recording_path=_resolve(doc["recording_path"]),
        events_path=_resolve(doc["events_path"]),
        sample_rate=float(doc["sample_rate"]),
    )
    for p in (m.recording_path, m.recording_path + ".json", m.events_path):
        if not os.path.exists(p):
            raise DataError(f"manifest {path}: referenced file missing: {p}")
    with open(m.recording_path + ".json", encoding="utf-8") as f:
        header = json.load(f)
    if float(header["sample_rate"]) != m.sample_rate:
        raise DataError(
            f"manifest {path}: sample_rate {m.sample_rate} does not match "
            f"recording header {header['sample_rate']}"
        )
    return m


def save_manifest(m: Manifest, path: str) -> None:
    doc = {
        "subject_id": m.subject_id,
        "task": m.task,
        "recording_path": m.recording_path,
        "events_path": m.events_path,
        "sample_rate": m.sample_rate,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
