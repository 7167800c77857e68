"""Preprocessing chain and corpus-level evaluation: turns manifests plus a
toggle set into per-(subject, task, pair, model, fold) metric rows."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np

from . import dataio, dsp, evaluation, models
from .epochs import build_pair_dataset, count_phones, extract_epochs

BAND_PASS_LO = 0.2  # Hz, low edge used whenever a band limit is set


class PipelineError(ValueError):
    pass


@dataclass(frozen=True)
class PreprocessingToggles:
    sensor_kinds: tuple = ("gradiometer",)
    wavelet: bool = True
    decimation_factor: int = 10
    band_limit: float | None = 31.0  # band-pass 0.2..band_limit Hz, or None

    def __post_init__(self):
        object.__setattr__(self, "sensor_kinds", tuple(self.sensor_kinds))
        if self.decimation_factor < 1:
            raise PipelineError("decimation_factor must be >= 1")


@dataclass(frozen=True)
class CvConfig:
    k: int = 5
    seed: int = 0


@dataclass(frozen=True)
class EpochWindow:
    tmin: float = -0.1
    tmax: float = 0.2


def preprocess(rec: dataio.Recording, toggles: PreprocessingToggles) -> dataio.Recording:
    """Sensor selection, wavelet denoising (at the incoming rate),
    decimation, then optional band-pass filtering."""
    rec = dataio.select_channels(rec, toggles.sensor_kinds)
    if toggles.wavelet:
        rec = dsp.wavelet_denoise_recording(rec)
    if toggles.decimation_factor > 1:
        rec = dsp.decimate(rec, toggles.decimation_factor)
    if toggles.band_limit is not None:
        filt = dsp.design_fir(BAND_PASS_LO, toggles.band_limit, rec.sample_rate)
        rec = rec.with_data(dsp.apply_zero_phase(filt, rec.data))
    return rec


def resolve_pairs(phone_pairs, inventory) -> list[tuple[str, str]]:
    """Explicit pair list, or all pairs over the selected inventory."""
    if phone_pairs == "auto":
        return [tuple(sorted(p)) for p in combinations(sorted(inventory.selected), 2)]
    pairs = []
    for p in phone_pairs:
        if len(p) != 2 or p[0] == p[1]:
            raise PipelineError(f"invalid phone pair {p!r}")
        pairs.append(tuple(sorted(p)))
    return pairs


def evaluate_recording(
    rec: dataio.Recording,
    events: dataio.EventTable,
    subject: str,
    task: str,
    toggles: PreprocessingToggles,
    model_specs: list,          # list of (name, ModelSpec)
    cv: CvConfig,
    phone_pairs="auto",
    min_count: int = 50,
    window: EpochWindow = EpochWindow(),
    configuration: str = "baseline",
) -> list[dict]:
    """Metric rows for every (pair, model, fold) of one recording."""
    prec = preprocess(rec, toggles)
    eps, _skipped = extract_epochs(prec, events, window.tmin, window.tmax)
    inventory = count_phones(events, min_count=min_count)
    pairs = resolve_pairs(phone_pairs, inventory)
    if not pairs:
        raise PipelineError("no phone pairs to evaluate (inventory too small?)")
    rows = []
    for pair in pairs:
        ds = build_pair_dataset(eps, pair[0], pair[1], seed=cv.seed)
        split = evaluation.kfold(ds.y, k=cv.k, seed=cv.seed)
        for name, spec in model_specs:
            per_fold, _, _ = evaluation.evaluate(spec, ds, split)
            for fold, m in enumerate(per_fold):
                rows.append({
                    "subject": subject,
                    "task": task,
                    "pair": f"{pair[0]}-{pair[1]}",
                    "model": name,
                    "configuration": configuration,
                    "fold": fold,
                    "accuracy": m.accuracy,
                    "f1": m.f1,
                    "auc": m.auc,
                })
    return rows


def evaluate_manifest(manifest: dataio.Manifest, **kwargs) -> list[dict]:
    rec = dataio.load_recording(manifest.recording_path)
    events = dataio.load_events(manifest.events_path)
    return evaluate_recording(
        rec, events, subject=manifest.subject_id, task=manifest.task, **kwargs
    )


ROW_KEY = ("task", "configuration", "model", "subject", "pair", "fold")


def sort_rows(rows: list[dict]) -> list[dict]:
    return sorted(rows, key=lambda r: tuple(r[k] for k in ROW_KEY))


def subject_means(rows: list[dict], metric: str) -> dict:
    """Per-subject mean of a metric over all pairs and folds."""
    acc = {}
    for r in rows:
        acc.setdefault(r["subject"], []).append(r[metric])
    return {s: float(np.mean(v)) for s, v in acc.items()}


def summarize(rows: list[dict]) -> dict:
    """Mean +- std across subjects of per-subject metric means."""
    out = {}
    for metric in ("accuracy", "f1", "auc"):
        per_subject = subject_means(rows, metric)
        vals = [per_subject[s] for s in sorted(per_subject)]
        out[f"{metric}_mean"] = float(np.mean(vals))
        out[f"{metric}_std"] = float(np.std(vals))
    out["n"] = len({r["subject"] for r in rows})
    return out


def paired_metric_vectors(rows_a: list[dict], rows_b: list[dict], metric="accuracy"):
    """Metric vectors aligned on (subject, task, pair, fold) for paired tests."""
    def _index(rows):
        return {(r["subject"], r["task"], r["pair"], r["fold"]): r[metric]
                for r in rows}
    ia, ib = _index(rows_a), _index(rows_b)
    keys = sorted(set(ia) & set(ib))
    if not keys:
        raise PipelineError("no common observations to pair")
    return (np.array([ia[k] for k in keys]), np.array([ib[k] for k in keys]))


def compare_rows(rows_a, rows_b, metric="accuracy"):
    """Wilcoxon on per-example paired metrics; None when all diffs are zero."""
    a, b = paired_metric_vectors(rows_a, rows_b, metric)
    try:
        return evaluation.wilcoxon(a, b)
    except evaluation.EvalError:
        return None
