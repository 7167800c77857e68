"""Signal conditioning: FIR design, zero-phase filtering, decimation,
two-level db4 wavelet denoising, canonical band table, and z-scoring."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .dataio import Recording


class DspError(ValueError):
    pass


# Canonical oscillation bands (Hz).
BANDS = {
    "Delta": (0.2, 3.0),
    "Theta": (4.0, 7.0),
    "Alpha": (8.0, 13.0),
    "Beta": (14.0, 31.0),
    "Gamma": (32.0, 100.0),
    "HGA": (60.0, 300.0),
}

BAND_ORDER = ("Delta", "Theta", "Alpha", "Beta", "Gamma", "HGA")


def band_spec(name: str) -> tuple[float, float]:
    if name not in BANDS:
        raise DspError(f"unknown band {name!r}; expected one of {BAND_ORDER}")
    return BANDS[name]


# ---------------------------------------------------------------------------
# FIR design and zero-phase application
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FirFilter:
    coefficients: np.ndarray
    lo: float | None
    hi: float
    fs: float
    transition_lo: float | None
    transition_hi: float

    def __len__(self) -> int:
        return len(self.coefficients)


def _transition_bandwidth(edge: float) -> float:
    # a quarter of the edge frequency, floored at 2 Hz, never wider than
    # the edge itself
    return min(max(0.25 * edge, 2.0), edge)


def _windowed_sinc_lowpass(cutoff: float, fs: float, numtaps: int) -> np.ndarray:
    n = np.arange(numtaps) - (numtaps - 1) / 2
    h = (2.0 * cutoff / fs) * np.sinc(2.0 * cutoff / fs * n)
    h *= np.hamming(numtaps)
    return h / h.sum()  # unit DC gain


def design_fir(lo: float | None, hi: float, fs: float) -> FirFilter:
    """Hamming-windowed sinc filter: low-pass (lo=None) or band-pass.

    Cutoffs sit half a transition-width outside the requested edges so the
    passband stays flat up to the edge and the stop band begins one
    transition-width past it.
    """
    nyq = fs / 2.0
    if hi is None:
        raise DspError("high edge is required (low-pass or band-pass only)")
    if hi >= nyq:
        raise DspError(f"high edge {hi} Hz must be below Nyquist {nyq} Hz")
    tbw_hi = _transition_bandwidth(hi)
    if hi + tbw_hi / 2.0 >= nyq:
        raise DspError(f"transition band of edge {hi} Hz exceeds Nyquist {nyq} Hz")
    if lo is not None:
        if lo <= 0:
            raise DspError("low edge must be positive for a band-pass design")
        if lo >= hi:
            raise DspError(f"low edge {lo} must be below high edge {hi}")
        tbw_lo = _transition_bandwidth(lo)
        min_tbw = min(tbw_lo, tbw_hi)
    else:
        tbw_lo = None
        min_tbw = tbw_hi

    numtaps = math.ceil(3.3 * fs / min_tbw)
    if numtaps % 2 == 0:
        numtaps += 1

    h_hi = _windowed_sinc_lowpass(hi + tbw_hi / 2.0, fs, numtaps)
    if lo is None:
        h = h_hi
    else:
        h_lo = _windowed_sinc_lowpass(lo - tbw_lo / 2.0, fs, numtaps)
        h = h_hi - h_lo
    return FirFilter(
        coefficients=h, lo=lo, hi=hi, fs=fs,
        transition_lo=tbw_lo, transition_hi=tbw_hi,
    )


def apply_zero_phase(filt: FirFilter, x: np.ndarray) -> np.ndarray:
    """Filter with no net delay: reflect-pad, convolve once, crop center.

    Accepts a 1-D signal or a [channels x samples] matrix (filtered per row).
    """
    h = filt.coefficients
    x = np.asarray(x, dtype=float)
    one_d = x.ndim == 1
    if one_d:
        x = x[None, :]
    n = x.shape[1]
    if n <= len(h):
        raise DspError(f"signal length {n} must exceed filter length {len(h)}")
    pad = (len(h) - 1) // 2
    padded = np.pad(x, ((0, 0), (pad, pad)), mode="reflect")
    if len(h) > 64:
        y = fftconvolve(padded, h[None, :], mode="valid", axes=1)
    else:
        y = np.apply_along_axis(lambda row: np.convolve(row, h, mode="valid"), 1, padded)
    return y[0] if one_d else y


def decimate(rec: Recording, factor: int = 10) -> Recording:
    """Antialias low-pass (cutoff fs/2/factor) then keep every factor-th sample."""
    if factor < 1 or int(factor) != factor:
        raise DspError("decimation factor must be a positive integer")
    if factor == 1:
        return rec
    cutoff = 0.5 * rec.sample_rate / factor
    filt = design_fir(None, cutoff, rec.sample_rate)
    filtered = apply_zero_phase(filt, rec.data)
    out = filtered[:, ::factor]
    if out.shape[1] < 2:
        raise DspError("decimated recording would have fewer than 2 samples")
    return rec.with_data(out, sample_rate=rec.sample_rate / factor)


# ---------------------------------------------------------------------------
# Daubechies-4 two-level wavelet decomposition
# ---------------------------------------------------------------------------

# db4 decomposition low-pass taps (8 coefficients, 4 vanishing moments).
_DEC_LO = np.array([
    -0.010597401784997278,
    0.032883011666982945,
    0.030841381835986965,
    -0.18703481171888114,
    -0.02798376941698385,
    0.6308807679295904,
    0.7148465705525415,
    0.23037781330885523,
])
_FILT_LEN = len(_DEC_LO)
_REC_LO = _DEC_LO[::-1].copy()
_DEC_HI = ((-1) ** np.arange(_FILT_LEN)) * _REC_LO
_REC_HI = _DEC_HI[::-1].copy()
_IDWT_OFFSET = 6  # crop start of the synthesis convolution (fixed by the
                  # symmetric-extension alignment below)


def _sym_ext(x: np.ndarray, p: int) -> np.ndarray:
    return np.concatenate([x[p - 1::-1], x, x[:-p - 1:-1]])


def _dwt_step(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = _FILT_LEN - 1
    ext = _sym_ext(x, p)
    lo = np.convolve(ext, _DEC_LO)[p: p + len(x) + p][1::2]
    hi = np.convolve(ext, _DEC_HI)[p: p + len(x) + p][1::2]
    return lo, hi


def _idwt_step(cA: np.ndarray, cD: np.ndarray, n_out: int) -> np.ndarray:
    up_a = np.zeros(2 * len(cA))
    up_a[::2] = cA
    up_d = np.zeros(2 * len(cD))
    up_d[::2] = cD
    rec = np.convolve(up_a, _REC_LO) + np.convolve(up_d, _REC_HI)
    return rec[_IDWT_OFFSET: _IDWT_OFFSET + n_out]


@dataclass(frozen=True)
class WaveletDecomposition:
    """Full-length branch signals of the two-level split s = a2 + d2 + d1."""

    a1: np.ndarray
    d1: np.ndarray
    a2: np.ndarray
    d2: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.a2 + self.d2 + self.d1


def wavelet_decompose(x: np.ndarray) -> WaveletDecomposition:
    """Two-level db4 analysis with symmetric extension, each component
    reconstructed back to the input length."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DspError("wavelet_decompose expects a 1-D signal")
    n = len(x)
    if n < _FILT_LEN:
        raise DspError(f"signal length {n} is below the filter length {_FILT_LEN}")
    cA1, cD1 = _dwt_step(x)
    cA2, cD2 = _dwt_step(cA1)
    n1 = len(cA1)
    z1 = np.zeros_like(cD1)
    z2 = np.zeros_like(cD2)
    a1 = _idwt_step(cA1, z1, n)
    d1 = _idwt_step(np.zeros_like(cA1), cD1, n)
    a2 = _idwt_step(_idwt_step(cA2, z2, n1), z1, n)
    d2 = _idwt_step(_idwt_step(np.zeros_like(cA2), cD2, n1), z1, n)
    return WaveletDecomposition(a1=a1, d1=d1, a2=a2, d2=d2)


def wavelet_denoise(x: np.ndarray) -> np.ndarray:
    """Keep only the second-level approximation (details zeroed)."""
    return wavelet_decompose(x).a2


def wavelet_denoise_recording(rec: Recording) -> Recording:
    out = np.vstack([wavelet_denoise(row) for row in rec.data])
    return rec.with_data(out)


# ---------------------------------------------------------------------------
# z-scoring
# ---------------------------------------------------------------------------

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class ZScoreStats:
    mean: np.ndarray
    std: np.ndarray


def compute_zscore_stats(X: np.ndarray) -> ZScoreStats:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DspError("need a 2-D matrix with at least 2 rows for z-score stats")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.maximum(std, STD_FLOOR)
    return ZScoreStats(mean=mean, std=std)


def apply_zscore(X: np.ndarray, stats: ZScoreStats) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[1] != len(stats.mean):
        raise DspError(
            f"feature dimension {X.shape[1]} does not match stats {len(stats.mean)}"
        )
    return (X - stats.mean) / stats.std
