"""Per-minute physical activity: counts, steps, activity level and type."""
from __future__ import annotations

import math
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy import signal
from scipy.ndimage import uniform_filter1d

from .config import ActivityConfig
from .ingest import Frames
from .models import LinearOvRModel, Standardizer, feature_spec_hash

LEVELS = ("sedentary", "moderate", "vigorous", "very_vigorous")
ACTIVITY_TYPES = ("lay", "stand", "walk", "run", "cycle", "stairs")
STEP_ALGORITHMS = {"smartphone": "phone_profile", "smartwatch": "watch_profile"}


@lru_cache(maxsize=32)
def bandpass_sos(rate_hz: float, band: tuple = (0.5, 3.0), order: int = 2) -> np.ndarray:
    return signal.butter(order, band, btype="bandpass", fs=rate_hz, output="sos")


def _bandpass(x: np.ndarray, rate_hz: float, band, order, axis=-1) -> np.ndarray:
    return signal.sosfiltfilt(bandpass_sos(float(rate_hz), tuple(band), int(order)), x, axis=axis)


# ----------------------------------------------------------------------------
# activity counts


def frame_counts(frame: np.ndarray, rate_hz: float, band=(0.5, 3.0), order: int = 2) -> float:
    """Integrated norm of the per-axis band-passed acceleration of one frame."""
    bp = _bandpass(np.asarray(frame, dtype=np.float64), rate_hz, band, order, axis=0)
    return float(np.linalg.norm(bp, axis=1).sum() / rate_hz)


def activity_counts(frames: Frames, cfg: Optional[ActivityConfig] = None) -> pd.DataFrame:
    """Activity counts per 60 s frame.

    Each axis is band-passed (zero-phase Butterworth), the per-sample norm
    of the filtered axes is taken and integrated over the frame. Units are
    m/s^2 * s. A constant (gravity) offset is removed by the filter.
    """
    cfg = cfg or ActivityConfig()
    expected = int(round(60 * frames.rate_hz))
    if len(frames) and frames.data.shape[1] != expected:
        raise ValueError(f"frames must hold {expected} samples (60 s at {frames.rate_hz} Hz), "
                         f"got {frames.data.shape[1]}")
    if len(frames) == 0:
        return pd.DataFrame({"minute_start": np.empty(0, np.int64), "counts": np.empty(0)})
    bp = _bandpass(frames.data, frames.rate_hz, cfg.band_hz, cfg.filter_order, axis=1)
    counts = np.linalg.norm(bp, axis=2).sum(axis=1) / frames.rate_hz
    return pd.DataFrame({"minute_start": frames.starts.astype(np.int64), "counts": counts})


def classify_level(counts, cut_points: Sequence[float] = (100.0, 1800.0, 4000.0)):
    """Map counts per minute to an activity level.

    A value equal to a cut point belongs to the higher level. Scalars give a
    level name; arrays give an array of names.
    """
    arr = np.asarray(counts, dtype=np.float64)
    if np.any(arr < 0) or np.any(~np.isfinite(arr)):
        raise ValueError("counts must be finite and non-negative")
    idx = np.searchsorted(np.asarray(cut_points, dtype=np.float64), arr, side="right")
    if np.ndim(arr) == 0:
        return LEVELS[int(idx)]
    return np.asarray(LEVELS, dtype=object)[idx]


def level_index(level: str) -> int:
    return LEVELS.index(level)


# ----------------------------------------------------------------------------
# step counting


def detect_steps(xyz: np.ndarray, rate_hz: float, profile: str, cfg: Optional[ActivityConfig] = None) -> np.ndarray:
    """Return sample indices of validated steps in a continuous recording.

    The acceleration magnitude is band-passed and searched for peaks above
    an adaptive threshold (local mean + k * local std over a sliding
    context, never below ``min_peak_height``) at least
    ``min_step_interval_s`` apart. Peaks only count when they sit inside a
    bout (see :func:`validate_bouts`). Isolated or irregular peaks, the
    typical signature of handling the phone without walking, are discarded.
    """
    cfg = cfg or ActivityConfig()
    if profile not in cfg.step_k:
        raise ValueError(f"unknown device profile {profile!r}")
    xyz = np.asarray(xyz, dtype=np.float64)
    n = len(xyz)
    if n < max(16, int(rate_hz)):
        return np.empty(0, dtype=np.int64)
    mag = np.linalg.norm(xyz, axis=1)
    bp = _bandpass(mag, rate_hz, cfg.band_hz, cfg.filter_order)
    ctx = max(3, int(round(cfg.step_context_s * rate_hz)))
    mu = uniform_filter1d(bp, ctx, mode="nearest")
    var = uniform_filter1d(bp * bp, ctx, mode="nearest") - mu * mu
    sigma = np.sqrt(np.maximum(var, 0.0))
    thr = np.maximum(mu + cfg.step_k[profile] * sigma, cfg.min_peak_height)
    distance = max(1, int(math.ceil(cfg.min_step_interval_s * rate_hz)))
    peaks, _ = signal.find_peaks(bp, distance=distance)
    peaks = peaks[bp[peaks] > thr[peaks]]
    return validate_bouts(peaks, rate_hz, cfg, bp[peaks])


def validate_bouts(peaks: np.ndarray, rate_hz: float, cfg: ActivityConfig,
                   heights: Optional[np.ndarray] = None) -> np.ndarray:
    """Keep peaks belonging to at least one regular run of ``min_bout_peaks``.

    A run is regular when its intervals are all below ``max_step_interval_s``
    and their spread (max - min) relative to the mean is below
    ``bout_dispersion``; with ``heights`` given, the peak heights must obey
    the same relative spread limit times two.
    """
    m = cfg.min_bout_peaks
    if len(peaks) < m:
        return np.empty(0, dtype=np.int64)
    intervals = np.diff(peaks) / rate_hz
    keep = np.zeros(len(peaks), dtype=bool)
    w = m - 1  # intervals per candidate bout
    for i in range(len(intervals) - w + 1):
        iv = intervals[i:i + w]
        if iv.max() > cfg.max_step_interval_s:
            continue
        if (iv.max() - iv.min()) / iv.mean() >= cfg.bout_dispersion:
            continue
        if heights is not None:
            h = heights[i:i + m]
            if (h.max() - h.min()) / h.mean() >= 2 * cfg.bout_dispersion:
                continue
        keep[i:i + m] = True
    return peaks[keep]


def _contiguous_runs(frames: Frames) -> list[list[int]]:
    """Group frame indices whose samples join end-to-end without overlap."""
    if len(frames) == 0:
        return []
    if abs(frames.hop_s - frames.len_s) > 1e-9:
        return [[i] for i in range(len(frames))]
    len_ms = frames.len_s * 1000.0
    runs = [[0]]
    for i in range(1, len(frames)):
        if abs(frames.starts[i] - frames.starts[i - 1] - len_ms) < 1e-6:
            runs[-1].append(i)
        else:
            runs.append([i])
    return runs


def count_steps(frames: Frames, profile: str, cfg: Optional[ActivityConfig] = None) -> pd.DataFrame:
    """Steps per frame.

    Adjacent non-overlapping frames are stitched back together before
    detection so bouts crossing frame edges are not broken up.
    """
    cfg = cfg or ActivityConfig()
    if profile not in STEP_ALGORITHMS:
        raise ValueError(f"unknown device profile {profile!r}")
    steps = np.zeros(len(frames), dtype=np.int64)
    n = frames.samples_per_frame
    for run in _contiguous_runs(frames):
        xyz = frames.data[run].reshape(-1, frames.data.shape[2])
        idx = detect_steps(xyz, frames.rate_hz, profile, cfg)
        np.add.at(steps, np.asarray(run)[idx // n], 1)
    return pd.DataFrame({
        "window_start": frames.starts.astype(np.int64),
        "steps": steps,
        "algorithm": STEP_ALGORITHMS[profile],
    })


# ----------------------------------------------------------------------------
# activity type

TYPE_FEATURE_NAMES = tuple(
    [f"{a}_{s}" for a in "xyz" for s in ("mean", "std", "median", "peaks", "energy")]
    + ["mag_mean", "mag_std", "corr_xy", "corr_xz", "corr_yz", "mag_spectral_entropy", "mag_dominant_hz"]
)
TYPE_FEATURE_DIM = len(TYPE_FEATURE_NAMES)


def _corr(a: np.ndarray, b: np.ndarray) -> float:
    sa, sb = a.std(), b.std()
    if sa < 1e-12 or sb < 1e-12:
        return 0.0
    return float(np.mean((a - a.mean()) * (b - b.mean())) / (sa * sb))


def _spectrum(x: np.ndarray, rate_hz: float) -> tuple[np.ndarray, np.ndarray]:
    x = x - x.mean()
    psd = np.abs(np.fft.rfft(x)) ** 2 / len(x)
    freqs = np.fft.rfftfreq(len(x), 1.0 / rate_hz)
    return freqs, psd


def extract_type_features(frame: np.ndarray, rate_hz: float = 20.0) -> np.ndarray:
    """Feature vector for activity-type recognition from one accelerometer frame."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 2 or frame.shape[1] != 3:
        raise ValueError("frame must have shape (n, 3)")
    if not np.all(np.isfinite(frame)):
        raise ValueError("frame contains NaN or infinite values")
    feats = []
    distance = max(1, int(round(0.25 * rate_hz)))
    for j in range(3):
        a = frame[:, j]
        mean, std = a.mean(), a.std()
        if std > 1e-9:
            n_peaks = len(signal.find_peaks(a - mean, height=std, distance=distance)[0])
        else:
            n_peaks = 0
        feats += [mean, std, np.median(a), float(n_peaks), np.mean(a * a)]
    mag = np.linalg.norm(frame, axis=1)
    feats += [mag.mean(), mag.std()]
    x, y, z = frame.T
    feats += [_corr(x, y), _corr(x, z), _corr(y, z)]
    freqs, psd = _spectrum(mag, rate_hz)
    psd, freqs = psd[1:], freqs[1:]
    total = psd.sum()
    if total > 1e-12 and len(psd) > 1:
        p = psd / total
        nz = p[p > 0]
        entropy = float(-(nz * np.log2(nz)).sum() / np.log2(len(p)))
        dominant = float(freqs[np.argmax(psd)])
    else:
        entropy, dominant = 0.0, 0.0
    feats += [entropy, dominant]
    return np.asarray(feats, dtype=np.float64)


def type_feature_spec(rate_hz: float = 20.0, frame_s: float = 60.0) -> str:
    return feature_spec_hash("activity_type", TYPE_FEATURE_DIM, rate_hz, frame_s)


def train_type_model(X: np.ndarray, y: Sequence[str], seed: int = 0, C: float = 1.0,
                     rate_hz: float = 20.0, frame_s: float = 60.0) -> LinearOvRModel:
    """Fit a one-vs-rest linear SVM over the six activity types."""
    from sklearn.svm import LinearSVC

    X = np.asarray(X, dtype=np.float64)
    y = list(y)
    unknown = set(y) - set(ACTIVITY_TYPES)
    if unknown:
        raise ValueError(f"unknown activity type(s): {sorted(unknown)}")
    scaler = Standardizer.fit(X)
    clf = LinearSVC(C=C, random_state=seed, max_iter=20000, dual="auto")
    idx = np.array([ACTIVITY_TYPES.index(v) for v in y])
    clf.fit(scaler(X), idx)
    coef = np.zeros((len(ACTIVITY_TYPES), X.shape[1]))
    intercept = np.full(len(ACTIVITY_TYPES), -1e3)  # classes absent from training never win
    present = clf.classes_
    if len(present) == 2:
        coef[present[1]], intercept[present[1]] = clf.coef_[0], clf.intercept_[0]
        coef[present[0]], intercept[present[0]] = -clf.coef_[0], -clf.intercept_[0]
    else:
        coef[present] = clf.coef_
        intercept[present] = clf.intercept_
    return LinearOvRModel(
        classes=list(ACTIVITY_TYPES),
        coef=coef,
        intercept=intercept,
        scaler=scaler,
        feature_spec=feature_spec_hash("activity_type", X.shape[1], rate_hz, frame_s),
        meta={"C": C, "seed": seed, "n_train": len(y)},
    )


def classify_type(features: np.ndarray, model: LinearOvRModel) -> tuple[str, np.ndarray]:
    """Return (label, per-class scores summing to one) for one feature vector."""
    scores = model.scores(np.asarray(features, dtype=np.float64).reshape(1, -1))[0]
    return model.classes[int(np.argmax(scores))], scores
