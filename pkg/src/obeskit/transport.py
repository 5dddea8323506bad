"""Trips between visited places and their transportation mode."""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy import signal

from .config import TransportConfig
from .ingest import CoverageMap, Frames
from .location import PointOfInterest, poi_distance_m
from .models import RbfOvOModel, Standardizer, feature_spec_hash

log = logging.getLogger(__name__)

TRANSPORT_MODES = ("walk_run", "bike", "car", "bus", "train_subway")
# seven raw locomotion labels collapse onto five modes
MODE_MERGE = {
    "walk": "walk_run",
    "run": "walk_run",
    "bike": "bike",
    "car": "car",
    "bus": "bus",
    "train": "train_subway",
    "subway": "train_subway",
    **{m: m for m in TRANSPORT_MODES},
}


@dataclass(frozen=True)
class Trip:
    start_t: int
    end_t: int
    origin_poi: Optional[str] = None
    dest_poi: Optional[str] = None
    mode_sequence: tuple = ()
    dominant_mode: Optional[str] = None
    distance_m: Optional[float] = None

    def __post_init__(self):
        if not self.start_t < self.end_t:
            raise ValueError("trip must satisfy start_t < end_t")

    @property
    def duration_s(self) -> float:
        return (self.end_t - self.start_t) / 1000.0

    @property
    def mode_seconds(self) -> dict:
        return dict(sorted(Counter(self.mode_sequence).items()))

    def to_json(self) -> dict:
        runs = []
        for m in self.mode_sequence:
            if runs and runs[-1][0] == m:
                runs[-1][1] += 1
            else:
                runs.append([m, 1])
        return {
            "start": int(self.start_t),
            "end": int(self.end_t),
            "dominant_mode": self.dominant_mode,
            "mode_seconds": self.mode_seconds,
            "origin": self.origin_poi,
            "dest": self.dest_poi,
            "distance_m": self.distance_m,
            "mode_runs": runs,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Trip":
        seq = tuple(m for m, n in d.get("mode_runs", ()) for _ in range(int(n)))
        return cls(int(d["start"]), int(d["end"]), d.get("origin"), d.get("dest"), seq,
                   d.get("dominant_mode"), d.get("distance_m"))


def merge_modes(labels: Sequence[str]) -> list[str]:
    try:
        return [MODE_MERGE[label] for label in labels]
    except KeyError as exc:
        raise ValueError(f"unknown transport label {exc.args[0]!r}") from None


# ----------------------------------------------------------------------------
# trips


def segment_trips(pois: Sequence[PointOfInterest], coverage: Optional[CoverageMap],
                  cfg: Optional[TransportConfig] = None) -> list[Trip]:
    """One candidate trip per gap between consecutive PoIs.

    Gaps shorter than ``min_trip_s`` or with accelerometer coverage below
    ``min_accel_coverage`` are skipped.
    """
    cfg = cfg or TransportConfig()
    pois = sorted(pois, key=lambda p: p.arrive_t)
    for a, b in zip(pois, pois[1:]):
        if b.arrive_t < a.depart_t:
            raise ValueError(f"PoIs {a.poi_id} and {b.poi_id} overlap in time")
    trips = []
    for a, b in zip(pois, pois[1:]):
        start, end = a.depart_t, b.arrive_t
        if (end - start) / 1000.0 < cfg.min_trip_s:
            continue
        if coverage is not None:
            frac = coverage.recording_ms(start, end) / (end - start)
            if frac < cfg.min_accel_coverage:
                log.info("skipping trip %d-%d: accelerometer coverage %.0f%%", start, end, 100 * frac)
                continue
        trips.append(Trip(start, end, a.poi_id, b.poi_id, distance_m=poi_distance_m(a, b)))
    return trips


# ----------------------------------------------------------------------------
# features

TRANSPORT_FEATURE_NAMES = tuple(
    [f"{a}_{s}" for a in ("x", "y", "z", "mag") for s in ("mean", "std", "min", "max")]
    + [f"psd_band{i}" for i in range(5)]
)


def extract_transport_features(frame: np.ndarray, rate_hz: float = 20.0,
                               cfg: Optional[TransportConfig] = None) -> np.ndarray:
    """Time-domain statistics plus magnitude power in equal-width bands up to ``psd_max_hz``."""
    cfg = cfg or TransportConfig()
    frame = np.asarray(frame, dtype=np.float64)
    expected = int(round(cfg.frame_s * rate_hz))
    if frame.ndim != 2 or frame.shape[1] != 3:
        raise ValueError("frame must have shape (n, 3)")
    if frame.shape[0] < expected:
        raise ValueError(f"frame too short: {frame.shape[0]} < {expected} samples")
    if not np.all(np.isfinite(frame)):
        raise ValueError("frame contains NaN or infinite values")
    mag = np.linalg.norm(frame, axis=1)
    cols = np.column_stack([frame, mag])
    feats = np.concatenate([cols.mean(0), cols.std(0), cols.min(0), cols.max(0)])
    # reorder to per-channel (mean, std, min, max)
    feats = feats.reshape(4, 4).T.ravel()
    return np.concatenate([feats, band_powers(mag, rate_hz, cfg.psd_bands, cfg.psd_max_hz)])


def band_powers(x: np.ndarray, rate_hz: float, n_bands: int = 5, max_hz: float = 10.0) -> np.ndarray:
    freqs, psd = signal.periodogram(x, fs=rate_hz, detrend="constant", scaling="density")
    df = freqs[1] - freqs[0] if len(freqs) > 1 else 1.0
    edges = np.linspace(0.0, max_hz, n_bands + 1)
    out = np.zeros(n_bands)
    for i in range(n_bands):
        hi_ok = freqs <= edges[i + 1] if i == n_bands - 1 else freqs < edges[i + 1]
        out[i] = psd[(freqs >= edges[i]) & hi_ok].sum() * df
    return out


TRANSPORT_FEATURE_DIM = len(TRANSPORT_FEATURE_NAMES)


def transport_feature_spec(rate_hz: float = 20.0, frame_s: float = 1.0) -> str:
    return feature_spec_hash("transport", TRANSPORT_FEATURE_DIM, rate_hz, frame_s)


def frame_features(frames: Frames, cfg: Optional[TransportConfig] = None) -> np.ndarray:
    if len(frames) == 0:
        return np.empty((0, TRANSPORT_FEATURE_DIM))
    return np.vstack([extract_transport_features(f, frames.rate_hz, cfg) for f in frames.data])


# ----------------------------------------------------------------------------
# model


def class_weights(counts: Sequence[int]) -> list[float]:
    """w_i = min_k n_k / n_i, so the rarest class weighs exactly 1."""
    counts = np.asarray(counts, dtype=np.float64)
    if np.any(counts <= 0):
        raise ValueError("class counts must be positive")
    return (counts.min() / counts).tolist()


def train_transport(X: np.ndarray, y: Sequence[str], cfg: Optional[TransportConfig] = None, seed: int = 0,
                    rate_hz: float = 20.0) -> RbfOvOModel:
    """Fit the class-weighted RBF SVM (gamma = 1/D)."""
    from sklearn.svm import SVC

    cfg = cfg or TransportConfig()
    X = np.asarray(X, dtype=np.float64)
    y = merge_modes(y)
    present = [m for m in TRANSPORT_MODES if m in set(y)]
    if len(present) < 2:
        raise ValueError("training data must contain at least two transport modes")
    idx = np.array([present.index(v) for v in y])
    n_k = np.bincount(idx, minlength=len(present))
    weights = class_weights(n_k)
    D = X.shape[1]
    gamma = 1.0 / D
    scaler = Standardizer.fit(X)
    clf = SVC(C=cfg.C, kernel="rbf", gamma=gamma, class_weight=dict(enumerate(weights)),
              decision_function_shape="ovo", random_state=seed)
    clf.fit(scaler(X), idx)
    dual, intercept = clf.dual_coef_, clf.intercept_
    if len(present) == 2:
        # sklearn flips binary signs so that positive favours the second class
        dual, intercept = -dual, -intercept
    return RbfOvOModel(
        classes=present,
        support_vectors=clf.support_vectors_.copy(),
        dual_coef=np.asarray(dual, dtype=np.float64).copy(),
        intercept=np.asarray(intercept, dtype=np.float64).copy(),
        n_support=clf.n_support_.copy(),
        gamma=gamma,
        C=float(cfg.C),
        class_weights=weights,
        scaler=scaler,
        feature_spec=feature_spec_hash("transport", D, rate_hz, cfg.frame_s),
        meta={"seed": seed, "class_counts": dict(zip(present, n_k.tolist()))},
    )


def leave_one_subject_out(X: np.ndarray, y: Sequence[str], subjects: Sequence[str],
                          cfg: Optional[TransportConfig] = None, seed: int = 0) -> tuple[list, list]:
    """Pooled (truth, prediction) over folds that each hold out one subject."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(merge_modes(y))
    subjects = np.asarray(subjects)
    truth, pred = [], []
    for s in sorted(set(subjects.tolist())):
        test = subjects == s
        model = train_transport(X[~test], y[~test].tolist(), cfg, seed)
        truth += y[test].tolist()
        pred += model.predict(X[test])
    return truth, pred


# ----------------------------------------------------------------------------
# classification


def median_filter_labels(labels: Sequence[str], window: int = 9, order: Sequence[str] = TRANSPORT_MODES) -> list[str]:
    """Sliding median over label indices (odd ``window``, edges repeat)."""
    if window % 2 != 1:
        raise ValueError("median window must be odd")
    if len(labels) == 0:
        return []
    idx = np.array([order.index(v) for v in labels])
    # scipy.ndimage.median_filter returns zeros when window > len (scipy 1.15), so pad by hand
    h = window // 2
    padded = np.pad(idx, h, mode="edge")
    win = np.sort(np.lib.stride_tricks.sliding_window_view(padded, window), axis=1)
    return [order[i] for i in win[:, h]]


def dominant(labels: Sequence[str], order: Sequence[str] = TRANSPORT_MODES) -> Optional[str]:
    if not labels:
        return None
    counts = Counter(labels)
    return max(order, key=lambda m: (counts.get(m, 0), -order.index(m))) if counts else None


def classify_trip(trip: Trip, frames: Frames, model: RbfOvOModel,
                  cfg: Optional[TransportConfig] = None) -> Trip:
    """Per-second modes inside the trip, median-filtered, plus the modal mode."""
    cfg = cfg or TransportConfig()
    inside = (frames.starts >= trip.start_t) & (frames.starts + frames.len_s * 1000 <= trip.end_t)
    n = int(inside.sum())
    if n * frames.len_s < cfg.min_trip_s * cfg.min_accel_coverage:
        raise ValueError(f"trip {trip.start_t}-{trip.end_t} has only {n} accelerometer frames")
    X = np.vstack([extract_transport_features(f, frames.rate_hz, cfg) for f in frames.data[inside]])
    raw = model.predict(X)
    smooth = median_filter_labels(raw, cfg.median_window)
    return replace(trip, mode_sequence=tuple(smooth), dominant_mode=dominant(smooth))
