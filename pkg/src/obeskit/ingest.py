"""Sensor file parsing, gap detection, resampling and windowing.

Streams are held column-wise in numpy arrays: ``t`` in epoch milliseconds and
``values`` with shape (n, 3) holding either (x, y, z) in m/s^2 or
(lat, lon, accuracy).
"""
from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, NamedTuple, Optional

import numpy as np

log = logging.getLogger(__name__)

G = 9.80665
DEVICE_PROFILES = ("smartphone", "smartwatch")
ACCEL_COLUMNS = ("x", "y", "z")
LOCATION_COLUMNS = ("lat", "lon", "acc")
SUPPORTED_RATE_HZ = (5.0, 25.0)


class ParseError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class EmptyStreamError(ValueError):
    pass


class RateWarning(UserWarning):
    pass


class AccelSample(NamedTuple):
    t: int
    x: float
    y: float
    z: float


class LocationSample(NamedTuple):
    t: int
    lat: float
    lon: float
    accuracy: float


@dataclass(frozen=True)
class SensorStream:
    subject_id: str
    kind: str  # "accel" | "location"
    t: np.ndarray
    values: np.ndarray
    nominal_rate_hz: float
    device_profile: Optional[str] = None
    tz: str = "UTC"

    def __post_init__(self):
        self.t.flags.writeable = False
        self.values.flags.writeable = False

    def __len__(self) -> int:
        return len(self.t)

    @property
    def span_ms(self) -> float:
        return float(self.t[-1] - self.t[0]) if len(self.t) else 0.0

    def samples(self) -> Iterator[AccelSample | LocationSample]:
        cls = AccelSample if self.kind == "accel" else LocationSample
        for t, row in zip(self.t.tolist(), self.values.tolist()):
            yield cls(t, *row)

    def slice_time(self, start_ms: float, end_ms: float) -> "SensorStream":
        lo, hi = np.searchsorted(self.t, [start_ms, end_ms], side="left")
        return replace(self, t=self.t[lo:hi].copy(), values=self.values[lo:hi].copy())


@dataclass(frozen=True)
class Segment:
    start_ms: float
    end_ms: float
    state: str  # "recording" | "gap"

    @property
    def duration_ms(self) -> float:
        return self.end_ms - self.start_ms


@dataclass(frozen=True)
class CoverageMap:
    segments: tuple

    @property
    def recording(self) -> list:
        return [s for s in self.segments if s.state == "recording"]

    @property
    def gaps(self) -> list:
        return [s for s in self.segments if s.state == "gap"]

    def recording_ms(self, start_ms: Optional[float] = None, end_ms: Optional[float] = None) -> float:
        """Recorded time, optionally clipped to ``[start_ms, end_ms]``."""
        total = 0.0
        for s in self.recording:
            lo = s.start_ms if start_ms is None else max(s.start_ms, start_ms)
            hi = s.end_ms if end_ms is None else min(s.end_ms, end_ms)
            if hi > lo:
                total += hi - lo
        return total

    def to_dict(self) -> dict:
        return {"segments": [[s.start_ms, s.end_ms, s.state] for s in self.segments]}

    @classmethod
    def from_dict(cls, d: dict) -> "CoverageMap":
        return cls(tuple(Segment(float(a), float(b), st) for a, b, st in d["segments"]))


@dataclass(frozen=True)
class Frames:
    """Fixed-length windows cut from a uniformly sampled stream."""

    starts: np.ndarray  # epoch ms, one per frame
    data: np.ndarray  # (n_frames, n_samples, channels)
    rate_hz: float
    len_s: float
    hop_s: float
    flagged: int = 0
    flagged_starts: tuple = field(default=())

    def __len__(self) -> int:
        return len(self.starts)

    @property
    def samples_per_frame(self) -> int:
        return int(round(self.len_s * self.rate_hz))


# ----------------------------------------------------------------------------
# parsing


def _estimate_rate(t: np.ndarray) -> float:
    if len(t) < 2:
        return 0.0
    dt = np.median(np.diff(t))
    return 1000.0 / dt if dt > 0 else 0.0


def _read_records(path: Path, columns: tuple) -> tuple[list, dict]:
    """Return ([(line_no, t, *columns)], meta) from a JSONL or CSV file."""
    meta: dict = {}
    rows = []
    if path.suffix.lower() == ".csv":
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            missing = {"t", *columns} - set(reader.fieldnames or ())
            if missing:
                raise ParseError(f"missing column(s): {', '.join(sorted(missing))}", 1)
            for i, rec in enumerate(reader, start=2):
                try:
                    rows.append((i, int(rec["t"]), *(float(rec[c]) for c in columns)))
                except (TypeError, ValueError) as exc:
                    raise ParseError(str(exc), i) from exc
        return rows, meta

    with path.open() as fh:
        for i, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", i) from exc
            if not isinstance(rec, dict):
                raise ParseError("expected a JSON object", i)
            if "meta" in rec:
                if rows:
                    raise ParseError("meta header must precede samples", i)
                meta = dict(rec["meta"])
                continue
            try:
                t = rec["t"]
                if isinstance(t, bool) or not isinstance(t, (int, float)) or t != int(t):
                    raise ValueError(f"timestamp must be integer ms, got {t!r}")
                vals = []
                for c in columns:
                    v = rec[c]
                    if isinstance(v, bool) or not isinstance(v, (int, float)):
                        raise ValueError(f"field {c!r} must be numeric")
                    vals.append(float(v))
                rows.append((i, int(t), *vals))
            except KeyError as exc:
                raise ParseError(f"missing field {exc.args[0]!r}", i) from exc
            except ValueError as exc:
                raise ParseError(str(exc), i) from exc
    return rows, meta


def parse_stream(path: str | Path, kind: str, subject_id: Optional[str] = None,
                 device_profile: Optional[str] = None, tz: Optional[str] = None,
                 rate_band_hz: tuple = SUPPORTED_RATE_HZ) -> SensorStream:
    """Parse an accelerometer or location file into a :class:`SensorStream`.

    Samples come back sorted by time with duplicate timestamps collapsed to
    their first occurrence. The nominal rate is the reciprocal of the median
    inter-sample interval. An accelerometer stream whose rate falls outside
    ``rate_band_hz`` triggers a :class:`RateWarning` but is still returned.
    """
    if kind not in ("accel", "location"):
        raise ValueError(f"unknown stream kind {kind!r}")
    path = Path(path)
    columns = ACCEL_COLUMNS if kind == "accel" else LOCATION_COLUMNS
    rows, meta = _read_records(path, columns)
    if not rows:
        raise EmptyStreamError(f"{path}: no samples")

    for row in rows:
        if not all(math.isfinite(v) for v in row[2:]):
            raise ParseError("non-finite value", row[0])
        if kind == "location":
            _, _, lat, lon, acc = row
            if not (-90 <= lat <= 90 and -180 <= lon <= 180):
                raise ParseError(f"coordinates out of range ({lat}, {lon})", row[0])
            if acc < 0:
                raise ParseError("negative accuracy", row[0])

    t = np.array([r[1] for r in rows], dtype=np.int64)
    values = np.array([r[2:] for r in rows], dtype=np.float64)
    order = np.argsort(t, kind="stable")
    t, values = t[order], values[order]
    keep = np.ones(len(t), dtype=bool)
    keep[1:] = t[1:] != t[:-1]
    n_dup = int((~keep).sum())
    if n_dup:
        log.info("%s: dropped %d duplicate timestamp(s)", path, n_dup)
    t, values = t[keep], values[keep]

    units = meta.get("units", "ms2")
    if kind == "accel":
        if units == "g":
            values = values * G
        elif units != "ms2":
            raise ParseError(f"unknown units {units!r}", 1)

    device = device_profile or meta.get("device")
    if kind == "accel" and device is not None and device not in DEVICE_PROFILES:
        raise ParseError(f"unknown device profile {device!r}", 1)
    rate = _estimate_rate(t)
    if kind == "accel":
        lo, hi = rate_band_hz
        if not lo <= rate <= hi:
            warnings.warn(f"{path}: estimated rate {rate:.2f} Hz outside supported "
                          f"band [{lo}, {hi}] Hz", RateWarning, stacklevel=2)
    return SensorStream(
        subject_id=subject_id or meta.get("subject") or path.stem,
        kind=kind,
        t=t,
        values=values,
        nominal_rate_hz=rate,
        device_profile=device,
        tz=tz or meta.get("tz") or "UTC",
    )


def write_stream(stream: SensorStream, path: str | Path, header: bool = True) -> None:
    """Write a stream as JSONL; ``parse_stream`` reads it back bit-exact."""
    path = Path(path)
    columns = ACCEL_COLUMNS if stream.kind == "accel" else LOCATION_COLUMNS
    with path.open("w") as fh:
        if header:
            meta = {"subject": stream.subject_id, "tz": stream.tz}
            if stream.kind == "accel":
                meta["units"] = "ms2"
                if stream.device_profile:
                    meta["device"] = stream.device_profile
            fh.write(json.dumps({"meta": meta}) + "\n")
        for t, row in zip(stream.t.tolist(), stream.values.tolist()):
            rec = {"t": int(t)}
            rec.update(zip(columns, row))
            fh.write(json.dumps(rec) + "\n")


# ----------------------------------------------------------------------------
# coverage, resampling, windowing


def compute_coverage(stream: SensorStream, gap_threshold_s: float) -> CoverageMap:
    """Partition the stream's span into recording and gap segments.

    Any inter-sample interval longer than ``gap_threshold_s`` is a gap.
    """
    if len(stream) == 0:
        raise EmptyStreamError("cannot compute coverage of an empty stream")
    t = stream.t.astype(np.float64)
    thr = gap_threshold_s * 1000.0
    breaks = np.flatnonzero(np.diff(t) > thr)
    segments = []
    start = t[0]
    for b in breaks:
        segments.append(Segment(start, t[b], "recording"))
        segments.append(Segment(t[b], t[b + 1], "gap"))
        start = t[b + 1]
    segments.append(Segment(start, t[-1], "recording"))
    return CoverageMap(tuple(segments))


def resample(stream: SensorStream, target_hz: float, coverage: Optional[CoverageMap] = None,
             gap_threshold_s: float = 5.0, allow_upsample: bool = False) -> SensorStream:
    """Linearly interpolate an accelerometer stream onto a uniform grid.

    Grid points sit at integer multiples of ``1000 / target_hz`` ms, so
    streams resampled at the same rate share sample instants. Interpolation
    happens inside recording segments only; gaps stay empty.

    Upsampling beyond 1.2x the nominal rate is refused unless
    ``allow_upsample`` is set, since it adds no information.
    """
    if stream.kind != "accel":
        raise ValueError("only accelerometer streams can be resampled")
    if target_hz <= 0:
        raise ValueError("target_hz must be positive")
    if target_hz > stream.nominal_rate_hz * 1.2 and not allow_upsample:
        raise ValueError(f"target {target_hz} Hz exceeds 1.2x nominal rate "
                         f"{stream.nominal_rate_hz:.2f} Hz")
    if coverage is None:
        coverage = compute_coverage(stream, gap_threshold_s)
    period = 1000.0 / target_hz
    t_src = stream.t.astype(np.float64)
    ts, vs = [], []
    for seg in coverage.recording:
        k0 = math.ceil(seg.start_ms / period - 1e-9)
        k1 = math.floor(seg.end_ms / period + 1e-9)
        if k1 < k0:
            continue
        grid = np.arange(k0, k1 + 1, dtype=np.float64) * period
        grid = grid[(grid >= seg.start_ms) & (grid <= seg.end_ms)]
        lo, hi = np.searchsorted(t_src, [seg.start_ms, seg.end_ms], side="left")
        hi = min(hi + 1, len(t_src))
        src_t = t_src[lo:hi]
        src_v = stream.values[lo:hi]
        out = np.column_stack([np.interp(grid, src_t, src_v[:, j]) for j in range(3)])
        ts.append(grid)
        vs.append(out)
    t_new = np.concatenate(ts) if ts else np.empty(0)
    v_new = np.vstack(vs) if vs else np.empty((0, 3))
    return replace(stream, t=t_new, values=v_new, nominal_rate_hz=float(target_hz))


def window(stream: SensorStream, len_s: float, hop_s: float, coverage: Optional[CoverageMap] = None,
           gap_threshold_s: float = 5.0, align_ms: Optional[float] = None) -> Frames:
    """Cut a resampled stream into fixed-length frames.

    Frames start at each recording segment's start (or, with ``align_ms``,
    at the next multiple of ``align_ms``) and step by ``hop_s``. A frame that
    would run into a gap is dropped and counted in ``Frames.flagged``; frames
    that run past the end of the stream are simply not emitted.
    """
    if len_s <= 0:
        raise ValueError("len_s must be positive")
    if hop_s <= 0:
        raise ValueError("hop_s must be positive")
    if coverage is None:
        coverage = compute_coverage(stream, gap_threshold_s)
    rate = stream.nominal_rate_hz
    n = int(round(len_s * rate))
    len_ms, hop_ms = len_s * 1000.0, hop_s * 1000.0
    t = stream.t.astype(np.float64)
    tol = 0.5 * 1000.0 / rate
    segs = coverage.segments
    starts, chunks, flagged_starts = [], [], []
    for i, seg in enumerate(segs):
        if seg.state != "recording":
            continue
        after_gap = i + 1 < len(segs)
        before_gap = i > 0
        if align_ms:
            first = math.ceil(seg.start_ms / align_ms) * align_ms
            if before_gap and first - align_ms + len_ms > seg.start_ms and first > seg.start_ms:
                flagged_starts.append(first - align_ms)
        else:
            first = seg.start_ms
        s = first
        # last sample of a frame sits at s + len_ms - period
        while s + len_ms - 1000.0 / rate <= seg.end_ms + tol:
            lo = int(np.searchsorted(t, s - tol, side="left"))
            if lo + n <= len(t) and abs(t[lo] - s) <= tol:
                starts.append(s)
                chunks.append(stream.values[lo:lo + n])
            s += hop_ms
        if after_gap and s < seg.end_ms + tol:
            flagged_starts.append(s)
    data = np.stack(chunks) if chunks else np.empty((0, n, stream.values.shape[1]))
    return Frames(
        starts=np.asarray(starts, dtype=np.float64),
        data=data,
        rate_hz=rate,
        len_s=len_s,
        hop_s=hop_s,
        flagged=len(flagged_starts),
        flagged_starts=tuple(flagged_starts),
    )


def expected_frame_count(span_s: float, len_s: float, hop_s: float) -> int:
    if span_s < len_s:
        return 0
    return int(math.floor((span_s - len_s) / hop_s + 1e-9)) + 1
