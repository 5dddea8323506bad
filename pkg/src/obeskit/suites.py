"""Bundled synthetic benchmark suites.

Each suite is generated deterministically from a seed, so the same seed
always yields the same arrays and truth. Three suites are provided:

``gait_stream``
    One continuous recording of 100-step walking bouts (cadence 1.5-2.5 Hz,
    amplitude 2-5 m/s^2) interleaved with shake-only segments.
``dwell_scenarios``
    Location scenarios with long stays at places at least 500 m apart.
``night_scenarios``
    Overnight accelerometer recordings with interrupted sleep.

The ``run_*`` helpers score a suite with the package's own detectors and
return plain dictionaries, which is what the acceptance tests and the
experiment scripts consume.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from . import activity, ingest, location, signals, sleep
from .config import ActivityConfig, LocationConfig, SleepConfig
from .evaluation import match_pois
from .simulate import SimulatedSubject, simulate

BOUT_STEPS = 100
CADENCE_HZ = (1.5, 2.5)
AMPLITUDE = (2.0, 5.0)


@dataclass
class GaitStream:
    rate_hz: float
    xyz: np.ndarray
    # (kind, first sample, end sample, true steps); kind is "bout" or "shake"
    segments: list = field(default_factory=list)
    cadences: list = field(default_factory=list)

    @property
    def duration_s(self) -> float:
        return len(self.xyz) / self.rate_hz

    def bouts(self) -> list:
        return [s for s in self.segments if s[0] == "bout"]

    def shakes(self) -> list:
        return [s for s in self.segments if s[0] == "shake"]


def gait_stream(seed: int = 0, duration_s: float = 3600.0, rate_hz: float = 20.0,
                shake_fraction: float = 0.2) -> GaitStream:
    """Still rests alternating with walking bouts or shake segments.

    About ``shake_fraction`` of the active segments are shake-only. Each
    bout starts at the trough of a stride so it holds exactly
    ``BOUT_STEPS`` cycles.
    """
    rng = np.random.default_rng(seed)
    chunks, segments, cadences = [], [], []
    n_total = int(duration_s * rate_hz)
    pos = 0

    def add(sig):
        nonlocal pos
        chunks.append(sig)
        pos += len(sig)

    while True:
        rest = int(rng.uniform(5, 20) * rate_hz)
        if rng.random() < shake_fraction:
            n = int(rng.uniform(20, 60) * rate_hz)
            kind = "shake"
        else:
            cad = float(rng.uniform(*CADENCE_HZ))
            n = int(round(BOUT_STEPS / cad * rate_hz))
            kind = "bout"
        if pos + rest + n > n_total:
            break
        add(signals.still(np.arange(rest) / rate_hz, rng))
        t = np.arange(n) / rate_hz
        if kind == "shake":
            add(signals.shake(t, rng))
            segments.append(("shake", pos - n, pos, 0))
        else:
            amp = float(rng.uniform(*AMPLITUDE))
            add(signals.gait(t, rng, cadence=cad, amplitude=amp, phase=-np.pi / 2))
            segments.append(("bout", pos - n, pos, BOUT_STEPS))
            cadences.append(cad)
    tail = n_total - pos
    if tail > 0:
        add(signals.still(np.arange(tail) / rate_hz, rng))
    return GaitStream(rate_hz, np.vstack(chunks), segments, cadences)


def run_gait_stream(stream: GaitStream, profile: str = "smartphone", cfg: Optional[ActivityConfig] = None) -> dict:
    """Detect steps on the whole stream; attribute them to segments.

    A bout collects detected steps within half a stride of its edges,
    since the band-pass filter can shift the first or last peak slightly.
    """
    t0 = time.perf_counter()
    idx = activity.detect_steps(stream.xyz, stream.rate_hz, profile, cfg)
    elapsed = time.perf_counter() - t0
    bout_err, shake_steps = [], []
    cad_iter = iter(stream.cadences)
    for kind, i0, i1, truth in stream.segments:
        if kind == "bout":
            margin = int(math.ceil(0.5 / next(cad_iter) * stream.rate_hz))
            got = int(np.count_nonzero((idx >= i0 - margin) & (idx < i1 + margin)))
            bout_err.append(abs(got - truth))
        else:
            shake_steps.append(int(np.count_nonzero((idx >= i0) & (idx < i1))))
    return {"n_bouts": len(bout_err), "n_shake": len(shake_steps), "bout_abs_error": bout_err,
            "max_bout_error": max(bout_err, default=0), "shake_steps": shake_steps,
            "total_shake_steps": int(sum(shake_steps)), "seconds": elapsed,
            "duration_s": stream.duration_s}


# ----------------------------------------------------------------------------
# dwell suite


def _ring_places(rng: np.random.Generator, n: int, origin=(48.1374, 11.5755), min_sep_m: float = 500.0) -> dict:
    """``n`` places at least ``min_sep_m`` apart within a few kilometres."""
    places = {}
    while len(places) < n:
        north, east = rng.uniform(-3000, 3000, 2)
        lat = origin[0] + north / 111_320.0
        lon = origin[1] + east / (111_320.0 * math.cos(math.radians(origin[0])))
        if all(location.haversine_m(lat, lon, p["lat"], p["lon"]) >= min_sep_m for p in places.values()):
            places[f"place{len(places)}"] = {"lat": float(lat), "lon": float(lon), "category": "other"}
    return places


def dwell_scenarios(seed: int = 0, n: int = 10) -> list[dict]:
    """``n`` single-day scenarios, each visiting 3-5 places for 15-90 min."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        n_places = int(rng.integers(3, 6))
        places = _ring_places(rng, n_places)
        names = list(places)
        blocks = []
        for i, name in enumerate(names):
            if i > 0:
                blocks.append({"type": "trip", "to": name, "mode": str(rng.choice(["walk", "bike", "bus", "car"]))})
            blocks.append({"type": "stay", "duration_min": int(rng.integers(15, 91)),
                           "activity": str(rng.choice(["still", "fidget", "stand"]))})
        out.append({"subject": f"dwell-{k:02d}", "tz": "Europe/Berlin", "start": "2024-05-06T08:00:00",
                    "accel_rate_hz": 5.0, "location_interval_s": 15, "gps_noise_m": 6,
                    "places": places, "start_place": names[0], "blocks": blocks, "seed": seed * 1000 + k})
    return out


def location_stream(sim: SimulatedSubject) -> ingest.SensorStream:
    return ingest.SensorStream(sim.subject, "location", np.asarray(sim.loc_t, dtype=np.int64),
                               np.asarray(sim.loc, dtype=np.float64), 0.0, None, sim.tz)


def run_dwell_suite(scenarios: list[dict], cfg: Optional[LocationConfig] = None, max_dist_m: float = 100.0,
                    min_overlap: float = 0.5) -> dict:
    per, total = {}, None
    for sc in scenarios:
        sim = simulate(sc)
        detected = location.detect_pois(location_stream(sim), cfg)
        res = match_pois(sim.truth["pois"], detected, max_dist_m, min_overlap)
        per[sc["subject"]] = res
        total = res if total is None else total + res
    return {"per_scenario": per, "total": total}


# ----------------------------------------------------------------------------
# night suite


def night_scenarios(seed: int = 0, n: int = 8) -> list[dict]:
    """Evening fidgeting, a 6-9 h night with 0-3 short interrupts, a morning."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        night = int(rng.integers(360, 541))
        n_int = int(rng.integers(0, 4))
        interrupts = []
        if n_int:
            # interrupts spread out over the night, none in the first or last hour
            slots = np.sort(rng.choice(np.arange(60, night - 70, 30), n_int, replace=False))
            interrupts = [[int(s), int(rng.integers(3, 11))] for s in slots]
        blocks = [
            {"type": "stay", "duration_min": int(rng.integers(60, 121)), "activity": "fidget"},
            {"type": "sleep", "duration_min": night, "interrupts": interrupts},
            {"type": "stay", "duration_min": 20, "activity": "stand"},
            {"type": "stay", "duration_min": int(rng.integers(40, 91)), "activity": "fidget"},
        ]
        start = pd.Timestamp("2024-02-05T21:00:00") + pd.Timedelta(minutes=int(rng.integers(0, 90)))
        out.append({"subject": f"night-{k:02d}", "tz": "Europe/Berlin", "start": start.isoformat(),
                    "accel_rate_hz": 20.0, "places": {"home": {"lat": 52.52, "lon": 13.405, "category": "home"}},
                    "blocks": blocks, "seed": seed * 1000 + k})
    return out


def minute_counts(sim: SimulatedSubject, rate_hz: float = 20.0, cfg: Optional[ActivityConfig] = None) -> pd.DataFrame:
    """Activity counts per clock minute, as the pipeline computes them."""
    acc = ingest.SensorStream(sim.subject, "accel", np.asarray(sim.accel_t, dtype=np.int64),
                              np.asarray(sim.accel, dtype=np.float64), rate_hz, sim.device, sim.tz)
    cov = ingest.compute_coverage(acc, 5.0)
    res = ingest.resample(acc, 20.0, cov, allow_upsample=rate_hz < 20.0)
    frames = ingest.window(res, 60.0, 60.0, cov, 5.0, align_ms=60_000)
    return activity.activity_counts(frames, cfg)


def run_night_suite(scenarios: list[dict], scorer: str = "cole", cfg: Optional[SleepConfig] = None) -> dict:
    """Score each night; compare the session overlapping the truth night most."""
    cfg = cfg or SleepConfig()
    rows = []
    for sc in scenarios:
        sim = simulate(sc)
        counts = minute_counts(sim)
        sessions = sleep.segment_sessions(sleep.score_epochs(counts[["minute_start", "counts"]], scorer, cfg), cfg)
        truth = sim.truth["sleep"][0]
        gst_true = (truth["SE"] - truth["SS"]) / 60_000
        best = max(sessions, key=lambda s: min(s.SE, truth["SE"]) - max(s.SS, truth["SS"]), default=None)
        rows.append({"subject": sc["subject"], "n_sessions": len(sessions), "gst_true": gst_true,
                     "gst_pred": None if best is None else sleep.sleep_indicators(best)["GST"],
                     "n_interrupts_true": len(truth["interrupts"]),
                     "n_interrupts_pred": None if best is None else len(best.interrupts)})
    for r in rows:
        r["gst_ae"] = None if r["gst_pred"] is None else abs(r["gst_pred"] - r["gst_true"])
    ae = [r["gst_ae"] for r in rows if r["gst_ae"] is not None]
    return {"rows": rows, "gst_ae_mean": float(np.mean(ae)) if ae else None,
            "gst_ae_max": float(np.max(ae)) if ae else None, "missed": sum(r["gst_ae"] is None for r in rows)}
