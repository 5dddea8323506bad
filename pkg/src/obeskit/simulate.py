"""Scenario-driven synthetic recordings with ground truth.

A scenario is a sequence of blocks laid end to end from a local start time:

``stay``      remain at the current place (``activity`` picks the motion)
``sleep``     sleep at the current place, optionally with wake ``interrupts``
``activity``  a bout of lay/stand/walk/run/cycle/stairs at the current place
``trip``      travel to another place with a transport ``mode``
``gap``       no data from either sensor

A block may carry an explicit local ``start``; a start earlier than the end
of the previous block is an overlap and is rejected, a later one leaves a
gap. The generator parameters are the ground truth.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from . import signals
from .location import GAZETTEER_CATEGORIES, haversine_m

MINUTE_MS = 60_000
# nominal travel speeds in m/s
MODE_SPEED = {"walk": 1.3, "run": 3.0, "bike": 4.5, "car": 9.0, "bus": 6.0, "train": 14.0, "subway": 11.0}
MODE_SIGNAL = {"walk": "walk", "run": "run", "bike": "bike", "car": "car", "bus": "bus", "train": "train",
               "subway": "train"}
STAY_SIGNALS = {"still": signals.still, "fidget": signals.fidget, "shake": signals.shake,
                "sleeping": signals.sleeping, **signals.ACTIVITY_GENERATORS}
GAIT_ACTIVITIES = {"walk": (1.6, 2.1), "run": (2.6, 3.0), "stairs": (1.3, 1.6)}


class ScenarioError(ValueError):
    pass


@dataclass
class SimulatedSubject:
    subject: str
    accel_t: np.ndarray
    accel: np.ndarray
    loc_t: np.ndarray
    loc: np.ndarray  # (n, 3) lat, lon, accuracy
    truth: dict
    tz: str
    device: str
    annotations: list = field(default_factory=list)


def _to_ms(local: str, tz: str) -> int:
    return int(pd.Timestamp(local).tz_localize(tz).value // 1_000_000)


def _offset(lat: float, lon: float, north_m, east_m):
    return lat + np.asarray(north_m) / 111_320.0, lon + np.asarray(east_m) / (111_320.0 * np.cos(np.radians(lat)))


def _gen(fn, n: int, rate: float, rng, **kw) -> np.ndarray:
    t = np.arange(n) / rate
    return fn(t, rng, **kw)


def simulate(scenario: dict, seed: Optional[int] = None) -> SimulatedSubject:
    """Render one scenario into sensor arrays and truth."""
    seed = scenario.get("seed", 0) if seed is None else seed
    rng = np.random.default_rng(seed)
    tz = scenario.get("tz", "UTC")
    rate = float(scenario.get("accel_rate_hz", 20.0))
    period_ms = 1000.0 / rate
    loc_dt = float(scenario.get("location_interval_s", 15.0))
    noise_m = float(scenario.get("gps_noise_m", 6.0))
    places = scenario["places"]
    here = scenario.get("start_place") or next(iter(places))
    if here not in places:
        raise ScenarioError(f"unknown start place {here!r}")
    cursor = _to_ms(scenario["start"], tz)

    acc_t, acc, loc_t, loc = [], [], [], []
    truth = {"subject": scenario["subject"], "device": scenario.get("device", "smartphone"), "tz": tz,
             "pois": [], "sleep": [], "steps": [], "trips": [], "activities": []}
    annotations = []
    stay_open = None  # [place, arrive]

    def close_stay(t_end):
        nonlocal stay_open
        if stay_open and t_end > stay_open[1]:
            p = places[stay_open[0]]
            truth["pois"].append({"place": stay_open[0], "arrive": stay_open[1], "depart": t_end,
                                  "lat": p["lat"], "lon": p["lon"], "category": p.get("category", "other")})
        stay_open = None

    def emit_accel(t0, n, sig):
        # grid instants shared with the canonical resampling grid
        k0 = math.ceil(t0 / period_ms)
        ts = (k0 + np.arange(n)) * period_ms
        acc_t.append(np.round(ts).astype(np.int64))
        acc.append(sig)

    def emit_location(t0, t1, path):
        k0 = math.ceil(t0 / (loc_dt * 1000))
        ts = np.arange(k0 * loc_dt * 1000, t1, loc_dt * 1000)
        if len(ts) == 0:
            return
        frac = (ts - t0) / max(t1 - t0, 1)
        lat, lon = path(frac)
        lat, lon = _offset(lat, lon, rng.normal(0, noise_m, len(ts)), rng.normal(0, noise_m, len(ts)))
        loc_t.append(ts.astype(np.int64))
        loc.append(np.column_stack([lat, lon, np.full(len(ts), noise_m * 2)]))

    for b in scenario["blocks"]:
        kind = b["type"]
        if "start" in b:
            start = _to_ms(b["start"], tz)
            if start < cursor:
                raise ScenarioError(f"block starting {b['start']} overlaps the previous block")
            if start > cursor:
                close_stay(cursor)
                cursor = start
        if kind == "trip":
            dest = b["to"]
            if dest not in places:
                raise ScenarioError(f"unknown place {dest!r}")
            mode = b["mode"]
            if mode not in MODE_SPEED:
                raise ScenarioError(f"unknown mode {mode!r}")
            a, z = places[here], places[dest]
            dist = float(haversine_m(a["lat"], a["lon"], z["lat"], z["lon"]))
            dur_ms = int(round(b["duration_min"] * MINUTE_MS)) if "duration_min" in b \
                else int(round(dist / MODE_SPEED[mode] / 60.0)) * MINUTE_MS
            dur_ms = max(dur_ms, MINUTE_MS)
        else:
            dur_ms = int(round(b["duration_min"] * MINUTE_MS))
        if dur_ms <= 0:
            raise ScenarioError("block duration must be positive")
        t0, t1 = cursor, cursor + dur_ms
        n = int(math.ceil(t1 / period_ms) - math.ceil(t0 / period_ms))

        if kind == "gap":
            close_stay(t0)
        elif kind == "trip":
            close_stay(t0)
            if mode in ("walk", "run"):
                cad = rng.uniform(*GAIT_ACTIVITIES[mode])
                amp = rng.uniform(2.0, 4.0) if mode == "walk" else rng.uniform(8.0, 12.0)
                sig = _gen(signals.gait, n, rate, rng, cadence=cad, amplitude=amp)
                truth["steps"].append({"t0": t0, "t1": t1, "steps": signals.gait_steps(dur_ms / 1000, cad)})
            else:
                sig = _gen(getattr(signals, MODE_SIGNAL[mode]), n, rate, rng)
            emit_accel(t0, n, sig)
            a, z = places[here], places[dest]
            emit_location(t0, t1, lambda f, a=a, z=z: (a["lat"] + f * (z["lat"] - a["lat"]),
                                                        a["lon"] + f * (z["lon"] - a["lon"])))
            truth["trips"].append({"start": t0, "end": t1, "mode": mode, "from": here, "to": dest,
                                   "distance_m": dist})
            here = dest
        else:
            if stay_open is None:
                stay_open = [here, t0]
            p = places[here]
            emit_location(t0, t1, lambda f, p=p: (np.full(len(f), p["lat"]), np.full(len(f), p["lon"])))
            if kind == "sleep":
                sig = _gen(signals.sleeping, n, rate, rng)
                interrupts = []
                for off_min, len_min in b.get("interrupts", ()):
                    i0 = int(round(off_min * 60 * rate))
                    i1 = min(n, i0 + int(round(len_min * 60 * rate)))
                    sig[i0:i1] = _gen(signals.fidget, i1 - i0, rate, rng, axis=0, tilt=0.2)
                    interrupts.append((t0 + int(off_min * MINUTE_MS), t0 + int((off_min + len_min) * MINUTE_MS)))
                emit_accel(t0, n, sig)
                truth["sleep"].append({"SS": t0, "SE": t1, "interrupts": interrupts})
                rec = scenario["subject"]
                annotations += [{"recording": rec, "t": t0, "event": "Sleep Start"}]
                for i0, i1 in interrupts:
                    annotations += [{"recording": rec, "t": i0, "event": "Interrupt Start"},
                                    {"recording": rec, "t": i1, "event": "Interrupt End"}]
                annotations += [{"recording": rec, "t": t1, "event": "Sleep End"}]
            elif kind in ("stay", "activity"):
                name = b.get("activity", "fidget")
                if name not in STAY_SIGNALS:
                    raise ScenarioError(f"unknown activity {name!r}")
                kw = {}
                if name in GAIT_ACTIVITIES:
                    kw["cadence"] = float(b.get("cadence", rng.uniform(*GAIT_ACTIVITIES[name])))
                sig = _gen(STAY_SIGNALS[name], n, rate, rng, **kw)
                emit_accel(t0, n, sig)
                if name in GAIT_ACTIVITIES:
                    truth["steps"].append({"t0": t0, "t1": t1, "steps": signals.gait_steps(dur_ms / 1000, kw["cadence"])})
                if name in signals.ACTIVITY_GENERATORS:
                    truth["activities"].append({"t0": t0, "t1": t1, "type": name})
            else:
                raise ScenarioError(f"unknown block type {kind!r}")
        cursor = t1
    close_stay(cursor)

    at = np.concatenate(acc_t) if acc_t else np.empty(0, np.int64)
    av = np.vstack(acc) if acc else np.empty((0, 3))
    lt = np.concatenate(loc_t) if loc_t else np.empty(0, np.int64)
    lv = np.vstack(loc) if loc else np.empty((0, 3))
    if annotations:
        annotations = ([{"recording": scenario["subject"], "t": int(at[0]) if len(at) else 0,
                         "event": "Recording Start"}] + annotations
                       + [{"recording": scenario["subject"], "t": int(at[-1]) if len(at) else 0,
                           "event": "Recording End"}])
    return SimulatedSubject(scenario["subject"], at, av, lt, lv, truth, tz, truth["device"], annotations)


# ----------------------------------------------------------------------------
# files


def write_subject(sim: SimulatedSubject, out_dir: str | Path) -> dict:
    """Write accel/location JSONL, truth JSON and sleep annotations; return the input entry."""
    out = Path(out_dir)
    (out / "data").mkdir(parents=True, exist_ok=True)
    (out / "truth").mkdir(parents=True, exist_ok=True)
    accel_path = out / "data" / f"{sim.subject}_accel.jsonl"
    loc_path = out / "data" / f"{sim.subject}_location.jsonl"
    with accel_path.open("w") as fh:
        fh.write(json.dumps({"meta": {"subject": sim.subject, "units": "ms2", "device": sim.device,
                                      "tz": sim.tz}}) + "\n")
        fh.write("".join(f'{{"t": {t}, "x": {x:.4f}, "y": {y:.4f}, "z": {z:.4f}}}\n'
                         for t, (x, y, z) in zip(sim.accel_t.tolist(), sim.accel.tolist())))
    with loc_path.open("w") as fh:
        fh.write(json.dumps({"meta": {"subject": sim.subject, "tz": sim.tz}}) + "\n")
        fh.write("".join(f'{{"t": {t}, "lat": {a:.7f}, "lon": {b:.7f}, "acc": {c:.1f}}}\n'
                         for t, (a, b, c) in zip(sim.loc_t.tolist(), sim.loc.tolist())))
    (out / "truth" / f"{sim.subject}.json").write_text(json.dumps(sim.truth, indent=1, sort_keys=True))
    if sim.annotations:
        with (out / "truth" / f"{sim.subject}_sleep.jsonl").open("w") as fh:
            for a in sim.annotations:
                fh.write(json.dumps(a, sort_keys=True) + "\n")
    return {"subject": sim.subject, "accel": str(accel_path), "location": str(loc_path),
            "device": sim.device, "tz": sim.tz}


def write_gazetteer(places: dict, path: str | Path, rng: np.random.Generator, n_distractors: int = 20,
                    min_sep_m: float = 300.0) -> None:
    """Gazetteer of the categorized places plus far-away distractor entries."""
    rows = [(name, p["lat"], p["lon"], p["category"]) for name, p in sorted(places.items())
            if p.get("category") in GAZETTEER_CATEGORIES]
    lat0 = float(np.mean([p["lat"] for p in places.values()]))
    lon0 = float(np.mean([p["lon"] for p in places.values()]))
    cats = [c for c in GAZETTEER_CATEGORIES if c not in ("school", "other")]
    k = 0
    while k < n_distractors:
        lat, lon = _offset(lat0, lon0, rng.uniform(-4000, 4000), rng.uniform(-4000, 4000))
        d = [haversine_m(lat, lon, p["lat"], p["lon"]) for p in places.values()]
        if min(d) < min_sep_m:
            continue
        rows.append((f"g{k:03d}", round(float(lat), 6), round(float(lon), 6), cats[k % len(cats)]))
        k += 1
    with Path(path).open("w") as fh:
        fh.write("place_id,lat,lon,category\n")
        for r in rows:
            fh.write(f"{r[0]},{r[1]},{r[2]},{r[3]}\n")


def make_cohort(n_subjects: int = 3, seed: int = 0, start: str = "2024-03-04T22:00:00",
                tz: str = "Europe/Berlin", origin: tuple = (52.5200, 13.4050), accel_rate_hz: float = 20.0) -> dict:
    """A small cohort sharing school and leisure places, one day each (22:00 to 16:00)."""
    rng = np.random.default_rng(seed)
    lat0, lon0 = origin
    shared = {
        "school": (0, 0, "school"),
        "park": (1500, 900, "park"),
        "market": (-1200, 2200, "supermarket_grocery"),
        "cafe": (700, -1800, "cafe"),
    }
    places = {}
    for name, (n, e, cat) in shared.items():
        lat, lon = _offset(lat0, lon0, n, e)
        places[name] = {"lat": round(float(lat), 6), "lon": round(float(lon), 6), "category": cat}
    scenarios = []
    modes = ["walk", "bike", "bus"]
    for i in range(n_subjects):
        # homes share one neighborhood so resident cells can reach k-anonymity
        ang = 2.2 + rng.uniform(-0.2, 0.2)
        r = rng.uniform(1300, 1800)
        lat, lon = _offset(lat0, lon0, r * np.cos(ang), r * np.sin(ang))
        own = dict(places)
        own["home"] = {"lat": round(float(lat), 6), "lon": round(float(lon), 6), "category": "home"}
        wake = int(rng.integers(4, 10))
        blocks = [
            {"type": "stay", "duration_min": 60, "activity": "fidget"},
            {"type": "sleep", "duration_min": int(rng.integers(440, 480)),
             "interrupts": [[int(rng.integers(120, 300)), wake]]},
            {"type": "stay", "duration_min": 15, "activity": "stand"},
            {"type": "stay", "duration_min": 10, "activity": "fidget"},
            {"type": "trip", "to": "school", "mode": modes[i % len(modes)]},
            {"type": "stay", "duration_min": 150, "activity": "fidget"},
            {"type": "activity", "activity": "walk", "duration_min": 10},
            {"type": "stay", "duration_min": 170, "activity": "fidget"},
            {"type": "trip", "to": "park", "mode": "walk"},
            {"type": "activity", "activity": "run", "duration_min": 15},
            {"type": "stay", "duration_min": 25, "activity": "stand"},
            {"type": "trip", "to": "market", "mode": "bus"},
            {"type": "stay", "duration_min": 20, "activity": "stand"},
            {"type": "trip", "to": "home", "mode": "car"},
            {"type": "stay", "duration_min": 85, "activity": "fidget"},
        ]
        scenarios.append({"subject": f"subject-{i + 1:02d}", "tz": tz, "start": start, "device": "smartphone",
                          "accel_rate_hz": accel_rate_hz, "location_interval_s": 15, "gps_noise_m": 6,
                          "seed": int(rng.integers(0, 2**31)), "start_place": "home", "places": own,
                          "blocks": blocks})
    return {"scenarios": scenarios, "seed": seed}


def run_simulation(spec: dict, out_dir: str | Path, seed: Optional[int] = None, pipeline: Optional[dict] = None) -> Path:
    """Render every scenario of ``spec`` to ``out_dir`` and write a pipeline config next to them.

    ``spec`` is either ``{"scenarios": [...]}`` or ``{"cohort": {make_cohort kwargs}}``.
    """
    seed = spec.get("seed", 0) if seed is None else seed
    if "cohort" in spec:
        spec = {**make_cohort(seed=seed, **spec["cohort"]), **{k: v for k, v in spec.items() if k != "cohort"}}
    scenarios = spec.get("scenarios")
    if not scenarios:
        raise ScenarioError("simulation spec needs 'scenarios' or 'cohort'")
    out = Path(out_dir).resolve()
    out.mkdir(parents=True, exist_ok=True)
    inputs = []
    all_places = {}
    for k, sc in enumerate(scenarios):
        sim = simulate(sc, seed=sc.get("seed", seed + k))
        inputs.append(write_subject(sim, out))
        for name, p in sc["places"].items():
            all_places.setdefault(name if p.get("category") != "home" else f"{sc['subject']}-{name}", p)
    rng = np.random.default_rng(seed)
    write_gazetteer(all_places, out / "gazetteer.csv", rng)
    cfg = {"inputs": inputs, "gazetteer": str(out / "gazetteer.csv"), "truth_dir": str(out / "truth"),
           "tz": scenarios[0].get("tz", "UTC"), "seed": seed, "out_dir": str(out / "run")}
    cfg.update(pipeline or spec.get("pipeline", {}))
    (out / "config.json").write_text(json.dumps(cfg, indent=1, sort_keys=True))
    return out / "config.json"


# ----------------------------------------------------------------------------
# default models


def type_training_set(seed: int = 0, per_type: int = 12, rate_hz: float = 20.0) -> tuple[np.ndarray, list]:
    from .activity import ACTIVITY_TYPES, extract_type_features

    rng = np.random.default_rng(seed)
    X, y = [], []
    t = np.arange(int(60 * rate_hz)) / rate_hz
    for name in ACTIVITY_TYPES:
        for _ in range(per_type):
            X.append(extract_type_features(signals.ACTIVITY_GENERATORS[name](t, rng), rate_hz))
            y.append(name)
    return np.asarray(X), y


def transport_training_set(seed: int = 0, seconds: int = 30, reps: int = 16,
                           rate_hz: float = 20.0) -> tuple[np.ndarray, list]:
    from .transport import extract_transport_features

    rng = np.random.default_rng(seed)
    X, y = [], []
    n = int(rate_hz)
    t = np.arange(seconds * n) / rate_hz
    for mode, gen in signals.MODE_GENERATORS.items():
        for _ in range(reps):
            sig = gen(t, rng)
            for k in range(seconds):
                X.append(extract_transport_features(sig[k * n:(k + 1) * n], rate_hz))
                y.append(mode)
    return np.asarray(X), y


def default_type_model(seed: int = 0):
    from .activity import train_type_model

    X, y = type_training_set(seed)
    model = train_type_model(X, y, seed=seed)
    model.meta["training"] = "synthetic"
    return model


def default_transport_model(seed: int = 0, cfg=None):
    from .transport import train_transport

    X, y = transport_training_set(seed)
    model = train_transport(X, y, cfg, seed=seed)
    model.meta["training"] = "synthetic"
    return model
