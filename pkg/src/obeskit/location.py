"""Visited places from location traces.

Detection is a density clustering in which every location sample is
down-weighted by how fast the subject was moving around it, so samples
taken while travelling cannot seed a cluster. Detected places are then
labelled (home, school, or a gazetteer category) and their coordinates
erased.
"""
from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Optional, Sequence
from zoneinfo import ZoneInfo

import numpy as np
from sklearn.neighbors import BallTree

from . import geohash
from .config import LocationConfig
from .ingest import SensorStream

EARTH_RADIUS_M = 6_371_008.8
DAY_MS = 86_400_000

CATEGORIES = (
    "restaurant", "fast_food", "takeaway", "cafe", "bar", "supermarket_grocery", "food_outlet",
    "wine_liquor", "park", "recreation_indoor", "sports_facility", "school", "home", "other", "unknown",
)
GAZETTEER_CATEGORIES = tuple(c for c in CATEGORIES if c not in ("home", "unknown"))


class ContractError(RuntimeError):
    pass


@dataclass(frozen=True)
class PointOfInterest:
    poi_id: str
    arrive_t: int
    depart_t: int
    member_points: int
    center: Optional[tuple] = None  # (lat, lon); erased by redact_coordinates
    category: Optional[str] = None
    place_id: Optional[int] = None  # visits to the same detected place share it
    geohash: Optional[str] = None

    def __post_init__(self):
        if not self.arrive_t < self.depart_t:
            raise ValueError("PoI must satisfy arrive_t < depart_t")
        if self.category is not None and self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")

    @property
    def dwell_s(self) -> float:
        return (self.depart_t - self.arrive_t) / 1000.0

    def to_json(self) -> dict:
        """Serialized post-redaction form; refuses to emit coordinates."""
        if self.center is not None:
            raise ContractError(f"{self.poi_id}: serialize only after redact_coordinates")
        return {
            "poi_id": self.poi_id,
            "arrive": int(self.arrive_t),
            "depart": int(self.depart_t),
            "category": self.category,
            "geohash": self.geohash,
        }


@dataclass(frozen=True)
class GazetteerEntry:
    place_id: str
    lat: float
    lon: float
    category: str

    def __post_init__(self):
        if not (-90 <= self.lat <= 90 and -180 <= self.lon <= 180):
            raise ValueError(f"gazetteer entry {self.place_id}: coordinates out of range")
        if self.category not in GAZETTEER_CATEGORIES:
            raise ValueError(f"gazetteer entry {self.place_id}: bad category {self.category!r}")


# ----------------------------------------------------------------------------
# geometry


def haversine_m(lat1, lon1, lat2, lon2):
    lat1, lon1, lat2, lon2 = (np.radians(np.asarray(v, dtype=np.float64)) for v in (lat1, lon1, lat2, lon2))
    a = np.sin((lat2 - lat1) / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def moveability(t_ms: np.ndarray, lat: np.ndarray, lon: np.ndarray, window: int = 5,
                v_ref: float = 1.5) -> np.ndarray:
    """Per-sample mobility score in [0, 1].

    Mean speed of the segments inside a centered ``window``-sample window,
    divided by ``v_ref`` and capped at 1.
    """
    n = len(t_ms)
    if n < 2:
        return np.zeros(n)
    d = haversine_m(lat[:-1], lon[:-1], lat[1:], lon[1:])
    dt = np.diff(np.asarray(t_ms, dtype=np.float64)) / 1000.0
    speed = np.where(dt > 0, d / np.where(dt > 0, dt, 1.0), 0.0)
    half = window // 2
    out = np.empty(n)
    csum = np.concatenate([[0.0], np.cumsum(speed)])
    for i in range(n):
        lo, hi = max(0, i - half), min(n - 1, i + half)  # sample range; segments lo..hi-1
        out[i] = (csum[hi] - csum[lo]) / (hi - lo) if hi > lo else 0.0
    return np.minimum(1.0, out / v_ref)


# ----------------------------------------------------------------------------
# detection


def _weighted_dbscan(neighbors: list, weights: np.ndarray, min_pts: float) -> np.ndarray:
    n = len(neighbors)
    density = np.array([weights[nb].sum() for nb in neighbors])
    core = density >= min_pts
    labels = np.full(n, -1, dtype=np.int64)
    cluster = 0
    for i in range(n):
        if not core[i] or labels[i] != -1:
            continue
        labels[i] = cluster
        stack = [i]
        while stack:
            nb = neighbors[stack.pop()]
            new = nb[labels[nb] == -1]
            labels[new] = cluster
            stack.extend(new[core[new]].tolist())
        cluster += 1
    return labels


def _trim(idx: np.ndarray, lat: np.ndarray, lon: np.ndarray, eps_m: float):
    idx = np.asarray(idx)
    while len(idx):
        clat, clon = lat[idx].mean(), lon[idx].mean()
        d = haversine_m(lat[idx], lon[idx], clat, clon)
        if d.max() <= eps_m:
            return idx, (float(clat), float(clon))
        idx = np.delete(idx, int(np.argmax(d)))
    return idx, None


def detect_pois(trace: SensorStream, cfg: Optional[LocationConfig] = None) -> list[PointOfInterest]:
    """Detect stays in a location trace.

    Returns temporally disjoint visits, each at least ``min_stay_s`` long
    with every member within ``eps_m`` of the visit centroid. A place
    revisited after more than ``split_gap_s`` yields separate visits that
    share ``place_id``.
    """
    cfg = cfg or LocationConfig()
    if trace.kind != "location":
        raise ValueError("detect_pois needs a location stream")
    n = len(trace)
    if n < cfg.min_pts:
        return []
    t = np.asarray(trace.t, dtype=np.int64)
    if (t[-1] - t[0]) / 1000.0 < cfg.min_stay_s:
        return []
    lat, lon = trace.values[:, 0], trace.values[:, 1]
    mv = moveability(t, lat, lon, cfg.moveability_window, cfg.v_ref)
    tree = BallTree(np.radians(np.column_stack([lat, lon])), metric="haversine")
    neighbors = tree.query_radius(np.radians(np.column_stack([lat, lon])), r=cfg.eps_m / EARTH_RADIUS_M)
    neighbors = [np.sort(nb) for nb in neighbors]
    labels = _weighted_dbscan(neighbors, 1.0 - mv, cfg.min_pts)

    split_ms = cfg.split_gap_s * 1000.0
    visits = []  # (place label, member indices)
    cur_label, cur = -1, []
    for i in range(n):
        lab = labels[i]
        if lab < 0:
            continue
        if lab == cur_label and t[i] - t[cur[-1]] <= split_ms:
            cur.append(i)
        else:
            if cur:
                visits.append((cur_label, cur))
            cur_label, cur = lab, [i]
    if cur:
        visits.append((cur_label, cur))

    pois = []
    for lab, members in visits:
        idx, center = _trim(np.asarray(members), lat, lon, cfg.eps_m)
        if center is None or len(idx) < 2:
            continue
        arrive, depart = int(t[idx].min()), int(t[idx].max())
        if (depart - arrive) / 1000.0 < cfg.min_stay_s:
            continue
        pois.append(PointOfInterest(
            poi_id=f"p{len(pois):04d}",
            arrive_t=arrive,
            depart_t=depart,
            member_points=int(len(idx)),
            center=center,
            place_id=int(lab),
        ))
    return pois


# ----------------------------------------------------------------------------
# home / school


def daily_window_overlap_ms(arrive_t: int, depart_t: int, tz: str, start_hour: float, end_hour: float,
                            weekdays_only: bool = False) -> int:
    """Milliseconds of [arrive_t, depart_t) falling inside a local daily time window."""
    zone = ZoneInfo(tz)
    a = datetime.fromtimestamp(arrive_t / 1000.0, tz=timezone.utc).astimezone(zone)
    d = datetime.fromtimestamp(depart_t / 1000.0, tz=timezone.utc).astimezone(zone)
    total = 0
    day = a.date() - timedelta(days=1)
    while day <= d.date():
        if not weekdays_only or day.weekday() < 5:
            midnight = datetime(day.year, day.month, day.day, tzinfo=zone)
            w0 = int((midnight + timedelta(hours=start_hour)).timestamp() * 1000)
            w1 = int((midnight + timedelta(hours=end_hour)).timestamp() * 1000)
            total += max(0, min(depart_t, w1) - max(arrive_t, w0))
        day += timedelta(days=1)
    return total


def _place_key(p: PointOfInterest):
    return p.place_id if p.place_id is not None else p.poi_id


def label_home_school(pois: Sequence[PointOfInterest], tz: str = "UTC",
                      cfg: Optional[LocationConfig] = None) -> tuple[list[PointOfInterest], dict]:
    """Label the subject's home and school places.

    Home is the place with the most dwell between ``night_hours`` local
    time; school the place (other than home) with the most weekday dwell
    within ``school_hours``. Returns the relabelled PoIs and a dict with
    ``home``/``school`` place keys, or a reason code where withheld.
    """
    cfg = cfg or LocationConfig()
    pois = list(pois)
    result = {"home": None, "school": None, "reasons": {}}
    if not pois:
        result["reasons"] = {"home": "insufficient_history", "school": "insufficient_history"}
        return pois, result
    span_days = (max(p.depart_t for p in pois) - min(p.arrive_t for p in pois)) / DAY_MS
    if span_days < cfg.min_history_days:
        result["reasons"] = {"home": "insufficient_history", "school": "insufficient_history"}
        return pois, result

    night = defaultdict(int)
    school = defaultdict(int)
    for p in pois:
        key = _place_key(p)
        night[key] += daily_window_overlap_ms(p.arrive_t, p.depart_t, tz, *cfg.night_hours)
        school[key] += daily_window_overlap_ms(p.arrive_t, p.depart_t, tz, *cfg.school_hours,
                                               weekdays_only=True)

    def best(scores: dict, exclude=None):
        # largest dwell wins; equal dwell resolves on the key's string form
        cands = [(-v, str(k), k) for k, v in scores.items() if v > 0 and k != exclude]
        return min(cands)[2] if cands else None

    home = best(night)
    if home is None:
        result["reasons"]["home"] = "no_overnight_evidence"
    sch = best(school, exclude=home)
    if sch is None:
        result["reasons"]["school"] = "no_weekday_evidence"
    result["home"], result["school"] = home, sch
    out = []
    for p in pois:
        key = _place_key(p)
        if home is not None and key == home:
            p = replace(p, category="home")
        elif sch is not None and key == sch:
            p = replace(p, category="school")
        out.append(p)
    return out, result


# ----------------------------------------------------------------------------
# gazetteer


def load_gazetteer(path: str | Path) -> list[GazetteerEntry]:
    entries = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"place_id", "lat", "lon", "category"}
        if not need <= set(reader.fieldnames or ()):
            raise ValueError(f"{path}: gazetteer needs columns {sorted(need)}")
        for row in reader:
            entries.append(GazetteerEntry(row["place_id"], float(row["lat"]), float(row["lon"]), row["category"]))
    return entries


class GazetteerIndex:
    """Read-only nearest-place lookup."""

    def __init__(self, entries: Sequence[GazetteerEntry]):
        self.entries = tuple(entries)
        if self.entries:
            pts = np.radians([[e.lat, e.lon] for e in self.entries])
            self._tree = BallTree(pts, metric="haversine")
        else:
            self._tree = None

    def __len__(self) -> int:
        return len(self.entries)

    def nearest(self, lat: float, lon: float, radius_m: float) -> Optional[GazetteerEntry]:
        """Closest entry within ``radius_m``; exact distance ties go to the smaller place_id."""
        if self._tree is None:
            return None
        idx = self._tree.query_radius(np.radians([[lat, lon]]), r=radius_m / EARTH_RADIUS_M)[0]
        if len(idx) == 0:
            return None
        cands = [self.entries[i] for i in idx]
        d = haversine_m(lat, lon, [e.lat for e in cands], [e.lon for e in cands])
        d = np.atleast_1d(d)
        keyed = sorted(zip(np.round(d, 6).tolist(), [e.place_id for e in cands], range(len(cands))))
        dist, _, k = keyed[0]
        return cands[k] if dist <= radius_m else None


def categorize_poi(poi: PointOfInterest, index: GazetteerIndex, match_radius_m: float = 75.0) -> PointOfInterest:
    """Assign the category of the nearest gazetteer place, or ``unknown``.

    Home and school labels are kept.
    """
    if poi.category in ("home", "school"):
        return poi
    if poi.center is None:
        raise ContractError(f"{poi.poi_id}: coordinates already erased")
    entry = index.nearest(poi.center[0], poi.center[1], match_radius_m)
    return replace(poi, category=entry.category if entry else "unknown")


def redact_coordinates(poi: PointOfInterest, precision: int = 7) -> PointOfInterest:
    """Erase a categorized PoI's coordinates, keeping its geohash of record."""
    if poi.category is None:
        raise ContractError(f"{poi.poi_id}: redact_coordinates called before categorization")
    if poi.center is None:
        return poi
    gh = poi.geohash or geohash.encode(poi.center[0], poi.center[1], precision)
    return replace(poi, center=None, geohash=gh)


def poi_distance_m(a: PointOfInterest, b: PointOfInterest) -> Optional[float]:
    if a.center is None or b.center is None:
        return None
    return float(haversine_m(a.center[0], a.center[1], b.center[0], b.center[1]))
