"""Anonymous geohash votes and spatial aggregation of behavioral indicators.

Three aggregation axes share one cell type:

* vote      one contribution per visit of a subject to a geohash cell
* visitor   one contribution per subject per cell, pooled over their visits
* resident  one contribution per subject, placed at the cell of their home

Individual-level inputs are a per-minute table with columns
``minute_start, counts, level, steps`` and optionally ``type``;
every row is one fully recorded minute.
"""
from __future__ import annotations

import hashlib
import hmac
import json
import math
import threading
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np
import pandas as pd
from filelock import FileLock

from . import geohash
from .activity import ACTIVITY_TYPES, LEVELS
from .config import GeoConfig
from .location import PointOfInterest


# name parts (split on "_") a payload key may never carry
FORBIDDEN_KEYS = frozenset({"lat", "lon", "lng", "latitude", "longitude", "subject", "coord", "coords",
                            "coordinates", "center"})

VISIT_GROUPS = {
    "food_related": ("restaurant", "fast_food", "takeaway", "cafe", "food_outlet", "supermarket_grocery"),
    "supermarket": ("supermarket_grocery",),
    "fast_food_takeaway": ("fast_food", "takeaway"),
    "park": ("park",),
    "recreation": ("recreation_indoor",),
    "sports": ("sports_facility",),
}
WEEKLY_GROUPS = {
    "restaurant": ("restaurant",),
    "food_outlet": ("food_outlet",),
    "cafe": ("cafe",),
    "fast_food": ("fast_food",),
    "food_related": VISIT_GROUPS["food_related"],
    "supermarket": ("supermarket_grocery",),
    "restaurant_or_food_outlet": ("restaurant", "food_outlet"),
    "takeaway": ("takeaway",),
    "fast_food_or_takeaway": ("fast_food", "takeaway"),
    "bar": ("bar",),
    "wine_liquor": ("wine_liquor",),
    "park": ("park",),
}


def voter_tag(subject_id: str, salt: str) -> str:
    """Keyed hash of the subject id; only used to suppress double votes."""
    return hmac.new(salt.encode(), str(subject_id).encode(), hashlib.sha256).hexdigest()


# ----------------------------------------------------------------------------
# day validity


def local_dates(t_ms, tz: str) -> np.ndarray:
    """ISO local calendar date of each epoch-ms timestamp."""
    idx = pd.to_datetime(np.asarray(t_ms, dtype=np.int64), unit="ms", utc=True).tz_convert(tz)
    return np.asarray(idx.strftime("%Y-%m-%d"), dtype=object)


def valid_days(minutes: pd.DataFrame, tz: str, min_hours: float = 8.0) -> list[str]:
    """Local dates with at least ``min_hours`` of recorded accelerometer minutes."""
    if len(minutes) == 0:
        return []
    per_day = Counter(local_dates(minutes["minute_start"], tz))
    return sorted(d for d, n in per_day.items() if n / 60.0 >= min_hours)


# ----------------------------------------------------------------------------
# visits


class Visit(NamedTuple):
    gh: str
    t0: int
    t1: int


def geohash_visits(t_ms, lat, lon, cfg: Optional[GeoConfig] = None, max_gap_s: float = 300.0,
                   bridge_s: float = 120.0) -> list[Visit]:
    """Stays of a location trace inside single geohash cells.

    Consecutive samples in the same cell form a run; a sampling gap longer
    than ``max_gap_s`` ends it. Two runs in the same cell separated by an
    excursion of at most ``bridge_s`` (boundary jitter) are joined. Runs
    shorter than ``min_visit_s`` are dropped.
    """
    cfg = cfg or GeoConfig()
    t = np.asarray(t_ms, dtype=np.int64)
    if len(t) == 0:
        return []
    cells = [geohash.encode(a, b, cfg.vote_precision) for a, b in zip(lat, lon)]
    runs = []  # [gh, first t, last t]
    for i, c in enumerate(cells):
        if runs and runs[-1][0] == c and t[i] - runs[-1][2] <= max_gap_s * 1000:
            runs[-1][2] = int(t[i])
        else:
            runs.append([c, int(t[i]), int(t[i])])
    merged = []
    for r in runs:
        if (len(merged) >= 2 and merged[-2][0] == r[0]
                and merged[-1][2] - merged[-1][1] <= bridge_s * 1000
                and merged[-1][1] - merged[-2][2] <= max_gap_s * 1000
                and r[1] - merged[-1][2] <= max_gap_s * 1000):
            merged.pop()
            merged[-1][2] = r[2]
        else:
            merged.append(list(r))
    return [Visit(g, a, b) for g, a, b in merged if (b - a) / 1000.0 >= cfg.min_visit_s]


def interval_visits(visits: Iterable[Visit], interval_s: float) -> list[Visit]:
    """Split visits on a global grid so each vote covers at most one interval."""
    step = int(interval_s * 1000)
    out = []
    for v in visits:
        a = v.t0
        while a < v.t1:
            b = min((a // step + 1) * step, v.t1)
            out.append(Visit(v.gh, a, b))
            a = b
    return out


# ----------------------------------------------------------------------------
# votes


class PrivacyError(ValueError):
    pass


def check_payload(payload: dict) -> None:
    for key, value in payload.items():
        if FORBIDDEN_KEYS & set(key.lower().split("_")):
            raise PrivacyError(f"payload key {key!r} is not allowed")
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise PrivacyError(f"payload value for {key!r} must be numeric")


@dataclass(frozen=True)
class GeohashVote:
    gh: str
    voter: str
    t0: int
    t1: int
    payload: dict = field(default_factory=dict)

    def __post_init__(self):
        if not geohash.is_valid(self.gh):
            raise ValueError(f"invalid geohash {self.gh!r}")
        if not self.t0 < self.t1:
            raise ValueError("vote interval must satisfy t0 < t1")
        check_payload(self.payload)

    @property
    def key(self) -> tuple:
        return (self.voter, self.gh, int(self.t0), int(self.t1))

    def to_json(self) -> dict:
        return {"gh": self.gh, "voter": self.voter, "t0": int(self.t0), "t1": int(self.t1),
                "payload": dict(sorted(self.payload.items()))}

    @classmethod
    def from_json(cls, d: dict) -> "GeohashVote":
        return cls(d["gh"], d["voter"], int(d["t0"]), int(d["t1"]), dict(d.get("payload", {})))


def visit_payload(minutes: pd.DataFrame, t0: int, t1: int, pois: Sequence[PointOfInterest] = (),
                  trips: Sequence = (), cut_points: Sequence[float] = (100.0, 1800.0, 4000.0),
                  arrival_slack_s: float = 300.0) -> dict:
    """Indicators of one visit.

    Accelerometer indicators come from the recorded minutes starting inside
    the visit; category flags from PoIs overlapping it; the mode mix from
    the trip that arrived at it.
    """
    out = {}
    if len(minutes):
        sel = minutes[(minutes["minute_start"] >= t0) & (minutes["minute_start"] < t1)]
        if len(sel):
            out.update(_acc_sums(sel))
            out.update(_acc_rates(out, cut_points))
    cats = {p.category for p in pois if p.arrive_t < t1 and p.depart_t > t0}
    for name, members in VISIT_GROUPS.items():
        out[f"visit_{name}"] = int(bool(cats & set(members)))
    arriving = [tr for tr in trips if t0 - arrival_slack_s * 1000 <= tr.end_t <= t1 and tr.mode_sequence]
    if arriving:
        out.update(_mode_fractions(Counter(arriving[-1].mode_seconds)))
    return out


def _acc_sums(sel: pd.DataFrame) -> dict:
    n = len(sel)
    out = {
        "minutes": n,
        "steps": int(sel["steps"].sum()),
        "counts_sum": float(sel["counts"].sum()),
    }
    lv = Counter(sel["level"])
    for lvl in LEVELS:
        out[f"level_minutes_{lvl}"] = int(lv.get(lvl, 0))
    return out


def _acc_rates(sums: dict, cut_points) -> dict:
    n = sums["minutes"]
    cpm = sums["counts_sum"] / n
    out = {
        "steps_per_hour": sums["steps"] / (n / 60.0),
        "counts_per_minute": cpm,
        "sedentary": int(cpm < cut_points[0]),
    }
    for lvl in LEVELS:
        out[f"level_{lvl}"] = sums[f"level_minutes_{lvl}"] / n
    return out


def _mode_fractions(seconds: Counter) -> dict:
    from .transport import TRANSPORT_MODES

    total = sum(seconds.values())
    return {f"mode_{m}": seconds.get(m, 0) / total for m in TRANSPORT_MODES} if total else {}


def cast_votes(subject_id: str, visits: Sequence[Visit], minutes: pd.DataFrame, tz: str,
               cfg: Optional[GeoConfig] = None, pois: Sequence[PointOfInterest] = (), trips: Sequence = (),
               cut_points: Sequence[float] = (100.0, 1800.0, 4000.0)) -> list[GeohashVote]:
    """One vote per qualifying visit that starts on a valid day."""
    cfg = cfg or GeoConfig()
    days = set(valid_days(minutes, tz, cfg.day_valid_hours))
    if cfg.vote_mode == "interval":
        visits = interval_visits(visits, cfg.vote_interval_s)
    elif any((v.t1 - v.t0) / 1000.0 < cfg.min_visit_s for v in visits):
        raise ValueError("visit shorter than min_visit_s")
    tag = voter_tag(subject_id, cfg.voter_salt)
    votes = []
    for v in visits:
        if local_dates([v.t0], tz)[0] not in days:
            continue
        payload = visit_payload(minutes, v.t0, v.t1, pois, trips, cut_points)
        votes.append(GeohashVote(v.gh, tag, int(v.t0), int(v.t1), payload))
    return votes


class VoteStore:
    """Append-only JSONL vote log, safe for concurrent writers.

    A thread lock guards in-process callers and a file lock guards other
    processes; under both, the log is re-read from the last seen offset
    before the duplicate check, so a vote with a known (voter, geohash,
    t0, t1) identity is never appended twice.
    """

    ACCEPTED = "accepted"
    DUPLICATE = "duplicate"

    def __init__(self, path: str | Path, meta: Optional[dict] = None):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._thread_lock = threading.Lock()
        self._file_lock = FileLock(str(self.path) + ".lock")
        self._keys: set = set()
        self._offset = 0
        with self._thread_lock, self._file_lock:
            if not self.path.exists():
                with self.path.open("w") as fh:
                    if meta is not None:
                        fh.write(json.dumps({"meta": meta}, sort_keys=True) + "\n")
            self._refresh()

    def _refresh(self) -> None:
        with self.path.open("rb") as fh:
            fh.seek(self._offset)
            for raw in fh:
                if not raw.endswith(b"\n"):
                    break  # partial line from a crashed writer
                self._offset += len(raw)
                d = json.loads(raw)
                if "meta" in d:
                    continue
                self._keys.add((d["voter"], d["gh"], int(d["t0"]), int(d["t1"])))

    def cast(self, vote: GeohashVote) -> str:
        line = (json.dumps(vote.to_json(), sort_keys=True) + "\n").encode()
        with self._thread_lock, self._file_lock:
            self._refresh()
            if vote.key in self._keys:
                return self.DUPLICATE
            with self.path.open("ab") as fh:
                fh.write(line)
                fh.flush()
            self._keys.add(vote.key)
            self._offset += len(line)
            return self.ACCEPTED

    @property
    def offset(self) -> int:
        with self._thread_lock, self._file_lock:
            self._refresh()
            return self._offset

    def read(self, offset: Optional[int] = None) -> list[GeohashVote]:
        """Votes in the log up to byte ``offset`` (default: everything now)."""
        end = self.offset if offset is None else offset
        votes = []
        with self.path.open("rb") as fh:
            data = fh.read(end)
        for raw in data.splitlines():
            d = json.loads(raw)
            if "meta" not in d:
                votes.append(GeohashVote.from_json(d))
        return votes

    def __len__(self) -> int:
        return len(self.read())


# ----------------------------------------------------------------------------
# individual records


class Contribution(NamedTuple):
    gh: str
    voter: str
    payload: dict


def _undefined(reason: str) -> dict:
    return {"defined": False, "reason": reason, "valid_days": 0, "indicators": {}, "histograms": {}}


def aggregate_individual(minutes: pd.DataFrame, tz: str, cfg: Optional[GeoConfig] = None,
                         scope: str = "resident", visits: Sequence[Visit] = (),
                         pois: Sequence[PointOfInterest] = (), trips: Sequence = (),
                         sessions: Sequence = (), cut_points: Sequence[float] = (100.0, 1800.0, 4000.0),
                         after_school_end_hour: float = 20.0) -> dict:
    """Indicator record of one subject.

    ``scope="resident"`` summarizes all valid days; ``scope="visitor"``
    restricts to minutes inside ``visits`` (one cell). Days below the
    recording threshold are removed first and rates are per recorded hour,
    averaged over days, so subjects with different recording volume are
    comparable.
    """
    cfg = cfg or GeoConfig()
    if scope not in ("resident", "visitor"):
        raise ValueError(f"unknown scope {scope!r}")
    days = valid_days(minutes, tz, cfg.day_valid_hours)
    if not days:
        return _undefined("no valid days")
    dates = local_dates(minutes["minute_start"], tz)
    keep = np.isin(dates, days)
    if scope == "visitor":
        t = minutes["minute_start"].to_numpy()
        inside = np.zeros(len(minutes), dtype=bool)
        for v in visits:
            inside |= (t >= v.t0) & (t < v.t1)
        keep &= inside
        if not keep.any():
            return _undefined("no recorded minutes inside visits on valid days")
    m = minutes[keep]
    d = dates[keep]
    ind = {}
    hist = {}

    per_day = pd.DataFrame({"date": d, "steps": m["steps"].to_numpy(), "counts": m["counts"].to_numpy()})
    g = per_day.groupby("date")
    day_steps = g["steps"].sum()
    day_hours = g.size() / 60.0
    ind["steps_per_hour"] = float((day_steps / day_hours).mean())
    ind["counts_per_minute"] = float(m["counts"].mean())
    lv = Counter(m["level"])
    for lvl in LEVELS:
        ind[f"level_{lvl}"] = lv.get(lvl, 0) / len(m)
    ind["sedentary"] = int(ind["counts_per_minute"] < cut_points[0])
    for name, edges in cfg.hist_edges.items():
        if name == "counts_per_minute":
            hist[name] = np.histogram(m["counts"].to_numpy(), bins=np.asarray(edges, float))[0].tolist()
        elif name == "steps_per_hour":
            hist[name] = np.histogram((day_steps / day_hours).to_numpy(), bins=np.asarray(edges, float))[0].tolist()

    if scope == "resident":
        n_days = len(days)
        ind["daily_steps"] = float(day_steps.mean())
        ind["sedentary_average"] = ind["sedentary"]
        if "type" in m and m["type"].notna().any():
            types = m["type"].dropna()
            tc = Counter(types)
            for ty in ACTIVITY_TYPES:
                ind[f"type_{ty}"] = tc.get(ty, 0) / len(types)
            walking = pd.Series(np.isin(m["type"].to_numpy(), ("walk", "run")))
            daily_walk = walking.groupby(d).sum()
            ind["walk60"] = int(daily_walk.mean() >= 60)
        sess = [s for s in sessions if local_dates([s.SE], tz)[0] in days]
        if sess:
            ind["sleep_gst_min"] = float(np.mean([s.GST for s in sess]))
        after = _after_school_sedentary(m, d, pois, tz, after_school_end_hour)
        if after is not None:
            ind["sedentary_min_after_school"] = after
        day_set = set(days)
        counted = [p for p in pois if p.category and local_dates([p.arrive_t], tz)[0] in day_set]
        cats = Counter(p.category for p in counted)
        if pois:
            for name, members in WEEKLY_GROUPS.items():
                ind[f"weekly_visits_{name}"] = sum(cats.get(c, 0) for c in members) / (n_days / 7.0)
            ind["visits_recreation"] = cats.get("recreation_indoor", 0) / n_days
            ind["visits_sports"] = cats.get("sports_facility", 0) / n_days
    secs = Counter()
    for tr in trips:
        if local_dates([tr.start_t], tz)[0] in days:
            secs.update(tr.mode_seconds)
    ind.update(_mode_fractions(secs))
    return {"defined": True, "reason": None, "valid_days": len(days), "indicators": dict(sorted(ind.items())),
            "histograms": hist}


def _after_school_sedentary(m: pd.DataFrame, dates: np.ndarray, pois, tz: str, end_hour: float) -> Optional[float]:
    """Mean sedentary minutes per school day between leaving school and ``end_hour``."""
    school = [p for p in pois if p.category == "school"]
    if not school:
        return None
    leave = {}
    for p in school:
        day = local_dates([p.depart_t], tz)[0]
        leave[day] = max(leave.get(day, 0), p.depart_t)
    t = m["minute_start"].to_numpy()
    sed = (m["level"].to_numpy() == "sedentary")
    vals = []
    for day, t_leave in sorted(leave.items()):
        midnight = pd.Timestamp(day, tz=tz)
        t_end = int((midnight + pd.Timedelta(hours=end_hour)).value // 1_000_000)
        if t_end <= t_leave:
            continue
        on_day = (dates == day)
        if not on_day.any():
            continue
        vals.append(int((sed & on_day & (t >= t_leave) & (t < t_end)).sum()))
    return float(np.mean(vals)) if vals else None


def visitor_contributions(votes: Sequence[GeohashVote], cut_points=(100.0, 1800.0, 4000.0)) -> list[Contribution]:
    """Pool each voter's votes per cell into one visitor record."""
    groups = defaultdict(list)
    for v in votes:
        groups[(v.gh, v.voter)].append(v.payload)
    out = []
    for (gh, voter), payloads in sorted(groups.items()):
        rec = {}
        acc = [p for p in payloads if "minutes" in p]
        if acc:
            keys = ["minutes", "steps", "counts_sum"] + [f"level_minutes_{lvl}" for lvl in LEVELS]
            sums = {k: sum(p[k] for p in acc) for k in keys}
            rec.update(sums)
            rec.update(_acc_rates(sums, cut_points))
        for name in VISIT_GROUPS:
            key = f"visit_{name}"
            if any(key in p for p in payloads):
                rec[key] = max(p.get(key, 0) for p in payloads)
        modes = [p for p in payloads if any(k.startswith("mode_") for k in p)]
        if modes:
            keys = sorted({k for p in modes for k in p if k.startswith("mode_")})
            for k in keys:
                rec[k] = sum(p.get(k, 0.0) for p in modes) / len(modes)
        out.append(Contribution(gh, voter, rec))
    return out


def resident_contribution(voter: str, home_gh: Optional[str], record: dict) -> Optional[Contribution]:
    if not home_gh or not record.get("defined"):
        return None
    return Contribution(home_gh, voter, dict(record["indicators"]))


# ----------------------------------------------------------------------------
# population cells


@dataclass
class AggregateCell:
    """Exact running sums per indicator for one geohash cell.

    Sums are kept as fractions so merging child cells into their parent
    reproduces the parent's sums exactly whatever the order.
    """

    geohash: str
    n_votes: int = 0
    voters: set = field(default_factory=set)
    sums: dict = field(default_factory=dict)     # key -> Fraction
    counts: dict = field(default_factory=dict)   # key -> int
    histograms: dict = field(default_factory=dict)
    k_anon: int = 5

    @property
    def n_voters(self) -> int:
        return len(self.voters)

    @property
    def published(self) -> bool:
        return self.n_voters >= self.k_anon

    def add(self, contribution, hist_edges: Optional[dict] = None) -> None:
        if not contribution.gh.startswith(self.geohash):
            raise ValueError(f"{contribution.gh} is outside region {self.geohash}")
        self.n_votes += 1
        self.voters.add(contribution.voter)
        for key, value in contribution.payload.items():
            if value is None or (isinstance(value, float) and not math.isfinite(value)):
                continue
            self.sums[key] = self.sums.get(key, Fraction(0)) + Fraction(value)
            self.counts[key] = self.counts.get(key, 0) + 1
            if hist_edges and key in hist_edges:
                h = np.histogram([value], bins=np.asarray(hist_edges[key], float))[0]
                prev = self.histograms.get(key)
                self.histograms[key] = (h if prev is None else prev + h)

    def merge(self, other: "AggregateCell") -> None:
        self.n_votes += other.n_votes
        self.voters |= other.voters
        for key, s in other.sums.items():
            self.sums[key] = self.sums.get(key, Fraction(0)) + s
            self.counts[key] = self.counts.get(key, 0) + other.counts[key]
        for key, h in other.histograms.items():
            prev = self.histograms.get(key)
            self.histograms[key] = h.copy() if prev is None else prev + h

    def mean(self, key: str) -> float:
        return float(self.sums[key] / self.counts[key])

    def stats(self) -> dict:
        out = {}
        for key in sorted(self.sums):
            out[key] = {"n": self.counts[key], "sum": float(self.sums[key]), "mean": self.mean(key)}
            if key in self.histograms:
                out[key]["histogram"] = [int(x) for x in self.histograms[key]]
        return out

    def to_json(self) -> dict:
        return {"geohash": self.geohash, "precision": len(self.geohash), "n_votes": self.n_votes,
                "n_voters": self.n_voters, "published": self.published, "stats": self.stats()}


def aggregate_population(contributions: Iterable, region: str, cfg: Optional[GeoConfig] = None) -> AggregateCell:
    """Aggregate the contributions lying inside ``region`` (a geohash prefix)."""
    cfg = cfg or GeoConfig()
    cell = AggregateCell(region, k_anon=cfg.k_anon)
    for c in contributions:
        if c.gh.startswith(region):
            cell.add(c, cfg.hist_edges)
    return cell


def aggregate_cells(contributions: Iterable, precision: int, cfg: Optional[GeoConfig] = None) -> dict:
    """All non-empty cells at ``precision``, keyed by geohash."""
    cfg = cfg or GeoConfig()
    cells: dict = {}
    for c in contributions:
        if len(c.gh) < precision:
            raise ValueError(f"contribution geohash {c.gh} coarser than precision {precision}")
        gh = c.gh[:precision]
        if gh not in cells:
            cells[gh] = AggregateCell(gh, k_anon=cfg.k_anon)
        cells[gh].add(c, cfg.hist_edges)
    return dict(sorted(cells.items()))


def rollup(cells: dict, precision: int) -> dict:
    """Merge cells into their parents at ``precision``."""
    parents: dict = {}
    for gh, cell in sorted(cells.items()):
        p = geohash.parent(gh, precision)
        if p not in parents:
            parents[p] = AggregateCell(p, k_anon=cell.k_anon)
        parents[p].merge(cell)
    return dict(sorted(parents.items()))


# ----------------------------------------------------------------------------
# mobility graph


def build_mobility_graph(pois: Sequence[PointOfInterest], trips: Sequence = (),
                         minutes: Optional[pd.DataFrame] = None) -> dict:
    """Category-level transition graph of one subject.

    Transitions are consecutive PoIs in time. Edges carry the transition
    probability, mean trip distance and the pooled mode mix of the trips
    that realized them.
    """
    pois = sorted(pois, key=lambda p: p.arrive_t)
    cat = lambda p: p.category or "unknown"  # noqa: E731
    nodes = defaultdict(lambda: {"visits": 0, "dwell_s": 0.0, "counts_sum": 0.0, "minutes": 0})
    t = minutes["minute_start"].to_numpy() if minutes is not None and len(minutes) else None
    for p in pois:
        n = nodes[cat(p)]
        n["visits"] += 1
        n["dwell_s"] += p.dwell_s
        if t is not None:
            sel = (t >= p.arrive_t) & (t < p.depart_t)
            n["counts_sum"] += float(minutes["counts"].to_numpy()[sel].sum())
            n["minutes"] += int(sel.sum())
    trip_of = {(tr.origin_poi, tr.dest_poi): tr for tr in trips}
    edges = defaultdict(lambda: {"count": 0, "distances": [], "modes": Counter()})
    for a, b in zip(pois, pois[1:]):
        e = edges[(cat(a), cat(b))]
        e["count"] += 1
        tr = trip_of.get((a.poi_id, b.poi_id))
        if tr is not None:
            if tr.distance_m is not None:
                e["distances"].append(tr.distance_m)
            e["modes"].update(tr.mode_seconds)
    out_count = Counter()
    for (src, _), e in edges.items():
        out_count[src] += e["count"]
    node_list = []
    for name in sorted(nodes):
        n = nodes[name]
        node_list.append({
            "category": name,
            "visits": n["visits"],
            "mean_dwell_s": n["dwell_s"] / n["visits"],
            "counts_per_minute": n["counts_sum"] / n["minutes"] if n["minutes"] else None,
        })
    edge_list = []
    for (src, dst) in sorted(edges):
        e = edges[(src, dst)]
        total = sum(e["modes"].values())
        edge_list.append({
            "source": src,
            "target": dst,
            "count": e["count"],
            "probability": e["count"] / out_count[src],
            "mean_distance_m": float(np.mean(e["distances"])) if e["distances"] else None,
            "modes": {m: s / total for m, s in sorted(e["modes"].items())} if total else {},
        })
    return {"nodes": node_list, "edges": edge_list}


# ----------------------------------------------------------------------------
# indicator catalog


def _entry(name, key, group, axes, sensors, stat="mean"):
    return {"name": name, "key": key, "group": group, "axes": tuple(axes), "sensors": tuple(sensors),
            "stat": stat}


def indicator_catalog() -> list[dict]:
    """Population indicators: aggregation axes and required sensors of each.

    ``key`` names the record/payload field; keys ending in ``*`` are a
    family (one field per level, type or mode).
    """
    R, V, O = "resident", "visitor", "vote"
    acc, loc, gis = "acc", "loc", "gis"
    cat = [
        _entry("average activity counts/minute", "counts_per_minute", "physical_activity", (V, O), (acc,)),
        _entry("average hourly steps", "steps_per_hour", "physical_activity", (V, O), (acc,)),
        _entry("average daily steps", "daily_steps", "physical_activity", (R,), (acc,)),
        _entry("average sedentary minutes after school", "sedentary_min_after_school", "physical_activity",
               (R,), (acc, loc)),
        _entry("average sleep duration", "sleep_gst_min", "physical_activity", (R,), (acc,)),
        _entry("distribution of physical activity types", "type_*", "physical_activity", (R,), (acc,),
               "distribution"),
        _entry("distribution of physical activity levels", "level_*", "physical_activity", (V, O), (acc,),
               "distribution"),
        _entry("percentage of individuals with sedentary behavior", "sedentary", "physical_activity", (V, O),
               (acc,), "percentage"),
        _entry("percentage of individuals with sedentary average activity level", "sedentary_average",
               "physical_activity", (R,), (acc,), "percentage"),
        _entry("percentage of individuals with at least 60 min of average daily walking time", "walk60",
               "physical_activity", (R,), (acc,), "percentage"),
    ]
    votes = [
        ("a food-related location", "food_related"),
        ("supermarkets or grocery stores", "supermarket"),
        ("a fast food or a takeaway restaurant", "fast_food_takeaway"),
        ("a public park", "park"),
        ("a recreational facility", "recreation"),
        ("an athletics or sports facility", "sports"),
    ]
    for label, key in votes:
        cat.append(_entry(f"percentage of votes with at least one visit to {label}", f"visit_{key}", "visits",
                          (O,), (loc, gis), "percentage"))
    weekly = [
        ("restaurants", "restaurant"),
        ("food outlets", "food_outlet"),
        ("cafes", "cafe"),
        ("fast food locations", "fast_food"),
        ("food-related locations", "food_related"),
        ("supermarkets or grocery stores", "supermarket"),
        ("restaurants or food outlets", "restaurant_or_food_outlet"),
        ("take-away restaurants", "takeaway"),
        ("fast food or take-away restaurants", "fast_food_or_takeaway"),
        ("bars", "bar"),
        ("wine or liquor stores", "wine_liquor"),
        ("public parks", "park"),
    ]
    for label, key in weekly:
        cat.append(_entry(f"average number of weekly visits to {label}", f"weekly_visits_{key}", "visits", (R,),
                          (loc, gis)))
    cat.append(_entry("average number of visits to indoor recreational facilities", "visits_recreation", "visits",
                      (R,), (loc, gis)))
    cat.append(_entry("average number of visits to athletics or sports facilities", "visits_sports", "visits",
                      (R,), (loc, gis)))
    cat.append(_entry("distribution of transportation modes", "mode_*", "mobility", (R, V, O), (acc,),
                      "distribution"))
    return cat


def computable_indicators(sensors: Iterable[str], axis: Optional[str] = None) -> list[dict]:
    have = set(sensors)
    return [e for e in indicator_catalog()
            if set(e["sensors"]) <= have and (axis is None or axis in e["axes"])]


def _catalog_keys(entries: Sequence[dict], stats_keys: Iterable[str]) -> list[str]:
    keys = []
    for k in sorted(stats_keys):
        for e in entries:
            if (e["key"].endswith("*") and k.startswith(e["key"][:-1])) or k == e["key"]:
                keys.append(k)
                break
    return keys


# ----------------------------------------------------------------------------
# export


def cells_to_geojson(cells: dict, axis: str, entries: Optional[Sequence[dict]] = None) -> dict:
    """FeatureCollection of published cells; suppressed cells are omitted."""
    entries = entries if entries is not None else indicator_catalog()
    features = []
    for gh in sorted(cells):
        cell = cells[gh]
        if not cell.published:
            continue
        props = {"geohash": gh, "axis": axis, "n_votes": cell.n_votes, "n_voters": cell.n_voters}
        for k in _catalog_keys([e for e in entries if axis in e["axes"]], cell.sums):
            props[k] = cell.mean(k)
        features.append({"type": "Feature", "geometry": {"type": "Polygon", "coordinates": [geohash.polygon(gh)]},
                         "properties": props})
    return {"type": "FeatureCollection", "features": features}


CSV_COLUMNS = ("axis", "geohash", "precision", "n_votes", "n_voters", "indicator", "n", "sum", "mean")


def cells_to_rows(cells: dict, axis: str) -> list[dict]:
    """Long-format rows of the published cells."""
    rows = []
    for gh in sorted(cells):
        cell = cells[gh]
        if not cell.published:
            continue
        for k, s in cell.stats().items():
            rows.append({"axis": axis, "geohash": gh, "precision": len(gh), "n_votes": cell.n_votes,
                         "n_voters": cell.n_voters, "indicator": k, "n": s["n"], "sum": repr(s["sum"]),
                         "mean": repr(s["mean"])})
    return rows
