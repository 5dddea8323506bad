"""Pipeline stages: ingest -> extract -> aggregate -> export, plus evaluate.

Every stage reads the previous stage's files under ``out_dir`` so any stage
can be re-run on its own. Artifacts carry the schema version and the
config hash: CSVs on a leading ``#`` comment line, JSONL files on a first
``{"meta": ...}`` line, JSON files as top-level keys.

Everything from PoI categorization onwards (``pois``, ``trips``,
``graphs``, ``aggregate``, ``export``) is keyed by voter tag and holds no
coordinates or subject ids.
"""
from __future__ import annotations

import json
import logging
import re
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from . import activity, geoagg, geohash, ingest, location, sleep, transport
from .config import PipelineConfig
from .evaluation import (TruthRecording, check_truth, confusion, match_pois, parse_sleep_annotations,
                         render_markdown, sleep_eval, step_error)
from .models import load_model
from .sleep import SleepSession

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DOWNSTREAM_DIRS = ("pois", "trips", "graphs", "aggregate", "export")
AXES = ("vote", "visitor", "resident")


class DataError(RuntimeError):
    """Input or intermediate data is missing or unusable."""


class DependencyError(DataError):
    pass


# ----------------------------------------------------------------------------
# artifact io


def _meta(cfg: PipelineConfig, **extra) -> dict:
    return {"schema": SCHEMA_VERSION, "config": cfg.hash, **extra}


def write_csv(df: pd.DataFrame, path: Path, cfg: PipelineConfig) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# obeskit schema={SCHEMA_VERSION} config={cfg.hash}\n")
        df.to_csv(fh, index=False, lineterminator="\n")


def read_csv(path: Path) -> pd.DataFrame:
    if not path.exists():
        raise DependencyError(f"missing artifact {path}")
    return pd.read_csv(path, skiprows=1)


def write_json(obj: dict, path: Path, cfg: PipelineConfig) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({**_meta(cfg), **obj}, indent=1, sort_keys=True) + "\n")


def read_json(path: Path) -> dict:
    if not path.exists():
        raise DependencyError(f"missing artifact {path}")
    return json.loads(path.read_text())


def write_jsonl(rows: list, path: Path, cfg: PipelineConfig, **meta) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        fh.write(json.dumps({"meta": _meta(cfg, **meta)}, sort_keys=True) + "\n")
        for r in rows:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


def read_jsonl(path: Path) -> tuple[dict, list]:
    if not path.exists():
        raise DependencyError(f"missing artifact {path}")
    meta, rows = {}, []
    for line in path.read_text().splitlines():
        d = json.loads(line)
        if "meta" in d:
            meta = d["meta"]
        else:
            rows.append(d)
    return meta, rows


def _map(fn, items: list, workers: int) -> list:
    """Ordered map, in worker processes when ``workers > 1``."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def _subjects(cfg: PipelineConfig) -> list[dict]:
    if not cfg.inputs:
        raise DataError("config lists no inputs")
    return sorted((dict(e) for e in cfg.inputs), key=lambda e: e["subject"])


def _tag(cfg: PipelineConfig, subject: str) -> str:
    return geoagg.voter_tag(subject, cfg.geo.voter_salt)


# ----------------------------------------------------------------------------
# ingest


def _ingest_one(args) -> dict:
    cfg, entry = args
    subject = entry["subject"]
    out = Path(cfg.out_dir) / "ingest" / subject
    out.mkdir(parents=True, exist_ok=True)
    tz = entry.get("tz") or cfg.tz
    info = {"subject": subject, "tz": tz}
    if entry.get("accel"):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ingest.RateWarning)
            acc = ingest.parse_stream(entry["accel"], "accel", subject, entry.get("device"), tz,
                                      cfg.ingest.rate_band_hz)
        cov = ingest.compute_coverage(acc, cfg.ingest.accel_gap_s)
        rate = cfg.ingest.canonical_rate_hz
        res = ingest.resample(acc, rate, cov, allow_upsample=acc.nominal_rate_hz < rate)
        np.save(out / "accel_t.npy", res.t.astype(np.int64))
        np.save(out / "accel_xyz.npy", res.values)
        info.update(device=acc.device_profile or entry.get("device") or "smartphone",
                    nominal_rate_hz=acc.nominal_rate_hz, accel_samples=len(acc),
                    accel_coverage=cov.to_dict(), rate_warnings=[str(w.message) for w in caught])
    if entry.get("location"):
        loc = ingest.parse_stream(entry["location"], "location", subject, tz=tz)
        np.save(out / "location_t.npy", loc.t)
        np.save(out / "location.npy", loc.values)
        info.update(location_samples=len(loc),
                    location_coverage=ingest.compute_coverage(loc, cfg.ingest.location_gap_s).to_dict())
    write_json(info, out / "meta.json", cfg)
    return {"subject": subject, "accel": "accel" in entry, "location": "location" in entry}


def run_ingest(cfg: PipelineConfig) -> dict:
    subjects = _subjects(cfg)
    for e in subjects:
        for key in ("accel", "location"):
            if e.get(key) and not Path(e[key]).exists():
                raise DataError(f"{e['subject']}: input file not found: {e[key]}")
    done = _map(_ingest_one, [(cfg, e) for e in subjects], cfg.workers)
    return {"stage": "ingest", "subjects": len(done)}


def _load_ingest(cfg: PipelineConfig, subject: str):
    d = Path(cfg.out_dir) / "ingest" / subject
    meta = read_json(d / "meta.json")
    acc = cov = loc = None
    if (d / "accel_t.npy").exists():
        acc = ingest.SensorStream(subject, "accel", np.load(d / "accel_t.npy"), np.load(d / "accel_xyz.npy"),
                                  cfg.ingest.canonical_rate_hz, meta.get("device"), meta["tz"])
        cov = ingest.CoverageMap.from_dict(meta["accel_coverage"])
    if (d / "location_t.npy").exists():
        loc = ingest.SensorStream(subject, "location", np.load(d / "location_t.npy"), np.load(d / "location.npy"),
                                  0.0, None, meta["tz"])
    return meta, acc, cov, loc


# ----------------------------------------------------------------------------
# extract


def _minute_table(acc, cov, cfg: PipelineConfig, type_model, profile: str) -> pd.DataFrame:
    """Per-minute indicators: ``subject, minute_start, counts, steps, level, type``."""
    frames = ingest.window(acc, 60.0, 60.0, cov, cfg.ingest.accel_gap_s, align_ms=60_000)
    counts = activity.activity_counts(frames, cfg.activity)
    steps = activity.count_steps(frames, profile, cfg.activity)
    df = counts.copy()
    df["level"] = activity.classify_level(df["counts"].to_numpy(), cfg.activity.cut_points) if len(df) else []
    df["steps"] = steps["steps"].to_numpy()
    if len(frames):
        X = np.vstack([activity.extract_type_features(f, frames.rate_hz) for f in frames.data])
        df["type"] = type_model.predict(X)
    else:
        df["type"] = []
    df.insert(0, "subject", acc.subject_id)
    return df[["subject", "minute_start", "counts", "steps", "level", "type"]]


def _extract_one(args) -> dict:
    cfg, entry, type_model, transport_model, gaz_entries = args
    subject = entry["subject"]
    meta, acc, cov, loc = _load_ingest(cfg, subject)
    tz = meta["tz"]
    base = Path(cfg.out_dir) / "extract" / subject
    tag = _tag(cfg, subject)
    summary = {"subject": subject}
    minutes = None
    if acc is not None:
        profile = meta.get("device") or "smartphone"
        minutes = _minute_table(acc, cov, cfg, type_model, profile)
        write_csv(minutes, base / "minutes.csv", cfg)
        epochs = sleep.score_epochs(minutes[["minute_start", "counts"]], cfg.sleep.scorer, cfg.sleep)
        sessions = sleep.segment_sessions(epochs, cfg.sleep)
        write_csv(epochs, base / "sleep_epochs.csv", cfg)
        sess_df = sleep.sessions_frame(sessions, subject, cfg.sleep.scorer)
        sess_df["interrupts"] = [json.dumps([list(i) for i in s.interrupts]) for s in sessions]
        write_csv(sess_df, base / "sleep_sessions.csv", cfg)
        summary.update(minutes=len(minutes), sleep_sessions=len(sessions))
    if loc is not None:
        pois = location.detect_pois(loc, cfg.location)
        pois, labels = location.label_home_school(pois, tz, cfg.location)
        index = location.GazetteerIndex(gaz_entries)
        pois = [location.categorize_poi(p, index, cfg.location.match_radius_m) if len(index)
                else (p if p.category else replace(p, category="unknown")) for p in pois]
        trips = []
        if acc is not None:
            for tr in transport.segment_trips(pois, cov, cfg.transport):
                seg = acc.slice_time(tr.start_t, tr.end_t)
                if len(seg) == 0:
                    continue
                fr = ingest.window(seg, cfg.transport.frame_s, cfg.transport.frame_s, None,
                                   cfg.ingest.accel_gap_s, align_ms=1000)
                try:
                    trips.append(transport.classify_trip(tr, fr, transport_model, cfg.transport))
                except ValueError as exc:
                    log.info("%s: %s", subject, exc)
        redacted = [location.redact_coordinates(p, cfg.geo.vote_precision) for p in pois]
        reasons = {k: v for k, v in sorted(labels["reasons"].items())}
        write_jsonl([p.to_json() for p in redacted], Path(cfg.out_dir) / "pois" / f"{tag}.jsonl", cfg,
                    home_school_reasons=reasons)
        write_jsonl([t.to_json() for t in trips], Path(cfg.out_dir) / "trips" / f"{tag}.jsonl", cfg)
        summary.update(pois=len(pois), trips=len(trips))
    return summary


def _models(cfg: PipelineConfig):
    from .simulate import default_transport_model, default_type_model

    rate = cfg.ingest.canonical_rate_hz
    if cfg.activity_model:
        type_model = load_model(cfg.activity_model, activity.type_feature_spec(rate))
    else:
        type_model = default_type_model(cfg.seed)
    if cfg.transport_model:
        transport_model = load_model(cfg.transport_model, transport.transport_feature_spec(rate, cfg.transport.frame_s))
    else:
        transport_model = default_transport_model(cfg.seed, cfg.transport)
    return type_model, transport_model


def run_extract(cfg: PipelineConfig) -> dict:
    subjects = _subjects(cfg)
    for e in subjects:
        if not (Path(cfg.out_dir) / "ingest" / e["subject"] / "meta.json").exists():
            raise DependencyError(f"{e['subject']}: run 'ingest' first")
    type_model, transport_model = _models(cfg)
    gaz = location.load_gazetteer(cfg.gazetteer) if cfg.gazetteer else []
    out = _map(_extract_one, [(cfg, e, type_model, transport_model, gaz) for e in subjects], cfg.workers)
    return {"stage": "extract", "subjects": out}


# ----------------------------------------------------------------------------
# aggregate


def _load_pois(path: Path) -> list:
    if not path.exists():
        return []
    _, rows = read_jsonl(path)
    return [location.PointOfInterest(r["poi_id"], int(r["arrive"]), int(r["depart"]), 0, None, r["category"],
                                     None, r["geohash"]) for r in rows]


def _load_trips(path: Path) -> list:
    if not path.exists():
        return []
    _, rows = read_jsonl(path)
    return [transport.Trip.from_json(r) for r in rows]


def _load_sessions(path: Path) -> list:
    if not path.exists():
        return []
    df = read_csv(path)
    return [SleepSession(int(r.SS), int(r.SE), tuple(tuple(i) for i in json.loads(r.interrupts)))
            for r in df.itertuples()]


def _aggregate_one(args) -> dict:
    cfg, entry = args
    subject = entry["subject"]
    root = Path(cfg.out_dir)
    minutes_path = root / "extract" / subject / "minutes.csv"
    if not minutes_path.exists():
        raise DependencyError(f"{subject}: run 'extract' first (missing {minutes_path.name})")
    minutes = read_csv(minutes_path)
    meta, _, _, loc = _load_ingest(cfg, subject)
    tz = meta["tz"]
    tag = _tag(cfg, subject)
    pois = _load_pois(root / "pois" / f"{tag}.jsonl")
    trips = _load_trips(root / "trips" / f"{tag}.jsonl")
    sessions = _load_sessions(root / "extract" / subject / "sleep_sessions.csv")
    has_gis = bool(cfg.gazetteer)
    cut = cfg.activity.cut_points
    votes = []
    if loc is not None:
        visits = geoagg.geohash_visits(loc.t, loc.values[:, 0], loc.values[:, 1], cfg.geo,
                                       max_gap_s=cfg.ingest.location_gap_s)
        votes = geoagg.cast_votes(subject, visits, minutes, tz, cfg.geo, pois if has_gis else (), trips, cut)
        if not has_gis:
            votes = [replace(v, payload={k: x for k, x in v.payload.items() if not k.startswith("visit_")})
                     for v in votes]
    resident = geoagg.aggregate_individual(minutes, tz, cfg.geo, "resident", pois=pois, trips=trips,
                                           sessions=sessions, cut_points=cut)
    if not has_gis:
        # place categories other than home/school need the gazetteer
        resident["indicators"] = {k: v for k, v in resident["indicators"].items()
                                  if not k.startswith(("weekly_visits_", "visits_"))}
    home = [p.geohash for p in pois if p.category == "home" and p.geohash]
    home_gh = sorted(home)[0] if home else None
    graph = geoagg.build_mobility_graph(pois, trips, minutes) if pois else None
    return {"tag": tag, "votes": [v.to_json() for v in votes], "resident": resident, "home_gh": home_gh,
            "graph": graph}


def population_cells(votes: list, residents: list, cfg: PipelineConfig) -> dict:
    """{axis: {precision: {geohash: AggregateCell}}} from votes and resident contributions."""
    cut = cfg.activity.cut_points
    contribs = {
        "vote": [geoagg.Contribution(v.gh, v.voter, v.payload) for v in votes],
        "visitor": geoagg.visitor_contributions(votes, cut),
        "resident": [c for c in residents if c is not None],
    }
    out = {}
    precisions = sorted(cfg.geo.export_precisions, reverse=True)
    for axis, cs in contribs.items():
        cs = [c for c in cs if len(c.gh) >= precisions[0]]
        levels = {precisions[0]: geoagg.aggregate_cells(cs, precisions[0], cfg.geo)}
        for p in precisions[1:]:
            levels[p] = geoagg.rollup(levels[precisions[0]], p)
        out[axis] = dict(sorted(levels.items()))
    return out


def run_aggregate(cfg: PipelineConfig) -> dict:
    subjects = _subjects(cfg)
    root = Path(cfg.out_dir)
    results = _map(_aggregate_one, [(cfg, e) for e in subjects], cfg.workers)
    store = geoagg.VoteStore(root / "aggregate" / "votes.jsonl", meta=_meta(cfg))
    status = {"accepted": 0, "duplicate": 0}
    for r in sorted(results, key=lambda r: r["tag"]):
        for v in r["votes"]:
            status[store.cast(geoagg.GeohashVote.from_json(v))] += 1
        write_json({"voter": r["tag"], "home_geohash": r["home_gh"], "resident": r["resident"]},
                   root / "aggregate" / "individual" / f"{r['tag']}.json", cfg)
        if r["graph"] is not None:
            write_json({"voter": r["tag"], **r["graph"]}, root / "graphs" / f"{r['tag']}.json", cfg)
    cells = _cells_from_artifacts(cfg)
    for axis, levels in cells.items():
        rows = [c.to_json() for p in levels for c in levels[p].values()]
        write_json({"axis": axis, "k_anon": cfg.geo.k_anon, "cells": rows},
                   root / "aggregate" / f"cells_{axis}.json", cfg)
    return {"stage": "aggregate", "votes": status,
            "published": {a: sum(c.published for lv in cells[a].values() for c in lv.values()) for a in cells}}


def _cells_from_artifacts(cfg: PipelineConfig) -> dict:
    """Recompute population cells from the vote log and individual records."""
    root = Path(cfg.out_dir)
    log_path = root / "aggregate" / "votes.jsonl"
    if not log_path.exists():
        raise DependencyError("run 'aggregate' first (missing vote log)")
    votes = geoagg.VoteStore(log_path).read()
    residents = []
    for path in sorted((root / "aggregate" / "individual").glob("*.json")):
        d = read_json(path)
        residents.append(geoagg.resident_contribution(d["voter"], d.get("home_geohash"), d["resident"]))
    return population_cells(votes, residents, cfg)


# ----------------------------------------------------------------------------
# export


def available_sensors(cfg: PipelineConfig) -> list[str]:
    sensors = []
    if any(e.get("accel") for e in cfg.inputs):
        sensors.append("acc")
    if any(e.get("location") for e in cfg.inputs):
        sensors.append("loc")
    if cfg.gazetteer:
        sensors.append("gis")
    return sensors


def run_export(cfg: PipelineConfig) -> dict:
    root = Path(cfg.out_dir)
    cells = _cells_from_artifacts(cfg)
    entries = geoagg.computable_indicators(available_sensors(cfg))
    rows = []
    n_features = 0
    for axis in AXES:
        for p, level in cells[axis].items():
            fc = geoagg.cells_to_geojson(level, axis, entries)
            fc["obeskit"] = _meta(cfg, axis=axis, precision=p, k_anon=cfg.geo.k_anon)
            path = root / "export" / f"{axis}_p{p}.geojson"
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(fc, sort_keys=True) + "\n")
            n_features += len(fc["features"])
            keys = set(geoagg._catalog_keys([e for e in entries if axis in e["axes"]],
                                            {k for c in level.values() for k in c.sums}))
            rows += [r for r in geoagg.cells_to_rows(level, axis) if r["indicator"] in keys]
    write_csv(pd.DataFrame(rows, columns=list(geoagg.CSV_COLUMNS)), root / "export" / "cells.csv", cfg)
    write_json({"indicators": [{**e, "axes": list(e["axes"]), "sensors": list(e["sensors"])} for e in entries]},
               root / "export" / "catalog.json", cfg)
    return {"stage": "export", "features": n_features, "rows": len(rows)}


# ----------------------------------------------------------------------------
# evaluate


def _truth(cfg: PipelineConfig, subject: str) -> dict:
    if not cfg.truth_dir:
        raise DataError("evaluate needs 'truth_dir' in the config")
    path = Path(cfg.truth_dir) / f"{subject}.json"
    if not path.exists():
        raise DataError(f"{subject}: no ground truth at {path}")
    return json.loads(path.read_text())


def run_evaluate(cfg: PipelineConfig) -> dict:
    from .activity import ACTIVITY_TYPES
    from .transport import MODE_MERGE, TRANSPORT_MODES

    root = Path(cfg.out_dir)
    subjects = _subjects(cfg)
    thresholds = {"max_dist_m": cfg.eval.max_dist_m, "min_overlap": cfg.eval.min_overlap}
    step_truth, step_pred, step_group = [], [], []
    poi_rows = {}
    type_t, type_p = [], []
    mode_t, mode_p = [], []
    sleep_truth, sleep_pred = [], {"cole": [], "sadeh": []}
    for i, e in enumerate(subjects):
        subject = e["subject"]
        truth = _truth(cfg, subject)
        minutes = read_csv(root / "extract" / subject / "minutes.csv")
        tag = _tag(cfg, subject)
        t_min = minutes["minute_start"].to_numpy()
        for b in truth.get("steps", []):
            sel = (t_min >= b["t0"]) & (t_min < b["t1"])
            step_truth.append(b["steps"])
            step_pred.append(int(minutes["steps"].to_numpy()[sel].sum()))
            step_group.append(truth.get("device", "smartphone"))
        for a in truth.get("activities", []):
            sel = (t_min >= a["t0"]) & (t_min + 60_000 <= a["t1"])
            type_t += [a["type"]] * int(sel.sum())
            type_p += minutes["type"].to_numpy()[sel].tolist()
        detected = _load_pois(root / "pois" / f"{tag}.jsonl")
        res = match_pois(truth.get("pois", []), detected, cfg.eval.max_dist_m, cfg.eval.min_overlap)
        poi_rows[f"subject {i + 1}"] = res
        trips = _load_trips(root / "trips" / f"{tag}.jsonl")
        for tt in truth.get("trips", []):
            best, best_ov = None, 0
            for tr in trips:
                ov = min(tt["end"], tr.end_t) - max(tt["start"], tr.start_t)
                if ov > best_ov:
                    best, best_ov = tr, ov
            if best is not None and best.dominant_mode:
                mode_t.append(MODE_MERGE[tt["mode"]])
                mode_p.append(best.dominant_mode)
        ann = Path(cfg.truth_dir) / f"{subject}_sleep.jsonl"
        if ann.exists():
            rec = parse_sleep_annotations(ann).get(subject, TruthRecording(()))
        else:
            sess = tuple(SleepSession(s["SS"], s["SE"], tuple(map(tuple, s.get("interrupts", ()))))
                         for s in truth.get("sleep", []))
            rec = TruthRecording(sess, interrupts_known=any(s.interrupts for s in sess))
        check_truth(rec.sessions)
        sleep_truth.append(rec)
        for scorer in sleep_pred:
            ep = sleep.score_epochs(minutes[["minute_start", "counts"]], scorer, cfg.sleep)
            sleep_pred[scorer].append(sleep.segment_sessions(ep, cfg.sleep))

    report = {"config_hash": cfg.hash, "schema": SCHEMA_VERSION, "thresholds": thresholds}
    if step_truth:
        report["steps"] = step_error(step_truth, step_pred, step_group)
    total = None
    for r in poi_rows.values():
        total = r if total is None else total + r
    report["pois"] = {"subjects": {k: v.to_json() for k, v in poi_rows.items()},
                      "sum": total.to_json() if total else None}
    if type_t:
        report["activity_types"] = confusion(type_t, type_p, ACTIVITY_TYPES).to_json()
    if mode_t:
        report["transport"] = confusion(mode_t, mode_p, TRANSPORT_MODES).to_json()
    report["sleep"] = {s: sleep_eval(sleep_truth, p).to_json() for s, p in sleep_pred.items()}
    out = root / "evaluate"
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    (out / "report.md").write_text(render_markdown(report))
    return {"stage": "evaluate", "poi_f1": total.f1 if total else None,
            "css": {s: v["CSS"] for s, v in report["sleep"].items()}}


# ----------------------------------------------------------------------------
# all stages, privacy scan


def run_all(cfg: PipelineConfig) -> dict:
    out = {"ingest": run_ingest(cfg), "extract": run_extract(cfg), "aggregate": run_aggregate(cfg),
           "export": run_export(cfg)}
    if cfg.truth_dir:
        out["evaluate"] = run_evaluate(cfg)
    return out


STAGES = {"ingest": run_ingest, "extract": run_extract, "aggregate": run_aggregate, "export": run_export,
          "evaluate": run_evaluate, "run": run_all}

_NUM = re.compile(r"-?\d+\.\d+")


def privacy_scan(cfg: PipelineConfig) -> list[str]:
    """Find subject ids or raw input coordinates in downstream artifacts.

    Coordinates are matched on the exact text of every latitude/longitude
    value in the input location files and on the same values reprinted
    with 5 or more decimals.
    """
    subjects = [e["subject"] for e in cfg.inputs]
    raw = set()
    for e in cfg.inputs:
        if not e.get("location"):
            continue
        with open(e["location"]) as fh:
            for line in fh:
                d = json.loads(line) if line.startswith("{") else None
                if d and "lat" in d:
                    for key in ("lat", "lon"):
                        v = float(d[key])
                        raw.add(repr(v))
                        for k in range(5, 8):
                            raw.add(f"{v:.{k}f}")
    findings = []
    root = Path(cfg.out_dir)
    for sub in DOWNSTREAM_DIRS:
        for path in sorted((root / sub).rglob("*")):
            if not path.is_file() or path.suffix == ".lock":
                continue
            rel = path.relative_to(root)
            text = path.read_text(errors="replace")
            for s in subjects:
                if s in str(rel) or s in text:
                    findings.append(f"{rel}: subject id {s!r}")
            for tok in _NUM.findall(text):
                if tok in raw:
                    findings.append(f"{rel}: raw coordinate {tok}")
                    break
    return findings
