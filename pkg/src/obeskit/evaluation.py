"""Evaluation protocols: PoI matching, step errors, confusion matrices, sleep.

Every report carries the thresholds it was computed with.
"""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import geohash
from .location import haversine_m
from .sleep import SleepSession


class AnnotationError(ValueError):
    pass


# ----------------------------------------------------------------------------
# precision / recall


def prf(tp: int, fp: int, fn: int) -> tuple[Optional[float], Optional[float], Optional[float]]:
    """Precision, recall and F1; a ratio with an empty denominator is None."""
    precision = tp / (tp + fp) if tp + fp else None
    recall = tp / (tp + fn) if tp + fn else None
    if precision is None or recall is None:
        f1 = None
    elif precision + recall == 0:
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return precision, recall, f1


@dataclass(frozen=True)
class PoiMatchResult:
    TP: int
    FP: int
    FN: int
    pairs: tuple = ()
    thresholds: dict = field(default_factory=dict)

    @property
    def precision(self):
        return prf(self.TP, self.FP, self.FN)[0]

    @property
    def recall(self):
        return prf(self.TP, self.FP, self.FN)[1]

    @property
    def f1(self):
        return prf(self.TP, self.FP, self.FN)[2]

    def __add__(self, other: "PoiMatchResult") -> "PoiMatchResult":
        return PoiMatchResult(self.TP + other.TP, self.FP + other.FP, self.FN + other.FN,
                              thresholds=self.thresholds or other.thresholds)

    def to_json(self) -> dict:
        return {"TP": self.TP, "FP": self.FP, "FN": self.FN, "precision": self.precision,
                "recall": self.recall, "f1": self.f1, "thresholds": self.thresholds}


def _center(p) -> Optional[tuple]:
    c = getattr(p, "center", None)
    if c is None and isinstance(p, dict):
        c = (p["lat"], p["lon"]) if "lat" in p else None
    return c


def _interval(p) -> tuple[int, int]:
    if isinstance(p, dict):
        return int(p["arrive"]), int(p["depart"])
    return int(p.arrive_t), int(p.depart_t)


def distance_to_cell_m(lat: float, lon: float, code: str) -> float:
    """Distance from a point to the nearest point of a geohash cell (0 inside)."""
    lat_lo, lat_hi, lon_lo, lon_hi = geohash.bounds(code)
    return float(haversine_m(lat, lon, min(max(lat, lat_lo), lat_hi), min(max(lon, lon_lo), lon_hi)))


def poi_distance(truth, detected) -> float:
    """Center distance, or distance to the detected cell once coordinates are erased."""
    tc = _center(truth)
    dc = _center(detected)
    if dc is not None:
        return float(haversine_m(tc[0], tc[1], dc[0], dc[1]))
    gh = detected["geohash"] if isinstance(detected, dict) else detected.geohash
    if not gh:
        raise ValueError("detected PoI has neither coordinates nor a geohash")
    return distance_to_cell_m(tc[0], tc[1], gh)


def overlap_ms(a: tuple, b: tuple) -> int:
    return max(0, min(a[1], b[1]) - max(a[0], b[0]))


def feasibility(truth: Sequence, detected: Sequence, max_dist_m: float = 100.0, min_overlap: float = 0.5,
                distance: Callable = poi_distance) -> tuple[np.ndarray, np.ndarray]:
    """(distance matrix, feasible mask) over truth x detected pairs."""
    D = np.zeros((len(truth), len(detected)))
    ok = np.zeros((len(truth), len(detected)), dtype=bool)
    for i, t in enumerate(truth):
        ti = _interval(t)
        for j, d in enumerate(detected):
            D[i, j] = distance(t, d)
            frac = overlap_ms(ti, _interval(d)) / (ti[1] - ti[0])
            ok[i, j] = D[i, j] <= max_dist_m and frac >= min_overlap
    return D, ok


def match_pois(truth: Sequence, detected: Sequence, max_dist_m: float = 100.0, min_overlap: float = 0.5,
               distance: Callable = poi_distance) -> PoiMatchResult:
    """One-to-one matching with the most pairs, then the least total distance.

    A pair is admissible when the detected place lies within ``max_dist_m``
    of the truth place and overlaps at least ``min_overlap`` of the truth
    stay. Unmatched truth PoIs are false negatives, unmatched detections
    false positives.
    """
    thresholds = {"max_dist_m": max_dist_m, "min_overlap": min_overlap}
    if not truth or not detected:
        return PoiMatchResult(0, len(detected), len(truth), (), thresholds)
    D, ok = feasibility(truth, detected, max_dist_m, min_overlap, distance)
    # every admissible pair outweighs any sum of distances, so cardinality comes first
    big = max_dist_m * (min(D.shape) + 1) + 1.0
    cost = np.where(ok, D - big, 0.0)
    rows, cols = linear_sum_assignment(cost)
    pairs = tuple((int(i), int(j)) for i, j in zip(rows, cols) if ok[i, j])
    tp = len(pairs)
    return PoiMatchResult(tp, len(detected) - tp, len(truth) - tp, pairs, thresholds)


# ----------------------------------------------------------------------------
# steps


def step_error(truth: Sequence[float], predicted: Sequence[float], groups: Optional[Sequence[str]] = None) -> dict:
    """Per-group mean and (population) std of predictions and errors.

    Recordings with zero true steps have no relative error and are counted
    under ``excluded_relative``.
    """
    truth = np.asarray(truth, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    if truth.shape != predicted.shape:
        raise ValueError("truth and predicted must pair up")
    groups = np.asarray(groups if groups is not None else ["all"] * len(truth), dtype=object)
    out = {}
    for g in sorted(set(groups.tolist())):
        sel = groups == g
        t, p = truth[sel], predicted[sel]
        ae = np.abs(p - t)
        nz = t != 0
        rel = ae[nz] / t[nz] * 100.0
        out[g] = {
            "n": int(sel.sum()),
            "predicted": _ms(p),
            "abs_error": _ms(ae),
            "rel_error_pct": _ms(rel),
            "excluded_relative": int((~nz).sum()),
        }
    return out


def _ms(x: np.ndarray) -> dict:
    if len(x) == 0:
        return {"mean": None, "std": None}
    return {"mean": float(np.mean(x)), "std": float(np.std(x))}


# ----------------------------------------------------------------------------
# confusion matrices


@dataclass(frozen=True)
class ConfusionMatrix:
    labels: tuple
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def normalized(self) -> np.ndarray:
        """Row percentages; empty rows stay zero."""
        rows = self.counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(rows > 0, 100.0 * self.counts / np.maximum(rows, 1), 0.0)

    def recall(self) -> dict:
        rows = self.counts.sum(axis=1)
        return {lab: (float(self.counts[i, i] / rows[i]) if rows[i] else None) for i, lab in enumerate(self.labels)}

    def accuracy(self) -> Optional[float]:
        return float(np.trace(self.counts) / self.total) if self.total else None

    def to_json(self) -> dict:
        return {"labels": list(self.labels), "counts": self.counts.tolist(),
                "row_percent": np.round(self.normalized(), 1).tolist()}


def confusion(truth: Sequence[str], predicted: Sequence[str], classes: Sequence[str]) -> ConfusionMatrix:
    if len(truth) != len(predicted):
        raise ValueError("label sequences differ in length")
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(truth, predicted):
        if t not in index or p not in index:
            raise ValueError(f"label outside class set: {t if t not in index else p!r}")
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(tuple(classes), counts)


# ----------------------------------------------------------------------------
# sleep


@dataclass(frozen=True)
class TruthRecording:
    sessions: tuple
    interrupts_known: bool = False
    nonwear: tuple = ()


SLEEP_INDICATORS = ("GST", "SS", "SE", "TTI", "NI", "NST")


@dataclass(frozen=True)
class SleepEvalResult:
    CSS: float
    n_recordings: int
    n_matched: int
    ae: dict

    def to_json(self) -> dict:
        return {"CSS": self.CSS, "n_recordings": self.n_recordings, "n_matched": self.n_matched, "ae": self.ae}


def correct_sleep_sessions(truth_counts: Sequence[int], predicted_counts: Sequence[int]) -> float:
    """Fraction of recordings whose predicted session count equals the truth."""
    if len(truth_counts) != len(predicted_counts):
        raise ValueError("recording lists differ in length")
    if not truth_counts:
        raise ValueError("no recordings")
    return sum(int(a == b) for a, b in zip(truth_counts, predicted_counts)) / len(truth_counts)


def check_truth(sessions: Sequence[SleepSession]) -> None:
    s = sorted(sessions, key=lambda x: x.SS)
    for a, b in zip(s, s[1:]):
        if b.SS < a.SE:
            raise AnnotationError("overlapping truth sleep sessions")


def sleep_eval(truth: Sequence, predicted: Sequence[Sequence[SleepSession]]) -> SleepEvalResult:
    """CSS over recordings plus absolute errors in minutes on count-matched ones.

    ``truth`` holds one TruthRecording (or plain session list) per recording.
    Interrupt-based indicators are scored only where the truth annotates
    interrupts.
    """
    truth = [t if isinstance(t, TruthRecording) else TruthRecording(tuple(t)) for t in truth]
    for t in truth:
        check_truth(t.sessions)
    css = correct_sleep_sessions([len(t.sessions) for t in truth], [len(p) for p in predicted])
    errors = defaultdict(list)
    matched = 0
    for t, p in zip(truth, predicted):
        if len(t.sessions) != len(p):
            continue
        matched += 1
        for a, b in zip(sorted(t.sessions, key=lambda x: x.SS), sorted(p, key=lambda x: x.SS)):
            errors["SS"].append(abs(a.SS - b.SS) / 60000)
            errors["SE"].append(abs(a.SE - b.SE) / 60000)
            errors["GST"].append(abs(a.GST - b.GST))
            if t.interrupts_known:
                errors["TTI"].append(abs(a.TTI - b.TTI))
                errors["NI"].append(abs(a.NI - b.NI))
                errors["NST"].append(abs(a.NST - b.NST))
    ae = {}
    for k in SLEEP_INDICATORS:
        v = np.asarray(errors.get(k, []), dtype=np.float64)
        if len(v):
            ae[k] = {"n": len(v), "mean": float(v.mean()), "std": float(v.std()), "max": float(v.max())}
    return SleepEvalResult(css, len(truth), matched, ae)


SLEEP_EVENTS = ("Recording Start", "In Bed", "Sleep Start", "Sleep End", "Off Bed", "No wear", "Wear",
                "Recording End", "Interrupt Start", "Interrupt End")


def parse_sleep_annotations(path: str | Path) -> dict:
    """Read event-annotation JSONL into TruthRecording objects keyed by recording.

    Each line: ``{"recording": id, "t": epoch_ms, "event": name}``. Sleep
    sessions run from ``Sleep Start`` to ``Sleep End``; optional
    ``Interrupt Start``/``Interrupt End`` pairs inside a session mark wake
    interruptions, and their presence makes interrupts count as annotated.
    """
    events = defaultdict(list)
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            ev = d.get("event")
            if ev not in SLEEP_EVENTS:
                raise AnnotationError(f"line {lineno}: unknown event {ev!r}")
            events[str(d.get("recording", "default"))].append((int(d["t"]), ev))
    out = {}
    for rec, evs in sorted(events.items()):
        evs.sort(key=lambda e: e[0])
        sessions, nonwear, interrupts = [], [], []
        ss = it = nw = None
        known = False
        for t, ev in evs:
            if ev == "Sleep Start":
                if ss is not None:
                    raise AnnotationError(f"{rec}: nested Sleep Start at {t}")
                ss, interrupts = t, []
            elif ev == "Sleep End":
                if ss is None:
                    raise AnnotationError(f"{rec}: Sleep End without start at {t}")
                sessions.append(SleepSession(ss, t, tuple(interrupts)))
                ss = None
            elif ev == "Interrupt Start":
                known = True
                it = t
            elif ev == "Interrupt End":
                if it is None or ss is None:
                    raise AnnotationError(f"{rec}: Interrupt End outside an interruption at {t}")
                interrupts.append((it, t))
                it = None
            elif ev == "No wear":
                nw = t
            elif ev == "Wear" and nw is not None:
                nonwear.append((nw, t))
                nw = None
        if ss is not None:
            raise AnnotationError(f"{rec}: unterminated sleep session")
        check_truth(sessions)
        out[rec] = TruthRecording(tuple(sessions), known, tuple(nonwear))
    return out


def calibrate_count_scale(count_series: Sequence, truths: Sequence, scorer: str = "sadeh", cfg=None,
                          grid: Optional[Sequence[float]] = None) -> tuple[float, list]:
    """Pick the count scale that maximizes CSS, then minimizes mean GST error.

    ``count_series`` holds one per-minute counts frame per recording.
    Returns (best scale, [(scale, CSS, GST mean AE)...]).
    """
    from dataclasses import replace

    from .config import SleepConfig
    from .sleep import score_epochs, segment_sessions

    cfg = cfg or SleepConfig()
    grid = list(grid) if grid is not None else list(np.geomspace(0.25, 64, 25))
    key = "cole_count_scale" if scorer == "cole" else "sadeh_count_scale"
    table = []
    for scale in grid:
        c = replace(cfg, **{key: float(scale)})
        preds = [segment_sessions(score_epochs(df, scorer, c), c) for df in count_series]
        res = sleep_eval(truths, preds)
        gst = res.ae.get("GST", {}).get("mean")
        table.append((float(scale), res.CSS, gst))
    best = min(table, key=lambda r: (-r[1], math.inf if r[2] is None else r[2], r[0]))
    return best[0], table


# ----------------------------------------------------------------------------
# reports


def _fmt(x, digits: int = 2) -> str:
    if x is None:
        return "n/a"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{x:.{digits}f}"


def poi_table(rows: dict) -> str:
    """Markdown table of per-subject PoI matching plus a summed row."""
    lines = ["| subject | TP | FP | FN | precision | recall | F1 |", "|---|---|---|---|---|---|---|"]
    total = None
    for name, r in rows.items():
        lines.append(f"| {name} | {r.TP} | {r.FP} | {r.FN} | {_fmt(r.precision)} | {_fmt(r.recall)} | {_fmt(r.f1)} |")
        total = r if total is None else total + r
    if total is not None:
        lines.append(f"| sum | {total.TP} | {total.FP} | {total.FN} | {_fmt(total.precision)} | "
                     f"{_fmt(total.recall)} | {_fmt(total.f1)} |")
    return "\n".join(lines)


def confusion_table(cm: ConfusionMatrix, percent: bool = False) -> str:
    vals = cm.normalized() if percent else cm.counts
    head = "| truth \\ predicted | " + " | ".join(cm.labels) + " |"
    lines = [head, "|" + "---|" * (len(cm.labels) + 1)]
    for i, lab in enumerate(cm.labels):
        cells = [f"{v:.1f}" if percent else str(int(v)) for v in vals[i]]
        lines.append(f"| {lab} | " + " | ".join(cells) + " |")
    return "\n".join(lines)


def step_table(result: dict) -> str:
    lines = ["| group | n | predicted | abs error | rel error (%) |", "|---|---|---|---|---|"]
    for g, r in result.items():
        cells = [f"{_fmt(r[k]['mean'], 1)} ± {_fmt(r[k]['std'], 1)}" for k in ("predicted", "abs_error", "rel_error_pct")]
        lines.append(f"| {g} | {r['n']} | " + " | ".join(cells) + " |")
    return "\n".join(lines)


def sleep_table(results: dict) -> str:
    """One column block per scorer: AE mean / std / max per indicator, then CSS."""
    names = list(results)
    lines = ["| indicator | " + " | ".join(f"{n} mean | {n} std | {n} max" for n in names) + " |",
             "|---|" + "---|" * (3 * len(names))]
    for ind in SLEEP_INDICATORS:
        cells = []
        for n in names:
            a = results[n].ae.get(ind)
            cells += [_fmt(a["mean"], 1), _fmt(a["std"], 1), _fmt(a["max"], 1)] if a else ["n/a"] * 3
        unit = "" if ind == "NI" else " (min)"  # interrupt count has no unit
        lines.append(f"| {ind} AE{unit} | " + " | ".join(cells) + " |")
    lines.append("| CSS (%) | " + " | ".join(f"{100 * results[n].CSS:.2f} | | " for n in names) + "|")
    return "\n".join(lines)


def render_markdown(report: dict) -> str:
    """Markdown rendering of a report produced by the pipeline's evaluate stage."""
    parts = ["# Evaluation report", "", f"config: `{report.get('config_hash', '')}`", ""]
    if report.get("thresholds"):
        parts += ["thresholds: " + ", ".join(f"{k}={v}" for k, v in sorted(report["thresholds"].items())), ""]
    if "steps" in report:
        parts += ["## Step counting", "", step_table(report["steps"]), ""]
    if "pois" in report:
        rows = {k: PoiMatchResult(v["TP"], v["FP"], v["FN"]) for k, v in report["pois"]["subjects"].items()}
        parts += ["## Points of interest", "", poi_table(rows), ""]
    for key, title in (("activity_types", "Activity types"), ("transport", "Transportation modes")):
        if key in report:
            cm = ConfusionMatrix(tuple(report[key]["labels"]), np.asarray(report[key]["counts"]))
            parts += [f"## {title}", "", confusion_table(cm), "", confusion_table(cm, percent=True), ""]
    if "sleep" in report:
        res = {k: SleepEvalResult(v["CSS"], v["n_recordings"], v["n_matched"], v["ae"])
               for k, v in report["sleep"].items()}
        parts += ["## Sleep", "", sleep_table(res), ""]
    return "\n".join(parts)
