"""Sleep/wake scoring from per-minute activity counts and sleep-session indicators."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from .config import SleepConfig

MINUTE_MS = 60_000


@dataclass(frozen=True)
class SleepSession:
    """One sleep period.

    ``interrupts`` holds (start_ms, end_ms) of each interior wake run. The six
    indicators derive from ``SS``, ``SE`` and the interrupts so the identities
    GST = (SE - SS) / 60000 and NST = GST - TTI hold by construction.
    """

    SS: int
    SE: int
    interrupts: tuple = field(default=())

    def __post_init__(self):
        if not self.SS < self.SE:
            raise ValueError("session must satisfy SS < SE")

    @property
    def GST(self) -> float:
        return (self.SE - self.SS) / MINUTE_MS

    @property
    def TTI(self) -> float:
        return sum(e - s for s, e in self.interrupts) / MINUTE_MS

    @property
    def NI(self) -> int:
        return len(self.interrupts)

    @property
    def NST(self) -> float:
        return self.GST - self.TTI


def sleep_indicators(session: SleepSession) -> dict:
    return {
        "SS": session.SS,
        "SE": session.SE,
        "GST": session.GST,
        "TTI": session.TTI,
        "NI": session.NI,
        "NST": session.NST,
    }


# ----------------------------------------------------------------------------
# epoch scoring


def cole_scores(counts: np.ndarray, cfg: Optional[SleepConfig] = None) -> np.ndarray:
    """Weighted activity D per epoch over minutes -4..+2, zero-padded."""
    cfg = cfg or SleepConfig()
    a = np.asarray(counts, dtype=np.float64) * cfg.cole_count_scale
    w = np.asarray(cfg.cole_weights, dtype=np.float64)
    padded = np.concatenate([np.zeros(4), a, np.zeros(2)])
    d = np.zeros(len(a))
    for k, wk in enumerate(w):  # k = 0 pairs with A[-4]
        d += wk * padded[k:k + len(a)]
    return cfg.cole_scale * d


def sadeh_scores(counts: np.ndarray, cfg: Optional[SleepConfig] = None) -> np.ndarray:
    """Sleep probability index PS per epoch over an 11-minute window, zero-padded."""
    cfg = cfg or SleepConfig()
    a = np.asarray(counts, dtype=np.float64) * cfg.sadeh_count_scale
    n = len(a)
    b0, b1, b2, b3, b4 = cfg.sadeh_coefs
    lo, hi = cfg.sadeh_nat_range
    padded = np.concatenate([np.zeros(5), a, np.zeros(5)])
    win = np.lib.stride_tricks.sliding_window_view(padded, 11)[:n]
    mw5 = win.mean(axis=1)
    nat = ((win >= lo) & (win < hi)).sum(axis=1)
    trailing = np.lib.stride_tricks.sliding_window_view(padded[:n + 5], 6)[:n]
    sd6 = trailing.std(axis=1, ddof=1)
    lg = np.log(a + 1.0)
    return b0 - b1 * mw5 - b2 * nat - b3 * sd6 - b4 * lg


def _runs(minute_starts: np.ndarray) -> list[slice]:
    """Slices of consecutive minutes."""
    if len(minute_starts) == 0:
        return []
    breaks = np.flatnonzero(np.diff(minute_starts) != MINUTE_MS) + 1
    edges = np.concatenate([[0], breaks, [len(minute_starts)]])
    return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def nonwear_mask(counts: np.ndarray, min_run: int) -> np.ndarray:
    """True where a run of exactly-zero counts lasts longer than ``min_run`` minutes."""
    zero = np.asarray(counts) == 0
    mask = np.zeros(len(zero), dtype=bool)
    i = 0
    while i < len(zero):
        if zero[i]:
            j = i
            while j < len(zero) and zero[j]:
                j += 1
            if j - i > min_run:
                mask[i:j] = True
            i = j
        else:
            i += 1
    return mask


def score_epochs(counts: pd.DataFrame, scorer: Optional[str] = None, cfg: Optional[SleepConfig] = None,
                 drop_nonwear: bool = True) -> pd.DataFrame:
    """Label each minute sleep or wake.

    ``counts`` needs ``minute_start`` (epoch ms) and ``counts`` columns.
    Missing minutes split the series and each piece is scored separately
    with zero padding at its edges. Sustained exact-zero stretches (device
    off the wrist) are dropped rather than scored as sleep.

    Returns columns ``minute_start, counts, label, scorer`` where label is
    ``"sleep"`` or ``"wake"``.
    """
    cfg = cfg or SleepConfig()
    scorer = scorer or cfg.scorer
    if scorer not in ("cole", "sadeh"):
        raise ValueError(f"unknown scorer {scorer!r}")
    df = counts.sort_values("minute_start").reset_index(drop=True)
    c = df["counts"].to_numpy(dtype=np.float64)
    if np.any(c < 0) or np.any(~np.isfinite(c)):
        raise ValueError("counts must be finite and non-negative")
    if drop_nonwear and len(df):
        df = df[~nonwear_mask(c, cfg.nonwear_zero_min)].reset_index(drop=True)
        c = df["counts"].to_numpy(dtype=np.float64)
    starts = df["minute_start"].to_numpy(dtype=np.int64)
    sleep = np.zeros(len(df), dtype=bool)
    for sl in _runs(starts):
        if scorer == "cole":
            sleep[sl] = cole_scores(c[sl], cfg) < cfg.cole_threshold
        else:
            sleep[sl] = sadeh_scores(c[sl], cfg) >= 0
    return pd.DataFrame({
        "minute_start": starts,
        "counts": c,
        "label": np.where(sleep, "sleep", "wake"),
        "scorer": scorer,
    })


# ----------------------------------------------------------------------------
# sessions


def segment_sessions(scores: pd.DataFrame, cfg: Optional[SleepConfig] = None) -> list[SleepSession]:
    """Group scored minutes into sleep sessions.

    Maximal sleep runs separated by wake runs shorter than ``merge_gap_min``
    are merged; each merged-over wake run becomes one interrupt. Missing
    minutes always end a session. Sessions shorter than ``min_session_min``
    are discarded.
    """
    cfg = cfg or SleepConfig()
    df = scores.sort_values("minute_start")
    starts = df["minute_start"].to_numpy(dtype=np.int64)
    is_sleep = (df["label"].to_numpy() == "sleep")
    sessions = []
    for sl in _runs(starts):
        st, sp = starts[sl], is_sleep[sl]
        # maximal sleep runs as (first index, last index)
        runs = []
        i = 0
        while i < len(sp):
            if sp[i]:
                j = i
                while j + 1 < len(sp) and sp[j + 1]:
                    j += 1
                runs.append((i, j))
                i = j + 1
            else:
                i += 1
        groups = []
        for r in runs:
            if groups and r[0] - groups[-1][-1][1] - 1 < cfg.merge_gap_min:
                groups[-1].append(r)
            else:
                groups.append([r])
        for g in groups:
            ss = int(st[g[0][0]])
            se = int(st[g[-1][1]] + MINUTE_MS)
            interrupts = tuple(
                (int(st[a[1]] + MINUTE_MS), int(st[b[0]])) for a, b in zip(g[:-1], g[1:])
            )
            if (se - ss) / MINUTE_MS >= cfg.min_session_min:
                sessions.append(SleepSession(ss, se, interrupts))
    return sessions


def sessions_frame(sessions: list[SleepSession], subject: str, scorer: str) -> pd.DataFrame:
    rows = [
        {"subject": subject, "SS": s.SS, "SE": s.SE, "GST_min": s.GST, "TTI_min": s.TTI,
         "NI": s.NI, "NST_min": s.NST, "scorer": scorer}
        for s in sessions
    ]
    return pd.DataFrame(rows, columns=["subject", "SS", "SE", "GST_min", "TTI_min", "NI", "NST_min", "scorer"])
