"""Small builders shared by the test modules."""
import json

import numpy as np

from obeskit.ingest import SensorStream

T0 = 1_709_593_200_000  # 2024-03-04 23:00 UTC, a minute boundary


def accel_stream(values, rate_hz=20.0, t0=T0, subject="s", device="smartphone"):
    values = np.asarray(values, dtype=np.float64)
    t = t0 + np.round(np.arange(len(values)) * 1000.0 / rate_hz).astype(np.int64)
    return SensorStream(subject, "accel", t, values, rate_hz, device, "UTC")


def location_stream(t, lat, lon, subject="s"):
    t = np.asarray(t, dtype=np.int64)
    vals = np.column_stack([lat, lon, np.full(len(t), 10.0)])
    return SensorStream(subject, "location", t, vals, 0.0, None, "UTC")


def write_jsonl(path, rows, meta=None):
    with open(path, "w") as fh:
        if meta is not None:
            fh.write(json.dumps({"meta": meta}) + "\n")
        for r in rows:
            fh.write(json.dumps(r) + "\n")
    return path


# ----------------------------------------------------------------------------
# PoI matching oracle


def random_match_instance(rng, max_n=6, max_dist_m=100.0):
    """Truth/detected PoI dicts plus a distance lookup for matcher checks."""
    nt, nd = int(rng.integers(0, max_n + 1)), int(rng.integers(0, max_n + 1))
    # coarse values make equal-cost alternatives common
    D = rng.choice([10.0, 40.0, 80.0, 99.0, 100.0, 150.0], size=(nt, nd))

    def stays(n, tag):
        out = []
        for i in range(n):
            a = int(rng.integers(0, 10)) * 600_000
            out.append({"id": (tag, i), "arrive": a, "depart": a + int(rng.integers(1, 6)) * 600_000})
        return out

    truth, detected = stays(nt, "t"), stays(nd, "d")

    def distance(t, d):
        return D[t["id"][1], d["id"][1]]

    return truth, detected, distance


def brute_force_match(truth, detected, distance, max_dist_m=100.0, min_overlap=0.5):
    """(most pairs, least total distance) by exhaustive search over subsets."""
    from functools import lru_cache

    def ok(i, j):
        t, d = truth[i], detected[j]
        ov = max(0, min(t["depart"], d["depart"]) - max(t["arrive"], d["arrive"]))
        return distance(t, d) <= max_dist_m and ov / (t["depart"] - t["arrive"]) >= min_overlap

    @lru_cache(maxsize=None)
    def best(i, used):
        if i == len(truth):
            return (0, 0.0)
        cand = [best(i + 1, used)]
        for j in range(len(detected)):
            if not used >> j & 1 and ok(i, j):
                n, s = best(i + 1, used | 1 << j)
                cand.append((n + 1, s + distance(truth[i], detected[j])))
        return max(cand, key=lambda x: (x[0], -x[1]))

    return best(0, 0)
