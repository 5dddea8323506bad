import multiprocessing as mp
import threading
from collections import Counter
from fractions import Fraction

import numpy as np
import pandas as pd
import pytest
from hypothesis import given
from hypothesis import strategies as st

from obeskit import geoagg, geohash
from obeskit.config import GeoConfig
from obeskit.geoagg import Contribution, GeohashVote, PrivacyError, VoteStore
from obeskit.location import PointOfInterest
from obeskit.transport import Trip

from helpers import T0

MIN = 60_000
HOUR = 60 * MIN
GH = "u4pruyd"


def _minutes(day_hours, steps_per_day, t0=T0, counts=50.0):
    """Recorded minutes for consecutive local days starting at ``t0`` (midnight UTC)."""
    rows = []
    for d, (h, s) in enumerate(zip(day_hours, steps_per_day)):
        n = int(h * 60)
        base = t0 + d * 24 * HOUR
        per = np.full(n, s // n)
        per[: s - per.sum()] += 1
        for i in range(n):
            rows.append((base + i * MIN, counts, int(per[i]), "sedentary"))
    return pd.DataFrame(rows, columns=["minute_start", "counts", "steps", "level"])


MIDNIGHT = T0 - T0 % (24 * HOUR)


# ----------------------------------------------------------------------------
# votes and the store


def _vote(t0=T0, voter="v1", gh=GH, **payload):
    return GeohashVote(gh, voter, t0, t0 + 15 * MIN, payload)


def test_same_visit_counted_once(tmp_path):
    store = VoteStore(tmp_path / "votes.jsonl")
    assert store.cast(_vote()) == "accepted"
    assert store.cast(_vote()) == "duplicate"
    assert store.cast(_vote(T0 + 24 * HOUR)) == "accepted"
    assert len(store) == 2


def test_store_survives_reopen(tmp_path):
    VoteStore(tmp_path / "v.jsonl", meta={"salt_id": "x"}).cast(_vote(steps=3))
    again = VoteStore(tmp_path / "v.jsonl")
    assert again.cast(_vote(steps=3)) == "duplicate"
    assert again.read()[0].payload == {"steps": 3}


def test_read_at_offset(tmp_path):
    store = VoteStore(tmp_path / "v.jsonl")
    store.cast(_vote())
    off = store.offset
    store.cast(_vote(T0 + HOUR))
    assert len(store.read(off)) == 1 and len(store.read()) == 2


def test_threads_same_vote(tmp_path):
    store = VoteStore(tmp_path / "v.jsonl")
    results = []

    def worker():
        for _ in range(100):
            results.append(store.cast(_vote()))

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert Counter(results) == {"accepted": 1, "duplicate": 799}
    assert len(store) == 1


def _process_worker(path, q):
    store = VoteStore(path)
    q.put([store.cast(_vote()) for _ in range(50)])


def test_processes_same_vote(tmp_path):
    path = str(tmp_path / "v.jsonl")
    VoteStore(path)
    ctx = mp.get_context("fork")
    q = ctx.Queue()
    procs = [ctx.Process(target=_process_worker, args=(path, q)) for _ in range(4)]
    for p in procs:
        p.start()
    results = [r for _ in procs for r in q.get(timeout=60)]
    for p in procs:
        p.join()
    assert results.count("accepted") == 1
    assert len(VoteStore(path)) == 1


@pytest.mark.parametrize("payload", [{"lat": 1.0}, {"home_lon": 2.0}, {"subject_id": 3}, {"steps": "many"},
                                     {"flag": True}])
def test_forbidden_payload(payload):
    with pytest.raises(PrivacyError):
        geoagg.check_payload(payload)


def test_vote_validation():
    with pytest.raises(ValueError):
        GeohashVote("aaaa", "v", 0, 1)
    with pytest.raises(ValueError):
        GeohashVote(GH, "v", 5, 5)


def test_voter_tag_keyed():
    assert geoagg.voter_tag("s1", "a") == geoagg.voter_tag("s1", "a")
    assert geoagg.voter_tag("s1", "a") != geoagg.voter_tag("s1", "b")
    assert "s1" not in geoagg.voter_tag("s1", "a")


# ----------------------------------------------------------------------------
# visits and vote casting


def _track(cells_per_sample, dt_s=30, t0=T0):
    t = t0 + 1000 * dt_s * np.arange(len(cells_per_sample))
    pts = [geohash.decode(c) for c in cells_per_sample]
    return t, [p[0] for p in pts], [p[1] for p in pts]


def test_single_cell_visit():
    t, lat, lon = _track([GH] * 21)
    v = geoagg.geohash_visits(t, lat, lon)
    assert v == [geoagg.Visit(GH, T0, T0 + 600_000)]


def test_boundary_jitter_bridged():
    other = geohash.encode(*geohash.decode(GH), 7)[:6] + ("0" if GH[-1] != "0" else "1")
    t, lat, lon = _track([GH] * 10 + [other] * 2 + [GH] * 10)
    assert len(geoagg.geohash_visits(t, lat, lon)) == 1
    # a 330 s excursion is a visit of its own and splits the stay into two short runs
    t, lat, lon = _track([GH] * 10 + [other] * 12 + [GH] * 10)
    assert [v.gh for v in geoagg.geohash_visits(t, lat, lon)] == [other]


def test_short_stays_dropped():
    t, lat, lon = _track([GH] * 5)
    assert geoagg.geohash_visits(t, lat, lon) == []


def test_interval_split_on_grid():
    step = 900_000
    start = MIDNIGHT + 600_000
    parts = geoagg.interval_visits([geoagg.Visit(GH, start, start + 2 * step)], 900)
    assert [(p.t0, p.t1) for p in parts] == [(start, MIDNIGHT + step), (MIDNIGHT + step, MIDNIGHT + 2 * step),
                                             (MIDNIGHT + 2 * step, start + 2 * step)]


def test_cast_votes_payload_and_valid_days():
    minutes = _minutes([10, 5], [600, 300], t0=MIDNIGHT)
    visits = [geoagg.Visit(GH, MIDNIGHT, MIDNIGHT + HOUR),
              geoagg.Visit(GH, MIDNIGHT + 24 * HOUR, MIDNIGHT + 25 * HOUR)]
    poi = PointOfInterest("p", MIDNIGHT + 10 * MIN, MIDNIGHT + 50 * MIN, 30, None, "park", None, GH)
    trip = Trip(MIDNIGHT - 10 * MIN, MIDNIGHT + MIN, mode_sequence=("walk_run",) * 3 + ("bus",) * 1)
    votes = geoagg.cast_votes("s1", visits, minutes, "UTC", pois=[poi], trips=[trip])
    assert len(votes) == 1  # the second day has only 5 recorded hours
    p = votes[0].payload
    assert p["minutes"] == 60 and p["steps"] == 60 and p["steps_per_hour"] == 60.0
    assert p["visit_park"] == 1 and p["visit_food_related"] == 0
    assert p["mode_walk_run"] == 0.75 and p["mode_bus"] == 0.25
    for v in votes:
        geoagg.check_payload(v.payload)
        assert "s1" not in str(v.to_json())


# ----------------------------------------------------------------------------
# individual records


def test_steps_per_hour_averages_days():
    minutes = _minutes([10, 12, 5], [600, 1200, 5000], t0=MIDNIGHT)
    rec = geoagg.aggregate_individual(minutes, "UTC")
    assert rec["defined"] and rec["valid_days"] == 2
    assert rec["indicators"]["steps_per_hour"] == pytest.approx((600 / 10 + 1200 / 12) / 2)
    assert rec["indicators"]["daily_steps"] == 900


def test_no_valid_days_undefined():
    rec = geoagg.aggregate_individual(_minutes([5], [100], t0=MIDNIGHT), "UTC")
    assert rec == {"defined": False, "reason": "no valid days", "valid_days": 0, "indicators": {},
                   "histograms": {}}


def test_level_histogram_matches_tally():
    rng = np.random.default_rng(0)
    minutes = _minutes([9], [900], t0=MIDNIGHT)
    minutes["counts"] = rng.choice([0, 50, 150, 2000, 5000], len(minutes)).astype(float)
    rec = geoagg.aggregate_individual(minutes, "UTC")
    edges = GeoConfig().hist_edges["counts_per_minute"]
    tally = [sum(1 for c in minutes["counts"] if lo <= c < hi) for lo, hi in zip(edges, edges[1:])]
    assert rec["histograms"]["counts_per_minute"] == tally


def test_visitor_scope_restricts_minutes():
    minutes = _minutes([10], [600], t0=MIDNIGHT)
    rec = geoagg.aggregate_individual(minutes, "UTC", scope="visitor",
                                      visits=[geoagg.Visit(GH, MIDNIGHT, MIDNIGHT + HOUR)])
    assert rec["indicators"]["steps_per_hour"] == 60
    assert "daily_steps" not in rec["indicators"]


def test_after_school_window():
    minutes = _minutes([12], [0], t0=MIDNIGHT)  # all sedentary, 00:00-12:00
    school = PointOfInterest("s", MIDNIGHT + 8 * HOUR, MIDNIGHT + 10 * HOUR, 50, None, "school", 1, GH)
    rec = geoagg.aggregate_individual(minutes, "UTC", pois=[school])
    # recorded sedentary minutes between 10:00 and 20:00
    assert rec["indicators"]["sedentary_min_after_school"] == 120


# ----------------------------------------------------------------------------
# population cells


def _contribs(values, k=None):
    return [Contribution(GH, f"v{i}", {"steps_per_hour": v}) for i, v in enumerate(values)]


def test_two_voters_published():
    cell = geoagg.aggregate_population(_contribs([2, 4]), GH[:5], GeoConfig(k_anon=2))
    assert cell.published and cell.mean("steps_per_hour") == 3


def test_three_voters_suppressed_at_five():
    cells = geoagg.aggregate_cells(_contribs([2, 4, 6]), 7, GeoConfig(k_anon=5))
    assert not cells[GH].published
    assert geoagg.cells_to_geojson(cells, "visitor")["features"] == []
    assert geoagg.cells_to_rows(cells, "visitor") == []


def test_k_anonymity_boundary():
    cfg = GeoConfig(k_anon=5)
    assert not geoagg.aggregate_population(_contribs(range(4)), GH, cfg).published
    assert geoagg.aggregate_population(_contribs(range(5)), GH, cfg).published


def test_add_outside_region():
    with pytest.raises(ValueError):
        geoagg.AggregateCell("s0").add(Contribution(GH, "v", {}))


cells7 = st.text(alphabet="0123", min_size=2, max_size=2).map(lambda s: "u4pru" + s)
contrib_lists = st.lists(
    st.builds(Contribution, cells7, st.sampled_from([f"v{i}" for i in range(8)]),
              st.fixed_dictionaries({"steps_per_hour": st.floats(0, 5000, allow_nan=False),
                                     "counts_per_minute": st.integers(0, 6000)})),
    max_size=40)


@given(contrib_lists)
def test_rollup_exact(contribs):
    cfg = GeoConfig(k_anon=3)
    fine = geoagg.aggregate_cells(contribs, 7, cfg)
    for p in (6, 5):
        direct = geoagg.aggregate_cells(contribs, p, cfg)
        rolled = geoagg.rollup(fine, p)
        assert direct.keys() == rolled.keys()
        for gh in direct:
            a, b = direct[gh], rolled[gh]
            assert a.sums == b.sums and a.counts == b.counts and a.voters == b.voters
            assert a.n_votes == b.n_votes
            for key in a.histograms:
                assert np.array_equal(a.histograms[key], b.histograms[key])


@given(contrib_lists, st.integers(1, 9), st.integers(0, 5))
def test_raising_k_never_publishes(contribs, k, dk):
    lo = geoagg.aggregate_cells(contribs, 6, GeoConfig(k_anon=k))
    hi = geoagg.aggregate_cells(contribs, 6, GeoConfig(k_anon=k + dk))
    for gh in lo:
        assert hi[gh].published <= lo[gh].published


@given(contrib_lists)
def test_mean_times_n_is_sum(contribs):
    for cell in geoagg.aggregate_cells(contribs, 5).values():
        for key, s in cell.sums.items():
            assert cell.sums[key] / cell.counts[key] * cell.counts[key] == s
            assert isinstance(s, Fraction)


def test_visitor_pooling_one_record_per_voter():
    votes = [_vote(T0, "a", minutes=60, steps=60, counts_sum=600.0, level_minutes_sedentary=60,
                   level_minutes_moderate=0, level_minutes_vigorous=0, level_minutes_very_vigorous=0),
             _vote(T0 + HOUR, "a", minutes=60, steps=180, counts_sum=600.0, level_minutes_sedentary=60,
                   level_minutes_moderate=0, level_minutes_vigorous=0, level_minutes_very_vigorous=0)]
    recs = geoagg.visitor_contributions(votes)
    assert len(recs) == 1
    assert recs[0].payload["steps_per_hour"] == 120


# ----------------------------------------------------------------------------
# mobility graph


def _cat_poi(i, cat):
    return PointOfInterest(f"p{i}", T0 + i * HOUR, T0 + i * HOUR + 30 * MIN, 10, None, cat, None, GH)


def test_mobility_graph_probabilities():
    seq = ["home", "school"] * 4 + ["home", "park"]
    g = geoagg.build_mobility_graph([_cat_poi(i, c) for i, c in enumerate(seq)])
    edges = {(e["source"], e["target"]): e for e in g["edges"]}
    assert edges[("home", "school")]["probability"] == 0.8
    assert edges[("home", "park")]["probability"] == pytest.approx(0.2)
    out = Counter()
    for e in g["edges"]:
        out[e["source"]] += e["probability"]
    assert all(v == pytest.approx(1.0) for v in out.values())


def test_single_poi_graph():
    g = geoagg.build_mobility_graph([_cat_poi(0, "home")])
    assert len(g["nodes"]) == 1 and g["edges"] == []


def test_graph_edge_modes_and_distance():
    pois = [_cat_poi(0, "home"), _cat_poi(1, "park")]
    trip = Trip(pois[0].depart_t, pois[1].arrive_t, "p0", "p1", ("bike",) * 4, "bike", 1200.0)
    e = geoagg.build_mobility_graph(pois, [trip])["edges"][0]
    assert e["modes"] == {"bike": 1.0} and e["mean_distance_m"] == 1200.0


# ----------------------------------------------------------------------------
# catalog


def test_catalog_contents():
    cat = geoagg.indicator_catalog()
    assert len(cat) >= 30
    by_name = {e["name"]: e for e in cat}
    assert set(by_name["average hourly steps"]["axes"]) == {"visitor", "vote"}
    assert by_name["average hourly steps"]["sensors"] == ("acc",)
    assert set(by_name["distribution of transportation modes"]["axes"]) == {"resident", "visitor", "vote"}


def test_computable_subset():
    acc_only = geoagg.computable_indicators(["acc"])
    assert acc_only and all(e["sensors"] == ("acc",) for e in acc_only)
    assert len(geoagg.computable_indicators(["acc", "loc", "gis"])) == len(geoagg.indicator_catalog())
