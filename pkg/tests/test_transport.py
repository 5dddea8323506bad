import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.svm import SVC

from obeskit import ingest, signals, transport
from obeskit.config import TransportConfig
from obeskit.location import PointOfInterest
from obeskit.simulate import transport_training_set
from obeskit.transport import TRANSPORT_MODES, Trip

from helpers import T0, accel_stream

HOUR = 3_600_000
modes = st.sampled_from(TRANSPORT_MODES)


@pytest.fixture(scope="module")
def trained():
    X, y = transport_training_set(seed=4, seconds=90, reps=1)
    return transport.train_transport(X, y, seed=0), X, y


# ----------------------------------------------------------------------------
# median filter


def test_isolated_label_removed():
    assert transport.median_filter_labels(["car", "car", "bus", "car", "car"], 5) == ["car"] * 5


def test_window_longer_than_sequence():
    assert transport.median_filter_labels(["bike"], 9) == ["bike"]
    assert transport.median_filter_labels(["bus", "car", "bus"], 9) == ["bus"] * 3


def test_even_window_rejected():
    with pytest.raises(ValueError):
        transport.median_filter_labels(["car"] * 4, 4)


def _transitions(seq):
    return sum(a != b for a, b in zip(seq, seq[1:]))


@given(st.lists(modes, max_size=60), st.sampled_from([1, 3, 5, 9]))
def test_median_filter_properties(labels, w):
    out = transport.median_filter_labels(labels, w)
    assert len(out) == len(labels)
    assert set(out) <= set(labels)


# over more than two ordinal levels a median can add transitions (rare), so two modes only
@given(st.lists(st.sampled_from(["walk_run", "car"]), max_size=60), st.sampled_from([3, 5, 9]))
def test_median_filter_never_adds_transitions_two_modes(labels, w):
    assert _transitions(transport.median_filter_labels(labels, w)) <= _transitions(labels)


def test_dominant_tie_uses_mode_order():
    assert transport.dominant(["bus", "car"]) == "car"
    assert transport.dominant([]) is None


# ----------------------------------------------------------------------------
# class weights


def test_class_weights_example():
    assert transport.class_weights([100, 50, 200]) == [0.5, 1.0, 0.25]


@given(st.lists(st.integers(1, 10_000), min_size=1, max_size=7))
def test_class_weights_range(counts):
    w = np.asarray(transport.class_weights(counts))
    assert np.all((w > 0) & (w <= 1))
    assert w[int(np.argmin(counts))] == 1.0


def test_class_weights_reject_empty_class():
    with pytest.raises(ValueError):
        transport.class_weights([3, 0])


# ----------------------------------------------------------------------------
# features


def test_tone_power_in_its_band():
    t = np.arange(200) / 20.0
    p = transport.band_powers(1 + np.sin(2 * np.pi * 5.0 * t), 20.0)
    # bands of 2 Hz: 5 Hz lands in the third
    assert p[2] / p.sum() > 0.9


def test_constant_frame_has_no_band_power():
    f = transport.extract_transport_features(np.tile([0.0, 0.0, 9.81], (20, 1)))
    assert f.shape == (transport.TRANSPORT_FEATURE_DIM,)
    assert np.allclose(f[-5:], 0.0, atol=1e-20)


@pytest.mark.parametrize("frame", [np.zeros((10, 3)), np.zeros((20, 2)), np.full((20, 3), np.inf)])
def test_feature_input_validation(frame):
    with pytest.raises(ValueError):
        transport.extract_transport_features(frame)


# ----------------------------------------------------------------------------
# model


def test_training_stores_hyperparameters(trained):
    model, X, y = trained
    assert model.gamma == pytest.approx(1.0 / X.shape[1])
    assert model.C == 1000.0
    assert min(model.class_weights) > 0 and max(model.class_weights) == 1.0
    assert sum(model.meta["class_counts"].values()) == len(y)


def test_predictions_equal_sklearn(trained):
    model, X, y = trained
    Xt, _ = transport_training_set(seed=9, seconds=30, reps=1)
    idx = np.array([model.classes.index(v) for v in y])
    ref = SVC(C=1000.0, kernel="rbf", gamma=1.0 / X.shape[1], decision_function_shape="ovo",
              class_weight=dict(enumerate(model.class_weights))).fit(model.scaler(X), idx)
    assert np.array_equal(model.predict_index(Xt), ref.predict(model.scaler(Xt)))
    assert np.allclose(model.pairwise_decision(Xt), ref.decision_function(model.scaler(Xt)), atol=1e-6)


def test_separable_two_class_toy():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(0, 1, (40, 4)), rng.normal(8, 1, (40, 4))])
    y = ["walk"] * 40 + ["car"] * 40
    model = transport.train_transport(X, y)
    assert model.classes == ["walk_run", "car"]
    assert model.predict(X) == transport.merge_modes(y)
    # binary sign convention: the pairwise decision is positive for the first class
    assert np.all((model.pairwise_decision(X)[:, 0] > 0) == (np.arange(80) < 40))


def test_single_class_rejected():
    with pytest.raises(ValueError):
        transport.train_transport(np.zeros((5, 3)), ["car"] * 5)


def test_unknown_mode_label():
    with pytest.raises(ValueError):
        transport.merge_modes(["hovercraft"])


# ----------------------------------------------------------------------------
# trips


def _poi(pid, a_h, d_h):
    return PointOfInterest(pid, int(T0 + a_h * HOUR), int(T0 + d_h * HOUR), 20, (48.0, 11.0 + a_h / 100))


def _coverage(start_ms, end_ms):
    n = int((end_ms - start_ms) / 50) + 1
    return ingest.compute_coverage(accel_stream(np.zeros((n, 3)), t0=start_ms), 5.0)


def test_one_trip_between_two_pois():
    pois = [_poi("a", 0, 1), _poi("b", 1 + 20 / 60, 2)]
    trips = transport.segment_trips(pois, _coverage(T0, T0 + 2 * HOUR))
    assert len(trips) == 1
    assert (trips[0].start_t, trips[0].end_t) == (T0 + HOUR, T0 + HOUR + 20 * 60_000)
    assert (trips[0].origin_poi, trips[0].dest_poi) == ("a", "b")
    assert trips[0].distance_m > 0


def test_short_gap_no_trip():
    pois = [_poi("a", 0, 1), _poi("b", 1 + 30 / 3600, 2)]
    assert transport.segment_trips(pois, None) == []


def test_uncovered_trip_skipped():
    pois = [_poi("a", 0, 1), _poi("b", 1.5, 2)]
    assert transport.segment_trips(pois, _coverage(T0, T0 + HOUR - 60_000)) == []


def test_overlapping_pois_rejected():
    with pytest.raises(ValueError):
        transport.segment_trips([_poi("a", 0, 1), _poi("b", 0.5, 2)], None)


def test_trip_json_round_trip():
    trip = Trip(T0, T0 + 10_000, "a", "b", ("walk_run",) * 3 + ("bus",) * 7, "bus", 812.5)
    d = trip.to_json()
    assert d["mode_runs"] == [["walk_run", 3], ["bus", 7]]
    assert d["mode_seconds"] == {"bus": 7, "walk_run": 3}
    assert Trip.from_json(d) == trip


@pytest.mark.parametrize("mode, gen", [("car", signals.car), ("walk_run", signals.walk)])
def test_classify_trip(trained, mode, gen):
    model, _, _ = trained
    rng = np.random.default_rng(21)
    t = np.arange(300 * 20) / 20.0
    stream = accel_stream(gen(t, rng))
    frames = ingest.window(stream, 1.0, 1.0)
    trip = transport.classify_trip(Trip(T0, T0 + 300_000), frames, model)
    assert len(trip.mode_sequence) == 300
    assert trip.dominant_mode == mode


def test_classify_trip_needs_frames(trained):
    model, _, _ = trained
    frames = ingest.window(accel_stream(np.zeros((20 * 30, 3))), 1.0, 1.0)
    with pytest.raises(ValueError):
        transport.classify_trip(Trip(T0, T0 + 600_000), frames, model, TransportConfig())
