import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from obeskit import activity, signals
from obeskit.activity import ACTIVITY_TYPES, LEVELS
from obeskit.ingest import Frames
from obeskit.models import ModelError, load_model, save_model
from obeskit.simulate import type_training_set

RATE = 20.0
N = 1200  # one minute


def _frames(*frames, rate=RATE):
    data = np.stack(frames)
    return Frames(np.arange(len(frames)) * 60_000.0, data, rate, 60.0, 60.0)


def _sine(freq, amp=1.0, axis=0, phase=0.0, n=N):
    t = np.arange(n) / RATE
    out = np.zeros((n, 3))
    out[:, 2] = 9.81
    out[:, axis] += amp * np.sin(2 * np.pi * freq * t + phase)
    return out


@pytest.fixture(scope="module")
def type_model():
    X, y = type_training_set(seed=3, per_type=10)
    return activity.train_type_model(X, y, seed=0), X, y


# ----------------------------------------------------------------------------
# counts


def test_still_device_has_zero_counts():
    f = _frames(np.tile([0.0, 0.0, 9.81], (N, 1)))
    assert activity.activity_counts(f)["counts"].iloc[0] == pytest.approx(0.0, abs=1e-6)


def test_two_hz_sine_matches_rectified_integral():
    # integral of |sin| over 60 s is 60 * 2 / pi; averaging sampling phases removes the aliasing term
    expected = 60 * 2 / np.pi
    phases = np.linspace(0, np.pi, 16, endpoint=False)
    got = activity.activity_counts(_frames(*[_sine(2.0, phase=p) for p in phases]))["counts"].to_numpy()
    assert abs(got.mean() - expected) / expected < 0.05
    assert np.all(np.abs(got - expected) / expected < 0.08)


def test_counts_scale_linearly():
    a = activity.activity_counts(_frames(_sine(1.3, 1.0), _sine(1.3, 2.0)))["counts"].to_numpy()
    assert a[1] == pytest.approx(2 * a[0], rel=1e-9)


@given(arrays(np.float64, (N, 3), elements=st.floats(-20, 20)), st.floats(-20, 20), st.integers(0, 10**6))
def test_counts_ignore_offset_and_start_time(frame, offset, shift):
    base = activity.activity_counts(_frames(frame))["counts"].iloc[0]
    moved = Frames(np.array([60_000.0 * shift]), (frame + offset)[None], RATE, 60.0, 60.0)
    got = activity.activity_counts(moved)
    assert got["counts"].iloc[0] == pytest.approx(base, rel=1e-6, abs=1e-6)
    assert got["minute_start"].iloc[0] == 60_000 * shift


def test_counts_reject_wrong_frame_length():
    f = Frames(np.array([0.0]), np.zeros((1, 600, 3)), RATE, 30.0, 30.0)
    with pytest.raises(ValueError):
        activity.activity_counts(f)


# ----------------------------------------------------------------------------
# levels


def test_level_boundaries():
    c1, c2, c3 = 100.0, 1800.0, 4000.0
    assert activity.classify_level(0.0) == "sedentary"
    assert activity.classify_level(c1) == "moderate"
    assert activity.classify_level(c2) == "vigorous"
    assert activity.classify_level(c2 - 1e-9) == "moderate"
    assert activity.classify_level(c3) == "very_vigorous"


@given(st.floats(0, 1e5), st.floats(0, 1e5))
def test_level_monotone(a, b):
    lo, hi = min(a, b), max(a, b)
    la, lb = activity.classify_level(lo), activity.classify_level(hi)
    assert LEVELS.index(la) <= LEVELS.index(lb)


def test_level_grid_is_step_function():
    grid = np.arange(0, 6000, 0.5)
    idx = [LEVELS.index(v) for v in activity.classify_level(grid)]
    assert np.all(np.diff(idx) >= 0)
    assert sorted(set(idx)) == [0, 1, 2, 3]


def test_negative_counts_invalid():
    with pytest.raises(ValueError):
        activity.classify_level(-1.0)


# ----------------------------------------------------------------------------
# steps


def test_still_signal_no_steps():
    assert len(activity.detect_steps(np.tile([0, 0, 9.81], (2000, 1)), RATE, "smartphone")) == 0


def test_two_hz_gait_ten_seconds():
    xyz = _sine(2.0, amp=3.0, axis=2, n=200)
    assert abs(len(activity.detect_steps(xyz, RATE, "smartphone")) - 20) <= 1


@pytest.mark.parametrize("profile", ["smartphone", "smartwatch"])
def test_generated_gait_step_count(profile):
    rng = np.random.default_rng(5)
    t = np.arange(int(60 * RATE)) / RATE
    xyz = signals.gait(t, rng, cadence=1.8, amplitude=2.5)
    truth = signals.gait_steps(60, 1.8)
    assert abs(len(activity.detect_steps(xyz, RATE, profile)) - truth) <= 2


def test_shake_is_not_walking():
    rng = np.random.default_rng(11)
    t = np.arange(int(120 * RATE)) / RATE
    assert len(activity.detect_steps(signals.shake(t, rng), RATE, "smartphone")) == 0


@given(st.integers(0, 50), st.floats(1.5, 2.5), st.floats(1.0, 5.0))
def test_steps_invariant_to_sign_flip(seed, cadence, amp):
    t = np.arange(int(30 * RATE)) / RATE
    xyz = signals.gait(t, np.random.default_rng(seed), cadence=cadence, amplitude=amp)
    a = activity.detect_steps(xyz, RATE, "smartphone")
    b = activity.detect_steps(-xyz, RATE, "smartphone")
    assert np.array_equal(a, b)


def test_count_steps_stitches_frames_and_labels_algorithm():
    rng = np.random.default_rng(2)
    t = np.arange(3 * N) / RATE
    xyz = signals.gait(t, rng, cadence=2.0, amplitude=3.0)
    f = _frames(*xyz.reshape(3, N, 3))
    df = activity.count_steps(f, "smartwatch")
    assert set(df["algorithm"]) == {"watch_profile"}
    assert (df["steps"] >= 0).all()
    assert abs(df["steps"].sum() - 360) <= 2


def test_unknown_profile():
    with pytest.raises(ValueError):
        activity.detect_steps(np.zeros((100, 3)), RATE, "pocketwatch")


# ----------------------------------------------------------------------------
# type features and classifier


def test_constant_frame_features():
    f = activity.extract_type_features(np.tile([1.0, 2.0, 3.0], (N, 1)))
    names = activity.TYPE_FEATURE_NAMES
    feat = dict(zip(names, f))
    for a in "xyz":
        assert feat[f"{a}_std"] == 0.0
    for c in ("corr_xy", "corr_xz", "corr_yz"):
        assert feat[c] == 0.0


def test_axis_swap_swaps_features():
    rng = np.random.default_rng(0)
    frame = rng.normal(size=(N, 3)) * [1.0, 2.0, 3.0]
    f = dict(zip(activity.TYPE_FEATURE_NAMES, activity.extract_type_features(frame)))
    g = dict(zip(activity.TYPE_FEATURE_NAMES, activity.extract_type_features(frame[:, [1, 0, 2]])))
    for s in ("mean", "std", "median", "energy"):
        assert f[f"x_{s}"] == pytest.approx(g[f"y_{s}"])
        assert f[f"y_{s}"] == pytest.approx(g[f"x_{s}"])


@given(arrays(np.float64, st.tuples(st.integers(40, 1500), st.just(3)), elements=st.floats(-30, 30)))
def test_feature_dimension_constant(frame):
    assert activity.extract_type_features(frame).shape == (activity.TYPE_FEATURE_DIM,)


def test_nan_rejected():
    frame = np.zeros((N, 3))
    frame[5, 1] = np.nan
    with pytest.raises(ValueError):
        activity.extract_type_features(frame)


def test_toy_model_memorizes_training_set(type_model):
    model, X, y = type_model
    assert len(y) == 60
    assert np.mean(np.asarray(model.predict(X)) == np.asarray(y)) >= 0.95
    assert model.classes == list(ACTIVITY_TYPES)


def test_scores_normalized_and_argmax(type_model):
    model, X, _ = type_model
    for x in X[:12]:
        label, scores = activity.classify_type(x, model)
        assert scores.sum() == pytest.approx(1.0, abs=1e-9)
        assert label == model.classes[int(np.argmax(scores))]


@given(st.floats(1e-3, 1e3))
def test_argmax_invariant_to_positive_rescaling(c):
    rng = np.random.default_rng(1)
    s = rng.random(6)
    rescaled = c * s
    assert np.argmax(rescaled / rescaled.sum()) == np.argmax(s / s.sum())


def test_dimension_mismatch(type_model):
    model, _, _ = type_model
    with pytest.raises(ModelError):
        activity.classify_type(np.zeros(5), model)


def test_model_file_round_trip_and_spec_check(tmp_path, type_model):
    model, X, _ = type_model
    path = tmp_path / "type.json"
    save_model(model, path, cut_points=(100, 1800, 4000))
    loaded = load_model(path, activity.type_feature_spec())
    assert loaded.predict(X) == model.predict(X)
    with pytest.raises(ModelError):
        load_model(path, "0" * 16)
