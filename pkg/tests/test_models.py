import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from catchsim.baseline_predictor import PredictionSource
from catchsim.models import (InterceptorRegressor, LocalizerRegressor, Split, augment_trajectories,
                             build_interceptor, gen_localizer_data, gen_trajectory_data, load_localizer_dataset,
                             load_trajectory_dataset, nn_predict_interception, pack_features,
                             save_localizer_dataset, save_trajectory_dataset, snapshot_windows, train,
                             unpack_features)
from catchsim.nn import DivergenceError, load_weights
from catchsim.scenario import NoiseProfile

FAST = NoiseProfile.named("realistic")


def _rows(n, seed):
    rng = np.random.default_rng(seed)
    t = np.cumsum(rng.uniform(0.01, 0.1, n))
    return np.column_stack([t, rng.normal(size=(n, 3)) + 3.0, rng.integers(0, 2, n)])


@given(st.integers(1, 25), st.integers(0, 2**31))
def test_pack_unpack_lossless(n, seed):
    arr = _rows(n, seed)
    m = pack_features(arr)
    assert m.shape == (10, 5)
    back = unpack_features(m, t_first=arr[0, 0]).to_array()
    tail = arr[-10:]
    assert back.shape == tail.shape
    assert np.allclose(back, tail, atol=1e-5)
    assert np.all(m[:10 - len(tail)] == 0)


@given(st.integers(0, 20), st.integers(0, 2**31))
def test_snapshots_match_prefix_packing(n, seed):
    arr = _rows(n, seed) if n else np.zeros((0, 5))
    w = snapshot_windows(arr)
    assert len(w) == max(0, n - 2)
    for j, k in enumerate(range(3, n + 1)):
        assert np.array_equal(w[j], pack_features(arr[:k], t_first=arr[0, 0]))


def test_pack_rejects_empty():
    with pytest.raises(ValueError):
        pack_features(np.zeros((0, 5)))


@pytest.fixture(scope="module")
def small_traj():
    return gen_trajectory_data(24, FAST, seed=3)


def test_trajectory_data_labels_and_determinism(small_traj):
    again = gen_trajectory_data(24, FAST, seed=3, n_jobs=2)
    for a, b in zip(small_traj.samples, again.samples):
        assert np.array_equal(a.detections, b.detections)
        assert np.array_equal(a.label, b.label)
    for s in small_traj.samples:
        assert len(s.detections) >= 3
        assert np.all(np.diff(s.detections[:, 0]) >= 0)
        assert s.detections[-1, 0] < s.t_cross
    other = gen_trajectory_data(5, FAST, seed=3, split="test")
    assert not np.array_equal(other.samples[0].detections, small_traj.samples[0].detections)


def test_baseline_labels(small_traj):
    ds = gen_trajectory_data(4, FAST, seed=3, label_source="baseline")
    assert ds.meta["label_source"] == "baseline"
    assert all(np.all(np.isfinite(s.label)) for s in ds.samples)


def test_augmentation_shifts_label_with_detections(small_traj):
    aug = augment_trajectories(small_traj, factor=5, shift_range=0.4, seed=1)
    assert len(aug) == 5 * len(small_traj)
    for i, orig in enumerate(small_traj.samples):
        for copy in aug.samples[5 * i + 1:5 * i + 5]:
            d = copy.detections[:, 1:3] - orig.detections[:, 1:3]
            assert np.allclose(d, d[0]) and np.all(np.abs(d[0]) <= 0.4)
            assert np.allclose(copy.label - orig.label, d[0])
            assert np.array_equal(copy.detections[:, [0, 3, 4]], orig.detections[:, [0, 3, 4]])
    with pytest.raises(ValueError):
        augment_trajectories(small_traj, factor=0)


def test_trajectory_dataset_round_trip(tmp_path, small_traj):
    save_trajectory_dataset(tmp_path / "d", {Split.TRAIN: small_traj})
    manifest = (tmp_path / "d" / "manifest.json").read_bytes()
    back = load_trajectory_dataset(tmp_path / "d")[Split.TRAIN]
    assert len(back) == len(small_traj)
    for a, b in zip(small_traj.samples, back.samples):
        assert np.allclose(a.detections, b.detections, rtol=1e-8, atol=1e-12)
        assert np.array_equal(a.label, b.label)
    save_trajectory_dataset(tmp_path / "e", {Split.TRAIN: back})
    assert (tmp_path / "e" / "manifest.json").read_bytes() == manifest
    first = (tmp_path / "d" / "train" / "traj_00000.csv").read_text()
    assert first.startswith("t,x,y,z,source\n")


def test_full_only_snapshots(small_traj):
    X, y = small_traj.snapshots(full_only=True)
    assert np.all(X[:, 0].any(axis=1))
    Xa, _ = small_traj.snapshots()
    assert len(Xa) > len(X)


def test_localizer_data_and_round_trip(tmp_path):
    ds = gen_localizer_data(14, seed=2, split="val", frames_per_throw=4)
    assert ds.frames.shape == (14, 4, 60, 80) and ds.frames.dtype == np.float32
    assert ds.labels.shape == (14, 3)
    again = gen_localizer_data(14, seed=2, split="val", frames_per_throw=4, n_jobs=2)
    assert np.array_equal(ds.frames, again.frames)
    fixed = gen_localizer_data(6, seed=2, blur_range=(7, 7), blur_prob=1.0, clean_prob=0.0)
    assert np.all(fixed.blur == 7)
    save_localizer_dataset(tmp_path, {Split.VAL: ds})
    back = load_localizer_dataset(tmp_path)[Split.VAL]
    assert np.array_equal(back.frames, ds.frames)
    assert np.allclose(back.labels, ds.labels, rtol=1e-8)
    assert np.array_equal(back.blur, ds.blur)


def test_training_loss_decreases_over_ten_epochs(small_traj):
    X, y = augment_trajectories(small_traj, 2, seed=0).snapshots()
    est = InterceptorRegressor(epochs=11, lr=1e-4, random_state=0).fit(X, y)
    assert len(est.loss_curve_) == 11
    assert est.loss_curve_[10] < est.loss_curve_[0]


def test_train_input_errors():
    net = build_interceptor()
    with pytest.raises(ValueError):
        train(net, np.zeros((0, 10, 5)), np.zeros((0, 2)))
    with pytest.raises(ValueError):
        train(net, np.zeros((3, 10, 5)), np.zeros((2, 2)))
    with pytest.raises(DivergenceError, match="epoch 0"):
        train(net, np.full((4, 10, 5), np.nan, np.float32), np.zeros((4, 2)), epochs=1)


@pytest.fixture(scope="module")
def fitted(small_traj):
    X, y = small_traj.snapshots()
    Xv, yv = gen_trajectory_data(4, FAST, seed=3, split="val").snapshots()
    est = InterceptorRegressor(epochs=3, lr=1e-3).fit(X, y, Xv, yv)
    return est, X, y


def test_estimator_api(fitted):
    est, X, y = fitted
    assert clone(est).get_params() == est.get_params()
    assert est.n_features_in_ == 50
    assert len(est.val_loss_curve_) == 3
    assert est.predict(X).shape == (len(X), 2)
    assert est.predict(X[0]).shape == (1, 2)
    assert np.isfinite(est.score(X, y))
    with pytest.raises(ValueError):
        est.predict(np.zeros((2, 9, 5)))


def test_unfitted_raises():
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        InterceptorRegressor().predict(np.zeros((1, 10, 5)))


def test_export_folds_scaling(tmp_path, fitted):
    est, X, _ = fitted
    raw = est.export_network()
    assert np.allclose(raw.forward(X[:50]), est.predict(X[:50]), atol=1e-4)
    est.save(tmp_path / "i.pgnn")
    loaded = InterceptorRegressor.load(tmp_path / "i.pgnn")
    assert np.allclose(loaded.predict(X[:50]), est.predict(X[:50]), atol=1e-4)
    net = load_weights(tmp_path / "i.pgnn")
    assert len(net.layers) == len(raw.layers)


def test_nn_inference(fitted, small_traj):
    est, _, _ = fitted
    arr = small_traj.samples[0].detections
    a = nn_predict_interception(est, arr[:5])
    b = nn_predict_interception(est.export_network(), arr[:5])
    assert a.source == PredictionSource.NETWORK
    assert a.x == pytest.approx(b.x, abs=1e-4) and a.y == pytest.approx(b.y, abs=1e-4)
    assert a.t_cross is not None
    assert nn_predict_interception(est, arr[:2]).t_cross is None
    with pytest.raises(ValueError):
        nn_predict_interception(est, np.zeros((0, 5)))


def test_localizer_estimator_small():
    ds = gen_localizer_data(8, seed=1)
    est = LocalizerRegressor(channels=(2, 2, 2, 2), dense=4, epochs=1, batch_size=4).fit(ds.frames, ds.labels)
    assert est.predict(ds.frames).shape == (8, 3)
    raw = est.export_network()
    assert np.allclose(raw.forward(ds.frames), est.predict(ds.frames), atol=1e-3)
