from __future__ import annotations

import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from macroctx.calendar_io import ScalerParams
from macroctx.errors import ChecksumError, MissingInputError, ValidationError
from macroctx.features import FeatureSpec
from macroctx.model import (ModelParams, TrainConfig, freeze, load_bundle, loss_and_grad, predict_position,
                            predict_proba, time_series_split, train_logistic)
from macroctx.retrieval import build_index
from oracles import log_loss


def params(W, b=0.0):
    W = np.asarray(W, dtype=float)
    return ModelParams(W, b, ScalerParams.identity(len(W)), (("x_num", len(W)),))


def test_split_examples():
    folds = time_series_split(12, 5)
    assert (folds[0].train, folds[0].test) == (range(0, 2), range(2, 4))
    assert (folds[-1].train, folds[-1].test) == (range(0, 10), range(10, 12))
    six = time_series_split(6, 5)
    assert [len(f.test) for f in six] == [1] * 5 and six[0].train == range(0, 1)
    with pytest.raises(ValidationError):
        time_series_split(5, 5)


@given(st.integers(6, 500), st.integers(2, 10))
def test_split_causality(n, k):
    if n < k + 1:
        return
    folds = time_series_split(n, k)
    size = n // (k + 1)
    for f in folds:
        assert max(f.train) < min(f.test) and len(f.test) == size
    assert folds[-1].test.stop == n


def test_loss_matches_oracle():
    rng = np.random.default_rng(0)
    X, y = rng.normal(size=(20, 3)), rng.integers(0, 2, 20)
    W, b = rng.normal(size=3), 0.3
    loss, _, _ = loss_and_grad(W, b, X, y.astype(float), 0.01)
    assert loss == pytest.approx(log_loss(W, b, X, y, 0.01), abs=1e-12)


def test_separable_toy_reaches_full_accuracy():
    X = np.array([[2.0, 1.0], [1.5, 2.0], [3.0, 0.5], [-2.0, -1.0], [-1.0, -2.5], [-3.0, 0.2]])
    y = np.array([1, 1, 1, 0, 0, 0])
    p = train_logistic(X, y, TrainConfig(l2_lambda=0.0, max_epochs=2000))
    assert ((predict_proba(p, X) >= 0.5).astype(int) == y).all()


def test_heavy_regularization_shrinks_to_base_rate():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(40, 3))
    y = (rng.random(40) < 0.3).astype(int)
    y[:2] = [0, 1]
    p = train_logistic(X, y, TrainConfig(learning_rate=1e-7, l2_lambda=1e6, max_epochs=20000, tolerance=1e-12))
    assert np.linalg.norm(p.W) < 1e-6
    base = 1 / (1 + math.exp(-p.b))
    assert np.allclose(predict_proba(p, X), base, atol=1e-6)


def test_loss_monotone_with_small_lr():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(50, 4))
    y = (X[:, 0] + 0.5 * rng.normal(size=50) > 0).astype(int)
    log = []
    train_logistic(X, y, TrainConfig(learning_rate=1e-3, max_epochs=500), log=log)
    losses = [entry[1] for entry in log]
    assert all(b <= a + 1e-15 for a, b in zip(losses, losses[1:]))


def test_training_errors():
    with pytest.raises(ValidationError, match="single class"):
        train_logistic(np.ones((3, 1)), [1, 1, 1])
    with pytest.raises(ValidationError):
        train_logistic(np.ones((3, 1)), [0, 1, 2])
    with pytest.raises(ValidationError, match="epoch"):
        train_logistic(np.array([[1e308], [-1e308]]), [0, 1], TrainConfig(learning_rate=1e10))


def test_predict_proba_examples():
    assert predict_proba(params([0.0, 0.0]), [3.0, -2.0]) == 0.5
    p = predict_proba(params([1.0, 0.0]), [math.log(9.0), 5.0])
    assert p == pytest.approx(0.9, abs=1e-12)
    x = np.array([0.4, -1.2])
    q = predict_proba(params([0.7, 0.2], 0.1), x)
    assert predict_proba(params([-0.7, -0.2], -0.1), x) == pytest.approx(1 - q, abs=1e-12)


def test_predict_proba_by_segments():
    p = ModelParams(np.array([1.0, 2.0, 3.0]), 0.0, ScalerParams.identity(3), (("x_num", 1), ("r", 2)))
    assert predict_proba(p, [0.1], [0.2, 0.3]) == predict_proba(p, [0.1, 0.2, 0.3])
    with pytest.raises(ValidationError):
        predict_proba(p, [0.1, 0.2], [0.3])


def test_positions():
    assert predict_position(0.7) == 1 and predict_position(0.3) == -1 and predict_position(0.5) == 1
    assert predict_position(np.array([0.2, 0.5, 0.9])).tolist() == [-1, 1, 1]


@given(st.floats(0, 1), st.floats(0, 1))
def test_position_monotone(a, b):
    hi, lo = max(a, b), min(a, b)
    assert predict_position(hi) >= predict_position(lo)


def _bundle(tmp_path, with_index=True):
    rng = np.random.default_rng(4)
    dates = [dt.date(2020, 1, 1) + dt.timedelta(days=i) for i in range(20)]
    T = rng.normal(size=(20, 4))
    T /= np.linalg.norm(T, axis=1, keepdims=True)
    index = build_index(dates, T, rng.normal(size=(20, 2)), 0.5) if with_index else None
    W = rng.normal(size=6)
    scaler = ScalerParams(rng.normal(size=6), rng.random(6) + 0.5, np.zeros(6, dtype=bool))
    p = ModelParams(W, 0.2, scaler, (("x_num", 2), ("r", 4)), 100)
    path = freeze(tmp_path / "bundle.json", p, index, ScalerParams.identity(2), FeatureSpec(),
                  preset="macro_retrieval", alpha=0.5, k=5, train_start="2020-01-01", train_end="2020-01-20",
                  config_hash="h" * 64)
    return path, p


def test_freeze_round_trip(tmp_path):
    path, p = _bundle(tmp_path)
    b = load_bundle(path)
    X = np.random.default_rng(9).normal(size=(10, 6))
    assert np.array_equal(predict_proba(b.params, X), predict_proba(p, X))
    assert b.alpha == 0.5 and b.k == 5 and b.index is not None and len(b.index) == 20
    assert (tmp_path / "bundle.index").exists()


def test_tampered_bundle_rejected(tmp_path):
    path, _ = _bundle(tmp_path)
    raw = path.read_text()
    path.write_text(raw.replace('"b":0.2', '"b":0.3'))
    with pytest.raises(ChecksumError):
        load_bundle(path)


def test_tampered_or_missing_index_rejected(tmp_path):
    path, _ = _bundle(tmp_path)
    idx = tmp_path / "bundle.index"
    raw = bytearray(idx.read_bytes())
    raw[-1] ^= 1
    idx.write_bytes(bytes(raw))
    with pytest.raises(ChecksumError):
        load_bundle(path)
    idx.unlink()
    with pytest.raises(MissingInputError):
        load_bundle(path)


def test_bundle_without_index(tmp_path):
    path, _ = _bundle(tmp_path, with_index=False)
    assert load_bundle(path).index is None
