from __future__ import annotations

import datetime as dt

import numpy as np
import pytest

from macroctx.errors import ProtocolViolation, ValidationError
from macroctx.features import FeatureSpec, feature_names
from macroctx.model import freeze, load_bundle, time_series_split
from macroctx.pipeline import (PRESETS, Dataset, RetrievalLog, Settings, design_matrix, evaluate_frozen,
                               fit_final, get_preset, run_cv)
from macroctx.retrieval import Neighbor


@pytest.fixture(scope="module")
def split(synth_small):
    ds = synth_small
    tr, oo = ds.split()
    x, z = feature_names(ds.feature_spec), [s.series_id for s in ds.macro]
    return Dataset.from_records(tr, x, z), Dataset.from_records(oo, x, z)


FAST = Settings(folds=3)


def test_preset_segments():
    assert PRESETS["numeric_only"].segments == ("x_num",)
    assert PRESETS["multimodal"].segments == ("x_num", "z", "t")
    assert PRESETS["text_retrieval"].alpha == 0.0
    assert Settings().alpha_for(PRESETS["macro_retrieval"]) == 0.5
    assert Settings().alpha_for(PRESETS["numeric_only"]) is None
    with pytest.raises(ValidationError):
        get_preset("bogus")


def test_numeric_only_has_no_retrieval_segment(split):
    train, _ = split
    res = run_cv(train, PRESETS["numeric_only"], FAST)
    assert res.log.entries == []
    assert res.report.info["alpha"] is None and res.report.info["k"] is None
    fitted = fit_final(train, PRESETS["numeric_only"], FAST)
    assert fitted.index is None and [s for s, _ in fitted.params.feature_layout] == ["x_num"]


def test_text_retrieval_uses_alpha_zero(split):
    train, _ = split
    fitted = fit_final(train, PRESETS["text_retrieval"], FAST)
    assert fitted.index.alpha == 0.0 and fitted.alpha == 0.0
    assert np.allclose(fitted.index.fused[:, -len(train.z_names):], 0.0)


def test_cv_retrievals_are_causal_and_cover_every_row(split):
    train, _ = split
    res = run_cv(train, PRESETS["macro_retrieval"], FAST)
    assert res.log.violations() == 0
    assert len(res.log.entries) == len(train) + len(res.test_index)
    # validation rows only see history before their fold's first validation day
    folds = time_series_split(len(train), 3)
    by_day = {}
    for day, nbrs in res.log.entries[len(train):]:
        by_day[day] = nbrs
    for f in folds:
        first = train.dates[f.test.start]
        for i in f.test:
            assert all(d < first for d in by_day[train.dates[i]])


def test_design_matrix_requires_segments(split):
    train, _ = split
    with pytest.raises(ValidationError):
        design_matrix(PRESETS["macro_retrieval"], train.X, train.Z, train.T, None)


def test_frozen_evaluation_is_pure_and_gives_deltas(split, tmp_path):
    train, ood = split
    preset = PRESETS["macro_retrieval"]
    cv = run_cv(train, preset, FAST)
    fitted = fit_final(train, preset, FAST)
    path = freeze(tmp_path / "b.json", fitted.params, fitted.index, fitted.macro_scaler, FeatureSpec(),
                  preset=preset.name, alpha=fitted.alpha, k=fitted.k,
                  train_start=fitted.train_start.isoformat(), train_end=fitted.train_end.isoformat(),
                  config_hash="0" * 64, extra={"cv": {"f1": cv.report.f1, "sharpe": cv.report.sharpe}})
    before = path.read_bytes(), path.with_suffix(".index").read_bytes()
    bundle = load_bundle(path)
    a = evaluate_frozen(bundle, ood, bundle.extra["cv"])
    b = evaluate_frozen(bundle, ood, bundle.extra["cv"])
    assert a.report.to_dict() == b.report.to_dict()
    assert (path.read_bytes(), path.with_suffix(".index").read_bytes()) == before
    assert a.report.deltas.delta_f1 == cv.report.f1 - a.report.f1
    assert np.array_equal(a.probabilities, evaluate_frozen(fitted, ood).probabilities)
    assert a.log.violations() == 0


def test_overlapping_ood_rejected(split):
    train, ood = split
    fitted = fit_final(train, PRESETS["numeric_only"], FAST)
    with pytest.raises(ProtocolViolation):
        evaluate_frozen(fitted, train.take(range(len(train) - 5, len(train))))


def test_retrieval_log_guard():
    log = RetrievalLog()
    with pytest.raises(ProtocolViolation):
        log.add(dt.date(2020, 1, 2), [Neighbor(dt.date(2020, 1, 2), 1.0, 1, 0)])
    log.add(dt.date(2020, 1, 2), [])
    assert log.no_history == 1


def test_dataset_requires_labels(synth_small):
    from dataclasses import replace

    recs = [replace(r, label=None) if i == 3 else r for i, r in enumerate(synth_small.records)]
    with pytest.raises(ValidationError, match="label"):
        Dataset.from_records(recs)
