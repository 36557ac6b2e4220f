from __future__ import annotations

import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from macroctx.calendar_io import BusinessCalendar, PriceBar
from macroctx.errors import ValidationError
from macroctx.features import (FeatureSpec, build_numeric_vector, feature_names, forward_return, lagged_return,
                               make_label, realized_vol)

CAL = BusinessCalendar()


def bars_from(closes, opens=None, start=dt.date(2024, 1, 1)):
    days = CAL.business_days(start, start + dt.timedelta(days=3 * len(closes) + 7))[:len(closes)]
    opens = opens or closes
    return [PriceBar(d, o, max(o, c) + 1, min(o, c) - 0.5, c, 1000.0 + i)
            for i, (d, o, c) in enumerate(zip(days, opens, closes))]


def test_lagged_return_cases():
    b = bars_from([100.0, 110.0])
    assert lagged_return(b, b[1].date, 1) == pytest.approx(0.10, abs=1e-15)
    flat = bars_from([50.0] * 4)
    assert lagged_return(flat, flat[3].date, 2) == 0.0
    assert lagged_return(b, b[1].date, 2) is None


def test_realized_vol_cases():
    b = bars_from([100.0, 110.0, 99.0])
    assert realized_vol(b, b[2].date, 2) == pytest.approx(0.10, abs=1e-12)
    flat = bars_from([50.0] * 5)
    assert realized_vol(flat, flat[4].date, 3) == 0.0
    assert realized_vol(b, b[2].date, 1) == 0.0
    assert realized_vol(b, b[1].date, 2) is None


def test_vector_lengths():
    b = bars_from([100.0, 101.0, 102.0])
    minimal = FeatureSpec(return_lags=(), vol_window=None)
    v = build_numeric_vector(b, {}, minimal, b[2].date)
    assert v.tolist() == [b[2].open, b[2].high, b[2].low, b[2].close, b[2].volume]
    spec = FeatureSpec(return_lags=(1,), vol_window=2, sentiment_columns=("s",))
    v = build_numeric_vector(b, {"s": 0.3}, spec, b[2].date)
    assert len(v) == 8 == len(feature_names(spec))
    assert build_numeric_vector(b, {}, spec, b[2].date) is None


def test_identical_inputs_identical_vectors():
    b = bars_from([100.0, 101.0, 102.0, 103.0])
    spec = FeatureSpec(return_lags=(1, 2), vol_window=2)
    v1 = build_numeric_vector(b, {}, spec, b[3].date)
    v2 = build_numeric_vector(list(b), {}, spec, b[3].date)
    assert np.array_equal(v1, v2)


def test_label_rules():
    b = bars_from([100.0, 105.0], opens=[99.0, 101.0])
    assert make_label(b, b[0].date) == 1
    tie = bars_from([100.0, 105.0], opens=[99.0, 100.0])
    assert make_label(tie, tie[0].date) == 0
    assert make_label(b, b[1].date) is None
    assert forward_return(b, b[0].date) == pytest.approx(0.05)


def test_spec_validation():
    with pytest.raises(ValidationError):
        FeatureSpec(return_lags=(0,))
    with pytest.raises(ValidationError):
        FeatureSpec(vol_window=0)
    spec = FeatureSpec(return_lags=(1, 3), vol_window=None, sentiment_columns=("a",))
    assert FeatureSpec.from_dict(spec.to_dict()) == spec


price = st.floats(1.0, 1000.0, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(price, price), min_size=2, max_size=10), st.floats(0.01, 100.0))
def test_label_invariant_under_rescaling(pairs, c):
    opens, closes = [p[0] for p in pairs], [p[1] for p in pairs]
    b = bars_from(closes, opens)
    scaled = bars_from([x * c for x in closes], [x * c for x in opens])
    for i in range(len(b) - 1):
        if b[i + 1].open == b[i].close:
            continue
        assert make_label(b, b[i].date) == make_label(scaled, scaled[i].date)


@settings(max_examples=60, deadline=None)
@given(st.lists(price, min_size=8, max_size=15), st.data())
def test_future_perturbation_does_not_change_features(closes, data):
    spec = FeatureSpec(return_lags=(1, 2), vol_window=3)
    b = bars_from(closes)
    t = data.draw(st.integers(3, len(b) - 2))
    noise = data.draw(st.lists(st.floats(0.5, 2.0), min_size=len(b), max_size=len(b)))
    perturbed = b[:t + 1] + [PriceBar(x.date, x.open * k, x.high * k, x.low * k, x.close * k, x.volume)
                             for x, k in zip(b[t + 1:], noise)]
    assert np.array_equal(build_numeric_vector(b, {}, spec, b[t].date),
                          build_numeric_vector(perturbed, {}, spec, b[t].date))


def test_vector_length_constant_across_records(synth_default):
    lengths = {len(r.x_num) for r in synth_default.records}
    assert lengths == {len(feature_names(synth_default.feature_spec))}
