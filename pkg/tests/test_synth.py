from __future__ import annotations

import numpy as np
import pytest

from macroctx.errors import ValidationError
from macroctx.features import feature_names
from macroctx.pipeline import Dataset
from macroctx.synth import (MIN_OOD_DAYS, RegimeSpec, default_regimes, default_schedule, generate,
                            nearest_centroid_accuracy, neighbor_vote_accuracy, regime_shift_experiment)


def test_empty_dataset():
    ds = generate(schedule=[(0, 0)], n_days=0)
    assert len(ds) == 0 and ds.records == []


def test_same_seed_byte_identical(tmp_path):
    a, b = generate(n_days=120, schedule=default_schedule(120, 30, 30), seed=3), \
        generate(n_days=120, schedule=default_schedule(120, 30, 30), seed=3)
    a.write(tmp_path / "a")
    b.write(tmp_path / "b")
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()
    c = generate(n_days=120, schedule=default_schedule(120, 30, 30), seed=4)
    assert not np.array_equal(a.records[0].z_vec, c.records[0].z_vec)


def test_macro_means_within_lln_bound(synth_default):
    Z = np.stack([r.z_vec for r in synth_default.records])
    for spec in synth_default.specs:
        rows = Z[synth_default.regimes == spec.regime_id]
        bound = 3 * spec.macro_noise_std / np.sqrt(len(rows))
        assert np.all(np.abs(rows.mean(axis=0) - spec.macro_mean) <= bound)


def test_identifiability(synth_default):
    assert nearest_centroid_accuracy(synth_default) >= 0.99


def test_text_confound_is_real(synth_default):
    """The same text cluster means opposite things in the two training regimes."""
    r0, r1 = default_regimes()[:2]
    assert r0.label_rule[1] == 0.8 and r1.label_rule[1] == 0.2
    shift = default_regimes()[2]
    for s in (1, -1):
        c = shift.text_centers[s]
        assert c @ r0.text_centers[s] == pytest.approx(c @ r1.text_centers[s])


def test_confound_votes_on_default_seed(synth_default):
    tr, oo = synth_default.split()
    x, z = feature_names(synth_default.feature_spec), [s.series_id for s in synth_default.macro]
    train, ood = Dataset.from_records(tr, x, z), Dataset.from_records(oo, x, z)
    assert neighbor_vote_accuracy(train, ood, 0.0) <= 0.55
    assert neighbor_vote_accuracy(train, ood, 0.5) >= 0.70


def test_invalid_inputs():
    specs = default_regimes()
    with pytest.raises(ValidationError):
        generate(specs[:1], [(0, 10)], n_days=10)
    with pytest.raises(ValidationError):
        generate(specs, [(0, 5)], n_days=10)
    with pytest.raises(ValidationError):
        generate(specs, [(9, 10)], n_days=10)
    close = RegimeSpec(5, specs[0].macro_mean + 0.1, 0.2, specs[0].text_centers, 0.15, specs[0].label_rule)
    with pytest.raises(ValidationError, match="separable"):
        generate([specs[0], close], [(0, 10)], n_days=10)
    with pytest.raises(ValidationError):
        RegimeSpec(0, specs[0].macro_mean, 0.0, specs[0].text_centers, 0.1, specs[0].label_rule)


def test_short_shift_segment_rejected():
    ds = generate(schedule=default_schedule(100, MIN_OOD_DAYS - 1, 20), n_days=100, seed=1)
    with pytest.raises(ValidationError, match="held-out"):
        regime_shift_experiment(ds)


def test_schedule_recorded(synth_default):
    regimes = [g for g, _, _ in synth_default.schedule]
    assert regimes[-1] == 2 and set(regimes[:-1]) == {0, 1}
    start, end = synth_default.schedule[-1][1:]
    assert (synth_default.regimes[[start <= r.date <= end for r in synth_default.records]] == 2).all()
