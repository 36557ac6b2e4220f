from __future__ import annotations

import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from macroctx.errors import ChecksumError, ValidationError
from macroctx.retrieval import (DIAGNOSTICS_HEADER, CausalIndex, RetrievalDiagnostics, build_index,
                                contextual_memory, diagnostics, memory_or_fallback, search_causal,
                                write_diagnostics_csv)
from oracles import brute_force_topk

D = dt.date


def corpus(rng, n, d, p, alpha=0.5, start=D(2020, 1, 1)):
    dates = [start + dt.timedelta(days=i) for i in range(n)]
    T = rng.normal(size=(n, d))
    T /= np.linalg.norm(T, axis=1, keepdims=True)
    return build_index(dates, T, rng.normal(size=(n, p)), alpha)


def test_build_sorts_and_rejects_duplicates():
    T = np.eye(3)
    Z = np.zeros((3, 1))
    idx = build_index([D(2020, 1, 3), D(2020, 1, 1), D(2020, 1, 2)], T, Z, 0.5)
    assert idx.dates == (D(2020, 1, 1), D(2020, 1, 2), D(2020, 1, 3))
    assert np.array_equal(idx.text[0], T[1])
    with pytest.raises(ValidationError, match="duplicate"):
        build_index([D(2020, 1, 1)] * 2, T[:2], Z[:2], 0.5)


def test_self_similarity_rank_one():
    idx = corpus(np.random.default_rng(1), 50, 6, 2)
    hits = search_causal(idx, idx.fused[20], D(2030, 1, 1), 3)
    assert hits[0].date == idx.dates[20] and abs(hits[0].sim_joint - 1.0) < 1e-9


def test_query_before_all_entries_is_empty_with_flag():
    idx = corpus(np.random.default_rng(1), 10, 4, 2)
    assert search_causal(idx, idx.fused[0], D(2019, 1, 1), 5) == []
    mem, nbrs = memory_or_fallback(idx, idx.fused[0], D(2019, 1, 1), 5)
    assert mem.no_history and mem.k_used == 0 and not mem.vector.any() and nbrs == []


def test_random_corpus_matches_brute_force():
    rng = np.random.default_rng(2)
    idx = corpus(rng, 200, 12, 4)
    for _ in range(20):
        q = rng.normal(size=16)
        q /= np.linalg.norm(q)
        qd = idx.dates[int(rng.integers(0, 200))]
        got = [(n.date, n.sim_joint) for n in search_causal(idx, q, qd, 7)]
        want = brute_force_topk(idx.dates, idx.fused, q, qd, 7)
        assert [g[0] for g in got] == [w[0] for w in want]
        assert np.allclose([g[1] for g in got], [w[1] for w in want], atol=1e-12, rtol=0)


def test_cutoff_masks_later_entries():
    idx = corpus(np.random.default_rng(3), 40, 4, 2)
    cutoff = idx.dates[10]
    for n in search_causal(idx, idx.fused[30], idx.dates[35], 40, cutoff=cutoff):
        assert n.date < cutoff
    assert len(search_causal(idx, idx.fused[30], idx.dates[35], 40, cutoff=cutoff)) == 10


def test_ties_prefer_earlier_entries():
    T = np.array([[1.0, 0.0]] * 4)
    idx = build_index([D(2020, 1, i) for i in (1, 2, 3, 4)], T, np.zeros((4, 1)), 0.5)
    assert [n.date.day for n in search_causal(idx, idx.fused[0], D(2021, 1, 1), 3)] == [1, 2, 3]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 60), st.integers(1, 60))
def test_mask_monotonicity(seed, a, b):
    rng = np.random.default_rng(seed)
    idx = corpus(rng, 60, 4, 2)
    q = idx.fused[int(rng.integers(0, 60))]
    early, late = sorted((idx.dates[a - 1], idx.dates[b - 1]))
    small = {n.date for n in search_causal(idx, q, early, 5)}
    assert all(d < early for d in small)
    assert small <= {d for d in idx.dates if d < late}


def test_contextual_memory_examples():
    T = np.array([[1.0, 0.0], [0.0, 1.0], [0.6, 0.8]])
    idx = build_index([D(2020, 1, 1), D(2020, 1, 2), D(2020, 1, 3)], T, np.zeros((3, 1)), 0.0)
    nb = search_causal(idx, idx.fused[0], D(2020, 1, 4), 3)
    one = [n for n in nb if n.date == D(2020, 1, 3)]
    assert np.array_equal(contextual_memory(idx, one).vector, T[2])
    two = [n for n in nb if n.date != D(2020, 1, 3)]
    assert contextual_memory(idx, two).vector.tolist() == [0.5, 0.5]
    with pytest.raises(ValidationError):
        contextual_memory(idx, [])


def test_identical_neighbors_mean_is_that_vector():
    v = np.array([0.2, 0.3, 0.5])
    idx = build_index([D(2020, 1, i) for i in range(1, 6)], np.tile(v, (5, 1)), np.zeros((5, 1)), 0.5)
    nb = search_causal(idx, idx.fused[0], D(2021, 1, 1), 5)
    assert np.array_equal(contextual_memory(idx, nb).vector, np.mean(np.tile(v, (5, 1)), axis=0))


def test_diagnostics_self_and_alpha_zero():
    rng = np.random.default_rng(5)
    idx = corpus(rng, 30, 5, 3, alpha=0.0)
    q = idx.query_for(D(2030, 1, 1), idx.text[4], idx.macro[4])
    rows = diagnostics(idx, q, search_causal(idx, q.fused, q.date, 5))
    assert rows[0].neighbor_date == idx.dates[4]
    assert abs(rows[0].sim_text - 1.0) < 1e-12 and rows[0].macro_L2 == 0.0
    for r in rows:
        assert abs(r.sim_joint - r.sim_text) < 1e-9


def test_table_row_shape(tmp_path):
    row = RetrievalDiagnostics(D(2024, 1, 18), D(2020, 1, 31), 0.9657, 0.9657, 0.4850, 1)
    path = tmp_path / "diag.csv"
    write_diagnostics_csv(path, [row], comment="config_sha256=abc")
    lines = path.read_text().splitlines()
    assert lines[0] == "# config_sha256=abc"
    assert lines[1] == "query_date,neighbor_date,rank,sim_joint,sim_text,macro_L2" == ",".join(DIAGNOSTICS_HEADER)
    assert lines[2] == "2024-01-18,2020-01-31,1,0.9657,0.9657,0.4850"


def test_persist_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    idx = corpus(rng, 80, 6, 3)
    path = tmp_path / "x.index"
    idx.save(path)
    back = CausalIndex.load(path)
    assert back.dates == idx.dates and back.alpha == idx.alpha
    for _ in range(25):
        q = rng.normal(size=9)
        qd = idx.dates[int(rng.integers(0, 80))]
        a = [(n.date, n.sim_joint) for n in search_causal(idx, q, qd, 5)]
        b = [(n.date, n.sim_joint) for n in search_causal(back, q, qd, 5)]
        assert a == b
    raw = bytearray(path.read_bytes())
    raw[-3] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(ChecksumError):
        CausalIndex.load(path)


def test_query_dimension_checked():
    idx = corpus(np.random.default_rng(7), 5, 3, 2)
    with pytest.raises(ValidationError):
        search_causal(idx, np.ones(4), D(2030, 1, 1), 1)
    with pytest.raises(ValidationError):
        search_causal(idx, np.ones(5), D(2030, 1, 1), 0)
    with pytest.raises(ValidationError):
        idx.query_for(D(2030, 1, 1), np.ones(2), np.ones(2))
