import math
import tracemalloc

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from rembo.box import Box
from rembo.embedding import (LAZY_THRESHOLD, CategoricalTable, EmbeddingError, decode_categorical,
                             decode_values, draw_embedding, embedding_from_matrix, map_to_x,
                             subspace_distance_check)


def test_entries_are_standard_normal():
    pooled = np.concatenate([draw_embedding(4, 2, seed=s).matrix().ravel() for s in range(1250)])
    assert len(pooled) == 10_000
    assert stats.kstest(pooled, "norm").pvalue > 0.01


def test_y_box():
    emb = draw_embedding(10, 2, seed=0)
    assert np.allclose(emb.y_box.lower, -math.sqrt(2)) and np.allclose(emb.y_box.upper, math.sqrt(2))
    assert emb.y_box.upper[0] == pytest.approx(1.41421, abs=1e-5)


def test_validation():
    with pytest.raises(EmbeddingError):
        draw_embedding(2, 3, seed=0)
    with pytest.raises(EmbeddingError):
        draw_embedding(3, 1, seed=0, x_box=Box.cube(2))
    with pytest.raises(EmbeddingError):
        draw_embedding(3, 1, seed=0, decode=CategoricalTable((2, 2)))
    with pytest.raises(ValueError):
        CategoricalTable((2, 0))


def test_billion_dimensions_lazy_and_deterministic():
    tracemalloc.start()
    a = draw_embedding(10 ** 9, 2, seed=5)
    b = draw_embedding(10 ** 9, 2, seed=5)
    r1, r2 = a.row(714285714), b.row(714285714)
    peak = tracemalloc.get_traced_memory()[1]
    tracemalloc.stop()
    assert a.storage == "lazy" and peak < 10 ** 6
    assert np.array_equal(r1, r2)
    assert a.rows_generated == 1
    with pytest.raises(EmbeddingError):
        a.matrix()


def test_dense_caches_the_lazy_generator():
    dense = draw_embedding(50, 3, seed=9)
    lazy = draw_embedding(50, 3, seed=9, lazy=True)
    assert dense.storage == "dense" and lazy.storage == "lazy"
    assert np.array_equal(dense.matrix(), lazy.matrix())
    assert draw_embedding(LAZY_THRESHOLD + 1, 1, seed=0).storage == "lazy"


def test_rows_differ_across_index_and_seed():
    emb = draw_embedding(10 ** 6, 4, seed=1)
    assert not np.array_equal(emb.row(0), emb.row(1))
    assert not np.array_equal(emb.row(0), draw_embedding(10 ** 6, 4, seed=2).row(0))


def test_map_examples():
    emb = draw_embedding(8, 2, seed=0)
    assert np.array_equal(map_to_x(emb, np.zeros(2)), np.zeros(8))
    emb = embedding_from_matrix([[3.0], [0.5]])
    assert map_to_x(emb, [1.0]).tolist() == [1.0, 0.5]
    with pytest.raises(ValueError):
        map_to_x(emb, [1.0, 2.0])
    with pytest.raises(ValueError):
        map_to_x(emb, [np.inf])


def test_map_respects_custom_box():
    emb = embedding_from_matrix([[3.0], [0.5]], x_box=Box([0.0, -0.2], [2.0, 0.2]))
    assert map_to_x(emb, [1.0]).tolist() == [2.0, 0.2]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(0, 99), st.lists(st.floats(-3, 3), min_size=2, max_size=2))
def test_sparse_matches_full(seed, i, y):
    emb = draw_embedding(100, 2, seed=seed)
    full = map_to_x(emb, y)
    assert map_to_x(emb, y, [i])[0] == full[i]


@given(st.lists(st.floats(-50, 50), min_size=3, max_size=3))
def test_projection_idempotent_and_inside(y):
    emb = draw_embedding(12, 3, seed=4)
    x = map_to_x(emb, y)
    assert np.all(np.abs(x) <= 1.0)
    assert np.array_equal(np.clip(x, -1, 1), x)


def test_batch_map():
    emb = draw_embedding(9, 2, seed=1)
    Y = np.random.default_rng(0).normal(size=(5, 2))
    X = map_to_x(emb, Y)
    assert X.shape == (5, 9)
    assert np.array_equal(X[3], map_to_x(emb, Y[3]))


def test_decode_examples():
    assert decode_values([3], [-1.0]).tolist() == [0]
    assert decode_values([3], [1.0]).tolist() == [2]
    assert decode_values([2], [0.0]).tolist() == [1]
    emb = draw_embedding(3, 1, seed=0)
    with pytest.raises(EmbeddingError):
        decode_categorical(emb, np.zeros(3))


@given(st.lists(st.floats(-1e6, 1e6), min_size=4, max_size=4),
       st.lists(st.integers(1, 9), min_size=4, max_size=4))
def test_decode_total(x, counts):
    cats = decode_values(counts, x)
    assert np.all(cats >= 0) and np.all(cats < np.array(counts))


def test_subspace_check():
    rng = np.random.default_rng(0)
    hits = 0
    for t in range(1000):
        Phi = np.linalg.qr(rng.normal(size=(10, 2)))[0]
        hits += subspace_distance_check(draw_embedding(10, 3, seed=t), Phi)
    assert hits == 1000
    Phi = np.linalg.qr(rng.normal(size=(6, 2)))[0]
    assert not subspace_distance_check(embedding_from_matrix(np.zeros((6, 2))), Phi)
    phi = np.zeros((4, 1))
    phi[0] = 1.0
    assert not subspace_distance_check(embedding_from_matrix([[0.0], [1.0], [0.0], [0.0]]), phi)
