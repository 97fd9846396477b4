import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rembo.embedding import CategoricalTable, draw_embedding, embedding_from_matrix, map_to_x
from rembo.kernels import (CATEGORICAL, SE, SE_HIGHDIM, SKEW_SE, KernelConfigError, KernelSpec, hamming,
                           k_categorical, k_se, k_se_highdim, k_skew_se)

E1 = math.exp(-1)
finite = st.floats(-5, 5, allow_nan=False)


def vec(n):
    return arrays(np.float64, n, elements=finite)


# -- squared exponential


@pytest.mark.parametrize("ell", [0.1, 1.0, 7.0])
def test_se_equal_points_is_one(ell):
    y = np.array([0.3, -2.0])
    assert k_se(y, y, ell) == 1.0


@pytest.mark.parametrize("ell", [0.2, 1.0, 3.0])
def test_se_distance_ell_sqrt2_gives_inverse_e(ell):
    assert k_se([0.0], [ell * math.sqrt(2)], ell) == pytest.approx(E1, rel=1e-12)


def test_se_unit_vectors():
    assert k_se([1, 0], [0, 1], 1.0) == pytest.approx(0.367879, abs=1e-6)


def test_se_rejects_mismatch_and_bad_ell():
    with pytest.raises(ValueError):
        k_se([1, 2], [1], 1.0)
    with pytest.raises(ValueError):
        k_se([1], [1], 0.0)


@given(vec(3), vec(3), st.floats(0.05, 10))
def test_se_symmetric_and_bounded(a, b, ell):
    k = k_se(a, b, ell)
    assert k == k_se(b, a, ell)
    assert 0 <= k <= 1


@given(vec(2), st.floats(0.1, 5), st.floats(0.1, 5))
def test_se_decreasing_in_distance(a, r1, r2):
    r1, r2 = sorted((r1, r2))
    u = np.array([1.0, 0.0])
    assert k_se(a, a + r1 * u, 1.0) >= k_se(a, a + r2 * u, 1.0)


# -- projected SE


def test_highdim_hand_computed():
    emb = embedding_from_matrix(np.array([[1.0], [1.0]]))
    assert k_se_highdim([0.0], [0.5], emb, 1.0) == pytest.approx(math.exp(-0.25), abs=1e-6)


def test_highdim_same_clamped_corner_is_one():
    emb = embedding_from_matrix(np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]))
    # both images exceed the (1, 1, 1) corner in every coordinate
    assert k_se_highdim([2.0, 3.0], [5.0, 1.5], emb, 0.3) == 1.0


def test_highdim_dimension_check():
    emb = draw_embedding(5, 2, seed=0)
    with pytest.raises(ValueError):
        k_se_highdim([0.0, 1.0, 2.0], [0.0, 1.0, 2.0], emb, 1.0)


@given(vec(2), vec(2))
def test_highdim_is_se_of_images(a, b):
    emb = draw_embedding(6, 2, seed=3)
    expect = k_se(map_to_x(emb, a), map_to_x(emb, b), 0.7)
    assert k_se_highdim(a, b, emb, 0.7) == pytest.approx(expect, abs=1e-14)


# -- Hamming / categorical


@pytest.mark.parametrize("a,b,h", [((1, 2, 3), (1, 2, 3), 0), ((1, 2, 3), (1, 0, 3), 1),
                                   ((0, 0, 0, 0), (1, 1, 1, 1), 4)])
def test_hamming_examples(a, b, h):
    assert hamming(a, b) == h


def test_hamming_length_mismatch():
    with pytest.raises(ValueError):
        hamming((1, 2), (1, 2, 3))


def _cat_embedding(rows, counts):
    return embedding_from_matrix(np.array(rows, dtype=float), decode=CategoricalTable(counts))


def test_categorical_one_difference():
    # coordinate 0 decodes differently for y = -0.5 and y = 0.5, coordinate 1 never moves
    emb = _cat_embedding([[1.0], [0.0]], (2, 2))
    # h = 1, exponent -(2 / 2) * 1 = -1
    assert k_categorical([-0.5], [0.5], emb, 2.0) == pytest.approx(E1, abs=1e-12)
    # h = 1, lam = 4 puts the exponent at -2
    assert k_categorical([-0.5], [0.5], emb, 4.0) == pytest.approx(math.exp(-2), abs=1e-12)


def test_categorical_three_differences():
    emb = _cat_embedding([[1.0], [1.0], [1.0]], (2, 2, 2))
    assert k_categorical([-0.5], [0.5], emb, 0.5) == pytest.approx(math.exp(-2.25), abs=1e-6)
    assert k_categorical([-0.5], [0.5], emb, 0.5) == pytest.approx(0.105399, abs=1e-6)


def test_categorical_equal_and_missing_table():
    emb = _cat_embedding([[1.0], [0.3]], (3, 4))
    assert k_categorical([0.2], [0.2], emb, 1.0) == 1.0
    with pytest.raises(KernelConfigError):
        k_categorical([0.2], [0.2], draw_embedding(3, 1, seed=0), 1.0)


@given(st.floats(-0.99, -0.01), st.floats(-0.99, -0.01))
def test_categorical_invariant_within_cell(y1, y2):
    # both points decode to the same vector: counts 2, A = 1 -> category 0 for y < 0
    emb = _cat_embedding([[1.0], [1.0]], (2, 2))
    ref = k_categorical([y1], [0.5], emb, 0.8)
    assert k_categorical([y2], [0.5], emb, 0.8) == pytest.approx(ref, abs=1e-12)
    assert k_categorical([y1], [y2], emb, 0.8) == 1.0


# -- skew SE


def test_skew_examples():
    assert k_skew_se([0.4, 1.0], [0.4, 1.0], np.eye(2)) == 1.0
    assert k_skew_se([0.0], [1.0], np.eye(1)) == pytest.approx(E1, rel=1e-12)
    assert k_skew_se([2.0, 0.0], [0.0, 0.0], np.diag([4.0, 1.0])) == pytest.approx(E1, rel=1e-12)


@pytest.mark.parametrize("bad", [np.array([[1.0, 2.0], [0.0, 1.0]]), -np.eye(2), np.diag([1.0, 0.0])])
def test_skew_rejects_non_spd(bad):
    with pytest.raises(ValueError):
        k_skew_se([0, 0], [1, 1], bad)


@given(vec(3), vec(3), st.floats(0.1, 5))
def test_skew_bridges_to_se(a, b, ell):
    assert abs(k_skew_se(a, b, 2 * ell ** 2 * np.eye(3)) - k_se(a, b, ell)) <= 1e-12


# -- KernelSpec


def test_spec_parameter_validation():
    with pytest.raises(KernelConfigError):
        KernelSpec(SE)
    with pytest.raises(KernelConfigError):
        KernelSpec(SE, ell=1.0, lam=2.0)
    with pytest.raises(KernelConfigError):
        KernelSpec(SE_HIGHDIM, ell=1.0)
    with pytest.raises(KernelConfigError):
        KernelSpec(SKEW_SE, Lambda=np.eye(2), ell=1.0)
    with pytest.raises(KernelConfigError):
        KernelSpec("matern", ell=1.0)
    with pytest.raises(ValueError):
        KernelSpec(SE, ell=-1.0)
    emb = _cat_embedding([[1.0], [1.0]], (2, 2))
    with pytest.raises(KernelConfigError):
        KernelSpec(CATEGORICAL, embedding=emb)
    with pytest.raises(KernelConfigError):
        KernelSpec(CATEGORICAL, ell=1.0, lam=1.0, embedding=emb)


def _specs():
    emb = draw_embedding(7, 2, seed=11)
    cat = draw_embedding(7, 2, seed=12, decode=CategoricalTable((2, 3, 7, 2, 2, 5, 4)))
    return [KernelSpec(SE, ell=0.6), KernelSpec(SE_HIGHDIM, ell=0.9, embedding=emb),
            KernelSpec(CATEGORICAL, lam=0.4, embedding=cat),
            KernelSpec(SKEW_SE, Lambda=np.array([[1.0, 0.3], [0.3, 0.5]]))]


@pytest.mark.parametrize("idx", range(4))
def test_gram_matches_pointwise(idx):
    spec = _specs()[idx]
    rng = np.random.default_rng(idx)
    X = rng.uniform(-1.4, 1.4, (6, 2))
    G = spec.gram(X)
    for a in range(6):
        for b in range(6):
            if spec.variant == SE:
                ref = k_se(X[a], X[b], spec.ell)
            elif spec.variant == SE_HIGHDIM:
                ref = k_se_highdim(X[a], X[b], spec.embedding, spec.ell)
            elif spec.variant == CATEGORICAL:
                ref = k_categorical(X[a], X[b], spec.embedding, spec.lam)
            else:
                ref = k_skew_se(X[a], X[b], spec.Lambda)
            assert G[a, b] == pytest.approx(ref, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 3), st.integers(1, 8), st.integers(0, 10_000))
def test_gram_psd_symmetric_bounded(idx, n, seed):
    spec = _specs()[idx]
    X = np.random.default_rng(seed).uniform(-1.4, 1.4, (n, 2))
    G = spec.gram(X)
    assert np.allclose(G, G.T, atol=0)
    assert np.all(G > 0) and np.all(G <= 1)
    assert np.allclose(np.diag(G), 1.0)
    assert np.linalg.eigvalsh(G).min() >= -1e-8


def test_categorical_ell_parametrization():
    spec = _specs()[2]
    by_ell = KernelSpec(CATEGORICAL, ell=0.5, embedding=spec.embedding)
    assert by_ell.hamming_weight == pytest.approx(4.0)
    assert by_ell.with_ell(2.0).hamming_weight == pytest.approx(0.25)
