"""Tests for feature-channel attention."""

import numpy as np
import pytest

from adaptkernel.attention import (
    AttentionParams,
    aggregate_channels,
    apply_attention,
    attend,
    attention_backward,
    attention_scores,
)
from adaptkernel.exceptions import ContractViolation
from adaptkernel.network import gradient_check


def _reference_scores(h, w1, w2):
    hidden = np.maximum(h @ w1, 0.0)
    logits = hidden @ w2
    shifted = np.exp(logits - logits.max())
    return shifted / shifted.sum()


@pytest.mark.parametrize(
    "X, expected",
    [
        ([[2, 0], [0, 2]], [1, 1]),
        ([[3]], [3]),
        ([[2, 1], [4, 3], [0, 2]], [2, 2]),
    ],
)
def test_aggregate_channels(X, expected):
    """Test column means of small matrices."""
    np.testing.assert_allclose(aggregate_channels(np.array(X)), expected)


def test_aggregate_needs_rows():
    """Test that an empty matrix cannot be pooled."""
    with pytest.raises(ValueError):
        aggregate_channels(np.zeros((0, 3)))


def test_zero_weights_give_uniform_scores():
    """Test uniform attention from all-zero weights."""
    scores = attention_scores(np.array([1.0, 5.0, 2.0, 0.0]), AttentionParams.zeros(4, 3))

    np.testing.assert_allclose(scores, np.full(4, 0.25))


def test_equal_logits_split_evenly():
    """Test that equal logits give [0.5, 0.5] whatever their value."""
    w1 = np.array([[1.0], [0.0]])
    w2 = np.array([[3.0, 3.0]])

    np.testing.assert_allclose(attention_scores(np.array([2.0, 7.0]), AttentionParams(w1, w2)), [0.5, 0.5])


def test_scores_match_reference():
    """Test randomised scores against a straight-line implementation."""
    rng = np.random.default_rng(3)
    for _ in range(10):
        p = AttentionParams.initialize(6, 4, rng)
        h = rng.uniform(0, 5, size=6)
        np.testing.assert_allclose(
            attention_scores(h, p), _reference_scores(h, p.w1, p.w2), rtol=0, atol=1e-12
        )


def test_scores_form_a_distribution():
    """Test positivity and unit sum for large logits too."""
    rng = np.random.default_rng(0)
    for scale in (1.0, 100.0, 1e4):
        p = AttentionParams(rng.normal(size=(5, 3)) * scale, rng.normal(size=(3, 5)))
        scores = attention_scores(rng.uniform(0, 3, size=5), p)
        assert np.all(scores >= 0)
        assert abs(scores.sum() - 1.0) <= 1e-9


def test_score_shape_mismatch():
    """Test that a pooled vector of the wrong length is rejected."""
    with pytest.raises(ValueError):
        attention_scores(np.ones(3), AttentionParams.zeros(4, 2))


def test_params_validate_shapes():
    """Test that W1 and W2 must be L x C and C x L."""
    with pytest.raises(ValueError):
        AttentionParams(np.zeros((4, 2)), np.zeros((3, 4)))
    with pytest.raises(ValueError):
        AttentionParams(np.full((1, 1), np.nan), np.zeros((1, 1)))


def test_uniform_attention_scales_features():
    """Test X' = X / L for uniform scores."""
    X = np.array([[4.0, 8.0], [2.0, 6.0]])

    np.testing.assert_allclose(apply_attention(X, np.full(2, 0.5)).weighted, X / 2)


def test_one_hot_attention_keeps_one_column():
    """Test that a one-hot score zeroes every other column."""
    X = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])

    weighted = apply_attention(X, np.array([0.0, 1.0, 0.0])).weighted

    np.testing.assert_array_equal(weighted, [[0, 2, 0], [0, 5, 0]])


def test_apply_attention_by_hand():
    """Test a 3 x 2 fixture against hand arithmetic."""
    X = np.array([[4.0, 4.0], [0.0, 2.0], [8.0, 0.0]])

    weighted = apply_attention(X, np.array([0.25, 0.75])).weighted

    np.testing.assert_allclose(weighted, [[1.0, 3.0], [0.0, 1.5], [2.0, 0.0]])


def test_apply_attention_preserves_zeros():
    """Test that zero counts stay zero after reweighting."""
    rng = np.random.default_rng(1)
    X = rng.integers(0, 3, size=(6, 5)).astype(float)
    output = attend(X, AttentionParams.initialize(5, 3, rng))

    assert np.all(output.weighted[X == 0] == 0)


def test_apply_attention_length_mismatch():
    """Test that alpha must have one entry per column."""
    with pytest.raises(ValueError):
        apply_attention(np.ones((2, 3)), np.ones(2) / 2)


def test_zero_upstream_gradient():
    """Test that a zero gradient yields zero parameter gradients."""
    rng = np.random.default_rng(2)
    X = rng.integers(0, 4, size=(3, 4)).astype(float)
    p = AttentionParams.initialize(4, 2, rng)

    grad_w1, grad_w2 = attention_backward(np.zeros_like(X), attend(X, p), X, p)

    assert not grad_w1.any()
    assert not grad_w2.any()


def test_single_feature_has_no_gradient():
    """Test that a constant softmax over one feature gives zero gradients."""
    X = np.array([[1.0], [3.0]])
    p = AttentionParams(np.array([[0.7, -0.2]]), np.array([[0.4], [1.1]]))

    grad_w1, grad_w2 = attention_backward(np.ones_like(X), attend(X, p), X, p)

    np.testing.assert_allclose(grad_w1, 0, atol=1e-15)
    np.testing.assert_allclose(grad_w2, 0, atol=1e-15)


def test_backward_matches_finite_differences():
    """Test W1/W2 gradients of sum(G * X') against central differences."""
    rng = np.random.default_rng(4)
    X = rng.integers(0, 4, size=(4, 5)).astype(float)
    upstream = rng.normal(size=(4, 5))
    p = AttentionParams(rng.uniform(0.1, 0.5, size=(5, 3)), rng.normal(size=(3, 5)))

    def closure(params):
        q = AttentionParams(params["attention.w1"], params["attention.w2"])
        output = attend(X, q)
        grad_w1, grad_w2 = attention_backward(upstream, output, X, q)
        return float((upstream * output.weighted).sum()), {
            "attention.w1": grad_w1,
            "attention.w2": grad_w2,
        }

    report = gradient_check(closure, p.parameters(), eps=1e-5, tolerance=1e-4)

    assert report.num_checked == 30
    assert report.passed, report


def test_backward_requires_cache():
    """Test that an output without intermediates is refused."""
    X = np.ones((2, 2))
    p = AttentionParams.zeros(2, 2)

    with pytest.raises(ContractViolation, match="cache"):
        attention_backward(np.ones((2, 2)), apply_attention(X, np.full(2, 0.5)), X, p)


def test_backward_detects_stale_cache():
    """Test that a cache from other parameters is refused."""
    rng = np.random.default_rng(5)
    X = np.ones((2, 3))
    first = AttentionParams.initialize(3, 2, rng)
    second = AttentionParams.initialize(3, 2, rng)

    with pytest.raises(ContractViolation, match="stale"):
        attention_backward(np.ones((2, 3)), attend(X, first), X, second)


def test_initialisation_is_deterministic():
    """Test bit-identical scores from identical seeds."""
    X = np.arange(12, dtype=float).reshape(3, 4)
    a = attend(X, AttentionParams.initialize(4, 3, np.random.default_rng(9))).scores
    b = attend(X, AttentionParams.initialize(4, 3, np.random.default_rng(9))).scores

    assert a.tobytes() == b.tobytes()
