"""Feature-channel attention: pool, score with two dense layers, reweight columns.

The feature matrix ``X`` (N x L) is squeezed into one channel descriptor ``h``
(column means), scored as ``softmax(relu(h @ W1) @ W2)`` and the resulting
length-L vector multiplies every row of ``X``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import softmax

from .exceptions import ContractViolation
from .features import FeatureMatrix


def _as_array(X: FeatureMatrix | np.ndarray) -> np.ndarray:
    if isinstance(X, FeatureMatrix):
        return X.as_float()
    return np.asarray(X, dtype=np.float64)


def fan_in_uniform(rng: np.random.Generator, fan_in: int, shape: tuple[int, ...]) -> np.ndarray:
    """Uniform samples in ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]``."""
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


@dataclass(frozen=True)
class AttentionParams:
    w1: np.ndarray
    w2: np.ndarray

    def __post_init__(self) -> None:
        if self.w1.ndim != 2 or self.w2.ndim != 2:
            raise ValueError("attention weights must be matrices")
        if self.w1.shape != self.w2.shape[::-1]:
            raise ValueError(
                f"W1 {self.w1.shape} and W2 {self.w2.shape} must be L x C and C x L"
            )
        if not (np.isfinite(self.w1).all() and np.isfinite(self.w2).all()):
            raise ValueError("attention weights must be finite")

    @property
    def num_features(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    @classmethod
    def initialize(
        cls, num_features: int, hidden: int, rng: np.random.Generator
    ) -> AttentionParams:
        w1 = fan_in_uniform(rng, num_features, (num_features, hidden))
        w2 = fan_in_uniform(rng, hidden, (hidden, num_features))
        return cls(w1, w2)

    @classmethod
    def zeros(cls, num_features: int, hidden: int) -> AttentionParams:
        return cls(np.zeros((num_features, hidden)), np.zeros((hidden, num_features)))

    def parameters(self) -> dict[str, np.ndarray]:
        return {"attention.w1": self.w1, "attention.w2": self.w2}


@dataclass(frozen=True)
class AttentionOutput:
    """Scores, reweighted features and the forward cache used by the backward pass."""

    scores: np.ndarray
    weighted: np.ndarray
    pooled: Optional[np.ndarray] = None
    pre_activation: Optional[np.ndarray] = None
    hidden: Optional[np.ndarray] = None
    params: Optional[AttentionParams] = None


def aggregate_channels(X: FeatureMatrix | np.ndarray) -> np.ndarray:
    """Column means of ``X``."""
    values = _as_array(X)
    if values.shape[0] < 1:
        raise ValueError("cannot pool a feature matrix with no rows")
    return values.mean(axis=0)


def _score(h: np.ndarray, p: AttentionParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if h.ndim != 1 or h.shape[0] != p.num_features:
        raise ValueError(
            f"pooled vector of length {h.shape} does not match W1 with {p.num_features} rows"
        )
    pre_activation = h @ p.w1
    hidden = np.maximum(pre_activation, 0.0)
    scores = softmax(hidden @ p.w2)
    return pre_activation, hidden, scores


def attention_scores(h: np.ndarray, p: AttentionParams) -> np.ndarray:
    """``softmax(relu(h @ W1) @ W2)`` over the L feature positions."""
    return _score(np.asarray(h, dtype=np.float64), p)[2]


def apply_attention(X: FeatureMatrix | np.ndarray, alpha: np.ndarray) -> AttentionOutput:
    """Multiply column ``l`` of ``X`` by ``alpha[l]``.

    The returned output has no forward cache; use :func:`attend` when gradients
    are needed.
    """
    values = _as_array(X)
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (values.shape[1],):
        raise ValueError(f"alpha has shape {alpha.shape}, expected ({values.shape[1]},)")
    return AttentionOutput(scores=alpha, weighted=values * alpha)


def attend(X: FeatureMatrix | np.ndarray, p: AttentionParams) -> AttentionOutput:
    """Pool, score and reweight in one pass, keeping every intermediate."""
    values = _as_array(X)
    pooled = aggregate_channels(values)
    pre_activation, hidden, scores = _score(pooled, p)
    return AttentionOutput(
        scores=scores,
        weighted=values * scores,
        pooled=pooled,
        pre_activation=pre_activation,
        hidden=hidden,
        params=p,
    )


def attention_backward(
    grad_weighted: np.ndarray,
    cached: AttentionOutput,
    X: FeatureMatrix | np.ndarray,
    p: AttentionParams,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of the loss with respect to ``W1`` and ``W2``.

    ``h`` depends on the constant ``X`` only, so nothing flows back into ``X``.

    Raises:
        ContractViolation: ``cached`` lacks intermediates or came from other parameters.
    """
    if cached.pre_activation is None or cached.hidden is None or cached.pooled is None:
        raise ContractViolation("attention output carries no forward cache")
    if cached.params is not p:
        raise ContractViolation("attention cache is stale: it was computed with other parameters")
    values = _as_array(X)
    grad_weighted = np.asarray(grad_weighted, dtype=np.float64)
    if grad_weighted.shape != values.shape:
        raise ValueError(
            f"gradient shape {grad_weighted.shape} does not match features {values.shape}"
        )

    alpha = cached.scores
    grad_alpha = (grad_weighted * values).sum(axis=0)
    grad_logits = alpha * (grad_alpha - grad_alpha @ alpha)
    grad_w2 = np.outer(cached.hidden, grad_logits)
    grad_hidden = p.w2 @ grad_logits
    grad_pre = grad_hidden * (cached.pre_activation > 0)
    grad_w1 = np.outer(cached.pooled, grad_pre)
    return grad_w1, grad_w2
