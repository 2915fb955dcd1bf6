"""End-to-end model: attention -> Gram matrix -> MLP -> cross-entropy, and its training loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .attention import AttentionOutput, AttentionParams, apply_attention, attend, attention_backward
from .exceptions import ContractViolation, TrainingError
from .kernels import gram, gram_backward
from .network import (
    GradientCheckReport,
    MlpCache,
    MlpParams,
    Parameters,
    TrainState,
    backward_and_step,
    cross_entropy_loss,
    gradient_check,
    mlp_backward,
    mlp_forward,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Evaluation:
    """One forward/backward pass over the whole dataset."""

    loss: float
    grads: Parameters
    logits: np.ndarray
    kernel: np.ndarray
    attention: AttentionOutput
    mlp_cache: MlpCache

    @property
    def kink_distance(self) -> float:
        """Smallest ReLU pre-activation magnitude anywhere in the model."""
        candidates = [np.abs(z).min() for z in self.mlp_cache.pre_activations[:-1] if z.size]
        if self.attention.pre_activation is not None and self.attention.pre_activation.size:
            candidates.append(np.abs(self.attention.pre_activation).min())
        return float(min(candidates, default=np.inf))


def uniform_scores(num_features: int) -> np.ndarray:
    return np.full(num_features, 1.0 / num_features)


def loss_and_gradients(
    state: TrainState,
    features: np.ndarray,
    train_index: np.ndarray,
    train_labels: np.ndarray,
) -> Evaluation:
    """Forward every graph, score only the training rows, backpropagate.

    Without attention parameters the scores are frozen at ``1/L`` and only the
    MLP receives gradients.
    """
    if state.attention is not None:
        attention = attend(features, state.attention)
    else:
        attention = apply_attention(features, uniform_scores(features.shape[1]))
    kernel = gram(attention.weighted).values
    logits, cache = mlp_forward(kernel, state.mlp)
    loss, grad_train = cross_entropy_loss(logits[train_index], train_labels)

    grad_logits = np.zeros_like(logits)
    grad_logits[train_index] = grad_train
    grads, grad_kernel = mlp_backward(grad_logits, cache, state.mlp)
    if state.attention is not None:
        grad_weighted = gram_backward(grad_kernel, attention.weighted)
        grads["attention.w1"], grads["attention.w2"] = attention_backward(
            grad_weighted, attention, features, state.attention
        )
    return Evaluation(loss, grads, logits, kernel, attention, cache)


def initial_state(
    num_graphs: int,
    num_features: int,
    num_classes: int,
    hidden_sizes: Sequence[int],
    att_hid: Optional[int],
    seed: int,
) -> TrainState:
    """Seeded parameters; attention first, then the MLP layers in order."""
    rng = np.random.default_rng(seed)
    attention = None
    if att_hid is not None:
        attention = AttentionParams.initialize(num_features, att_hid, rng)
    mlp = MlpParams.initialize([num_graphs, *hidden_sizes, num_classes], rng)
    return TrainState.create(mlp, attention, seed=seed)


@dataclass(frozen=True)
class TrainingResult:
    state: TrainState
    train_losses: np.ndarray
    train_accuracies: np.ndarray
    test_predictions: np.ndarray
    final_test_predictions: np.ndarray
    scores: np.ndarray
    score_history: Optional[np.ndarray] = None


def train_model(
    features: np.ndarray,
    train_index: np.ndarray,
    train_labels: np.ndarray,
    test_index: np.ndarray,
    *,
    num_classes: int,
    lr: float,
    epochs: int,
    weight_decay: float,
    hidden_sizes: Sequence[int],
    att_hid: Optional[int],
    seed: int,
    record_scores: bool = False,
) -> TrainingResult:
    """Full-batch training on the training rows of the kernel matrix.

    Test labels are never passed in: test rows only contribute structure (kernel
    columns, pooled features) and their per-epoch predictions are recorded for
    scoring after training.

    Raises:
        TrainingError: the loss or a gradient became non-finite.
    """
    features = np.asarray(features, dtype=np.float64)
    train_index = np.asarray(train_index, dtype=np.int64)
    test_index = np.asarray(test_index, dtype=np.int64)
    train_labels = np.asarray(train_labels, dtype=np.int64)
    if features.shape[1] == 0:
        raise ValueError("feature matrix has no columns")

    state = initial_state(
        features.shape[0], features.shape[1], num_classes, hidden_sizes, att_hid, seed
    )
    losses = np.empty(epochs)
    accuracies = np.empty(epochs)
    predictions = np.empty((epochs, test_index.size), dtype=np.int64)
    history = np.empty((epochs, features.shape[1])) if record_scores else None

    for epoch in range(epochs):
        evaluation = loss_and_gradients(state, features, train_index, train_labels)
        if not np.isfinite(evaluation.loss):
            raise TrainingError(f"loss became {evaluation.loss}", epoch=epoch)
        predicted = evaluation.logits.argmax(axis=1)
        losses[epoch] = evaluation.loss
        accuracies[epoch] = float(np.mean(predicted[train_index] == train_labels))
        predictions[epoch] = predicted[test_index]
        if history is not None:
            history[epoch] = evaluation.attention.scores
        state = backward_and_step(state, evaluation.grads, lr, weight_decay)
        if epoch % 50 == 0 or epoch == epochs - 1:
            logger.debug(
                "epoch %d: loss %.6f train acc %.4f", epoch, losses[epoch], accuracies[epoch]
            )

    final = loss_and_gradients(state, features, train_index, train_labels)
    return TrainingResult(
        state=state,
        train_losses=losses,
        train_accuracies=accuracies,
        test_predictions=predictions,
        final_test_predictions=final.logits.argmax(axis=1)[test_index],
        scores=final.attention.scores,
        score_history=history,
    )


def composite_gradient_check(
    seed: int = 0,
    num_graphs: int = 6,
    num_features: int = 8,
    att_hid: int = 3,
    hidden_sizes: Sequence[int] = (5, 4),
    num_classes: int = 2,
    eps: float = 1e-5,
    tolerance: float = 1e-4,
    kink_margin: float = 1e-3,
    max_attempts: int = 100,
) -> GradientCheckReport:
    """Finite-difference check of the whole model on random toy data.

    Parameter draws whose ReLU pre-activations come within ``kink_margin`` of
    zero are rejected and redrawn.
    """
    rng = np.random.default_rng(seed)
    features = rng.integers(0, 5, size=(num_graphs, num_features)).astype(np.float64)
    labels = rng.integers(0, num_classes, size=num_graphs)
    train_index = np.arange(num_graphs - 2)
    train_labels = labels[train_index]

    for attempt in range(max_attempts):
        state = initial_state(
            num_graphs, num_features, num_classes, hidden_sizes, att_hid, seed + 7919 * attempt
        )
        probe = loss_and_gradients(state, features, train_index, train_labels)
        if probe.kink_distance >= kink_margin:
            break
    else:
        raise ContractViolation(f"no kink-free parameter draw in {max_attempts} attempts")

    def closure(params: Parameters) -> tuple[float, Parameters]:
        evaluation = loss_and_gradients(
            state.with_parameters(params), features, train_index, train_labels
        )
        return evaluation.loss, evaluation.grads

    return gradient_check(closure, state.parameters(), eps=eps, tolerance=tolerance, seed=seed)
