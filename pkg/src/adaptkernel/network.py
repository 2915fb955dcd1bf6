"""Dense layers, softmax cross-entropy, Adam with decoupled weight decay, gradient checks.

Every block is differentiated by hand; parameters travel as flat
``{name: array}`` dictionaries so the optimizer and the checker stay generic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from scipy.special import log_softmax, softmax

from .attention import AttentionParams, fan_in_uniform
from .exceptions import CheckpointError, TrainingError

logger = logging.getLogger(__name__)

Parameters = dict[str, np.ndarray]

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class MlpParams:
    """Weights and biases of a ReLU multilayer perceptron."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if not self.weights or len(self.weights) != len(self.biases):
            raise ValueError("need one bias vector per weight matrix")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"layer {i}: weight {w.shape} and bias {b.shape} disagree")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ValueError(
                    f"layer {i} expects {w.shape[0]} inputs, "
                    f"layer {i - 1} produces {self.weights[i - 1].shape[1]}"
                )
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {i} has non-finite entries")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    @classmethod
    def initialize(cls, layer_sizes: Sequence[int], rng: np.random.Generator) -> MlpParams:
        """Fan-in uniform weights and zero biases for ``layer_sizes[0] -> ... -> layer_sizes[-1]``."""
        if len(layer_sizes) < 2 or min(layer_sizes) < 1:
            raise ValueError(f"invalid layer sizes {tuple(layer_sizes)}")
        weights = tuple(
            fan_in_uniform(rng, n_in, (n_in, n_out))
            for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:])
        )
        biases = tuple(np.zeros(n_out) for n_out in layer_sizes[1:])
        return cls(weights, biases)

    def parameters(self) -> Parameters:
        params: Parameters = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            params[f"mlp.weight.{i}"] = w
            params[f"mlp.bias.{i}"] = b
        return params

    @classmethod
    def from_parameters(cls, params: Mapping[str, np.ndarray]) -> MlpParams:
        depth = sum(1 for name in params if name.startswith("mlp.weight."))
        return cls(
            tuple(params[f"mlp.weight.{i}"] for i in range(depth)),
            tuple(params[f"mlp.bias.{i}"] for i in range(depth)),
        )


@dataclass(frozen=True)
class MlpCache:
    inputs: tuple[np.ndarray, ...]
    pre_activations: tuple[np.ndarray, ...]


def mlp_forward(rows: np.ndarray, p: MlpParams) -> tuple[np.ndarray, MlpCache]:
    """Chained ``linear -> ReLU`` layers; the last linear layer has no activation."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != p.layer_sizes[0]:
        raise ValueError(
            f"input rows of shape {rows.shape} do not match first layer width {p.layer_sizes[0]}"
        )
    inputs: list[np.ndarray] = []
    pre_activations: list[np.ndarray] = []
    activation = rows
    last = len(p.weights) - 1
    for i, (w, b) in enumerate(zip(p.weights, p.biases)):
        inputs.append(activation)
        z = activation @ w + b
        pre_activations.append(z)
        activation = z if i == last else np.maximum(z, 0.0)
    return activation, MlpCache(tuple(inputs), tuple(pre_activations))


def mlp_backward(
    grad_logits: np.ndarray, cache: MlpCache, p: MlpParams
) -> tuple[Parameters, np.ndarray]:
    """Parameter gradients and the gradient with respect to the input rows."""
    grads: Parameters = {}
    grad = grad_logits
    for i in reversed(range(len(p.weights))):
        if i != len(p.weights) - 1:
            grad = grad * (cache.pre_activations[i] > 0)
        grads[f"mlp.weight.{i}"] = cache.inputs[i].T @ grad
        grads[f"mlp.bias.{i}"] = grad.sum(axis=0)
        grad = grad @ p.weights[i].T
    return grads, grad


def cross_entropy_loss(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean ``-log softmax(logits)[label]`` and its gradient ``(softmax - onehot) / batch``."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ValueError(f"logits {logits.shape} and labels {labels.shape} disagree")
    batch, num_classes = logits.shape
    if batch == 0:
        raise ValueError("cross-entropy needs at least one row")
    if labels.min() < 0 or labels.max() >= num_classes:
        raise ValueError(f"labels must lie in [0, {num_classes})")
    rows = np.arange(batch)
    loss = float(-log_softmax(logits, axis=1)[rows, labels].mean())
    grad = softmax(logits, axis=1)
    grad[rows, labels] -= 1.0
    return loss, grad / batch


@dataclass(frozen=True)
class TrainState:
    """Everything a training loop owns: parameters, Adam moments and counters."""

    mlp: MlpParams
    attention: Optional[AttentionParams] = None
    first_moments: Mapping[str, np.ndarray] = field(default_factory=dict)
    second_moments: Mapping[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    epoch: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        params = self.parameters()
        for moments in (self.first_moments, self.second_moments):
            if not moments:
                continue
            if set(moments) != set(params):
                raise ValueError("optimizer moments do not cover the parameters")
            for name, value in moments.items():
                if value.shape != params[name].shape:
                    raise ValueError(f"moment {name} has shape {value.shape}")

    @classmethod
    def create(
        cls, mlp: MlpParams, attention: Optional[AttentionParams] = None, seed: int = 0
    ) -> TrainState:
        state = cls(mlp=mlp, attention=attention, seed=seed)
        zeros = {name: np.zeros_like(value) for name, value in state.parameters().items()}
        return replace(
            state,
            first_moments=zeros,
            second_moments={name: z.copy() for name, z in zeros.items()},
        )

    def parameters(self) -> Parameters:
        params = self.mlp.parameters()
        if self.attention is not None:
            params.update(self.attention.parameters())
        return params

    def with_parameters(self, params: Mapping[str, np.ndarray], **changes) -> TrainState:
        attention = None
        if self.attention is not None:
            attention = AttentionParams(params["attention.w1"], params["attention.w2"])
        return replace(
            self, mlp=MlpParams.from_parameters(params), attention=attention, **changes
        )


def _decays(name: str) -> bool:
    return ".bias." not in name


def backward_and_step(
    state: TrainState,
    grads: Mapping[str, np.ndarray],
    lr: float,
    wd: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> TrainState:
    """One Adam step with decoupled weight decay on weights (biases are not decayed).

    Raises:
        TrainingError: a gradient contains NaN or infinity.
    """
    params = state.parameters()
    if set(grads) != set(params):
        raise ValueError(
            f"gradients for {sorted(grads)} do not match parameters {sorted(params)}"
        )
    beta1, beta2 = betas
    step = state.step + 1
    new_params: Parameters = {}
    first: Parameters = {}
    second: Parameters = {}
    for name, value in params.items():
        grad = np.asarray(grads[name], dtype=np.float64)
        if grad.shape != value.shape:
            raise ValueError(f"gradient {name} has shape {grad.shape}, expected {value.shape}")
        if not np.isfinite(grad).all():
            raise TrainingError(
                f"non-finite gradient for {name} "
                f"({int((~np.isfinite(grad)).sum())} of {grad.size} entries)",
                epoch=state.epoch,
            )
        m = beta1 * state.first_moments[name] + (1.0 - beta1) * grad
        v = beta2 * state.second_moments[name] + (1.0 - beta2) * grad * grad
        m_hat = m / (1.0 - beta1**step)
        v_hat = v / (1.0 - beta2**step)
        update = m_hat / (np.sqrt(v_hat) + eps)
        if wd and _decays(name):
            update = update + wd * value
        new_params[name] = value - lr * update
        first[name] = m
        second[name] = v
    return state.with_parameters(
        new_params,
        first_moments=first,
        second_moments=second,
        step=step,
        epoch=state.epoch + 1,
    )


@dataclass(frozen=True)
class GradientCheckReport:
    max_relative_error: float
    mean_relative_error: float
    num_checked: int
    tolerance: float
    worst_parameter: str
    worst_index: int

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.tolerance


def gradient_check(
    fn: Callable[[Parameters], tuple[float, Mapping[str, np.ndarray]]],
    params: Mapping[str, np.ndarray],
    eps: float = 1e-5,
    tolerance: float = 1e-4,
    num_coords: int = 200,
    seed: int = 0,
    abs_floor: float = 1e-6,
) -> GradientCheckReport:
    """Compare analytic gradients with central differences on sampled coordinates.

    Args:
        fn: Maps a parameter dict to ``(loss, gradients)``; must be deterministic.
        params: Probe point. Not modified.
        eps: Central-difference half step.
        tolerance: Threshold reported through ``GradientCheckReport.passed``.
        num_coords: Coordinates to probe; all of them when there are fewer.
        seed: Seeds the coordinate subsample.
        abs_floor: Lower bound of the relative-error denominator.
    """
    base = {name: np.array(value, dtype=np.float64) for name, value in params.items()}
    _, analytic = fn(base)
    coordinates = [(name, i) for name in sorted(base) for i in range(base[name].size)]
    if len(coordinates) > num_coords:
        rng = np.random.default_rng(seed)
        picked = np.sort(rng.choice(len(coordinates), size=num_coords, replace=False))
        coordinates = [coordinates[k] for k in picked]

    errors: list[float] = []
    worst = ("", -1)
    for name, i in coordinates:
        shifted = dict(base)
        probe = base[name].copy()
        flat = probe.reshape(-1)
        original = flat[i]
        flat[i] = original + eps
        shifted[name] = probe
        loss_plus, _ = fn(shifted)
        flat[i] = original - eps
        loss_minus, _ = fn(shifted)
        numeric = (loss_plus - loss_minus) / (2.0 * eps)
        exact = float(np.asarray(analytic[name]).reshape(-1)[i])
        error = abs(exact - numeric) / max(abs(exact), abs(numeric), abs_floor)
        if not errors or error > max(errors):
            worst = (name, i)
        errors.append(error)

    report = GradientCheckReport(
        max_relative_error=max(errors, default=0.0),
        mean_relative_error=float(np.mean(errors)) if errors else 0.0,
        num_checked=len(errors),
        tolerance=tolerance,
        worst_parameter=worst[0],
        worst_index=worst[1],
    )
    logger.debug("gradient check: %s", report)
    return report


def save_checkpoint(state: TrainState, path: Path | str) -> None:
    """Store parameters, Adam moments, counters and seed in a versioned ``.npz`` file."""
    arrays: dict[str, np.ndarray] = {
        "format_version": np.array(CHECKPOINT_VERSION),
        "step": np.array(state.step),
        "epoch": np.array(state.epoch),
        "seed": np.array(state.seed),
    }
    for name, value in state.parameters().items():
        arrays[f"param/{name}"] = value
        arrays[f"m/{name}"] = np.asarray(state.first_moments[name])
        arrays[f"v/{name}"] = np.asarray(state.second_moments[name])
    with open(path, "wb") as f:
        np.savez(f, **arrays)


def load_checkpoint(path: Path | str) -> TrainState:
    try:
        with np.load(path) as data:
            arrays = {key: data[key] for key in data.files}
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    version = int(arrays.get("format_version", -1))
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint {path} has format version {version}, expected {CHECKPOINT_VERSION}"
        )

    def group(prefix: str) -> Parameters:
        return {key[len(prefix) :]: value for key, value in arrays.items() if key.startswith(prefix)}

    params = group("param/")
    attention = None
    if "attention.w1" in params:
        attention = AttentionParams(params["attention.w1"], params["attention.w2"])
    return TrainState(
        mlp=MlpParams.from_parameters(params),
        attention=attention,
        first_moments=group("m/"),
        second_moments=group("v/"),
        step=int(arrays["step"]),
        epoch=int(arrays["epoch"]),
        seed=int(arrays["seed"]),
    )
