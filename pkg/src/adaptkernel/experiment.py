"""Repeated stratified K-fold evaluation, WL-iteration sweeps and run bookkeeping."""

from __future__ import annotations

import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from sklearn.model_selection import KFold, StratifiedKFold

from .config import ExperimentConfig
from .exceptions import ConfigError, ContractViolation, TrainingError
from .features import FeatureMatrix, KernelKind, build_feature_matrix
from .graphs import GraphDataset, load_tudataset
from .model import train_model

logger = logging.getLogger(__name__)

ProgressCallback = Callable[[int, int], None]


def derive_seed(seed: int, *keys: int) -> int:
    """Child seed ``seed XOR mix(keys)``; ``mix`` is numpy's SeedSequence hash."""
    mixed = int(np.random.SeedSequence(list(keys)).generate_state(1)[0])
    return seed ^ mixed


def stratified_kfold(
    labels: Sequence[int] | np.ndarray, folds: int, seed: int
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Shuffled stratified ``(train, test)`` index splits.

    Falls back to plain shuffled K-fold, with a warning, when some class has
    fewer than ``folds`` members.
    """
    labels = np.asarray(labels)
    n = labels.shape[0]
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    if folds > n:
        raise ValueError(f"cannot split {n} samples into {folds} folds")
    _, counts = np.unique(labels, return_counts=True)
    if counts.min() < folds:
        logger.warning(
            "least populated class has %d member(s), fewer than %d folds; "
            "using unstratified K-fold",
            counts.min(),
            folds,
        )
        splitter = KFold(n_splits=folds, shuffle=True, random_state=seed)
    else:
        splitter = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    return [(train, test) for train, test in splitter.split(np.zeros(n), labels)]


@dataclass(frozen=True)
class FoldResult:
    repeat: int
    fold: int
    test_accuracy: float
    train_losses: np.ndarray = field(repr=False)
    train_accuracies: np.ndarray = field(repr=False)
    test_accuracies: np.ndarray = field(repr=False)
    scores: np.ndarray = field(repr=False)
    score_history: Optional[np.ndarray] = field(default=None, repr=False)


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    fold_accuracies: tuple[tuple[float, ...], ...]
    feature_ids: tuple[str, ...]
    scores: Optional[np.ndarray] = field(default=None, repr=False)
    wall_clock: float = 0.0
    runs: tuple[FoldResult, ...] = field(default=(), repr=False, compare=False)

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([acc for repeat in self.fold_accuracies for acc in repeat])

    @property
    def mean(self) -> float:
        return float(self.accuracies.mean())

    @property
    def stderr(self) -> float:
        """Sample standard deviation over all repeat x fold scores / sqrt(count)."""
        scores = self.accuracies
        if scores.size < 2:
            return 0.0
        return float(scores.std(ddof=1) / np.sqrt(scores.size))

    def to_dict(self) -> dict:
        """Deterministic JSON payload; wall-clock time is left out."""
        return {
            "config": self.config.to_dict(),
            "fold_accuracies": [list(repeat) for repeat in self.fold_accuracies],
            "mean_accuracy": self.mean,
            "standard_error": self.stderr,
            "standard_error_population": "all repeats x folds",
            "evaluation": "final epoch",
            "feature_ids": list(self.feature_ids),
            "attention_scores": None if self.scores is None else self.scores.tolist(),
        }


def _features_for(config: ExperimentConfig, dataset: GraphDataset) -> FeatureMatrix:
    features = build_feature_matrix(dataset, config.kernel, config.wl_iterations)
    if features.num_features == 0:
        raise ContractViolation(
            f"{dataset.name} has no {config.kernel.value} substructure features"
        )
    logger.info(
        "%s: %d x %d %s feature matrix",
        dataset.name,
        features.num_graphs,
        features.num_features,
        config.kernel.value,
    )
    return features


def load_dataset(config: ExperimentConfig) -> GraphDataset:
    return load_tudataset(
        config.dataset_path, config.dataset_name, degree_labels=config.degree_labels
    )


def run_experiment(
    config: ExperimentConfig,
    dataset: Optional[GraphDataset] = None,
    progress: Optional[ProgressCallback] = None,
) -> ExperimentReport:
    """Train and score one model per (repeat, fold) and aggregate the test accuracies.

    The feature matrix, the attention pooling and the kernel matrix cover every
    graph; only training labels enter the loss. Test labels are read once a run
    has finished, to score its predictions.

    Args:
        config: Experiment settings.
        dataset: Preloaded dataset; loaded from ``config.dataset_path`` when omitted.
        progress: Called with ``(completed, total)`` after every run.

    Raises:
        TrainingError: A run diverged; the error names its repeat, fold and epoch.
            Runs that have not started by then are skipped.
    """
    start = time.perf_counter()
    if dataset is None:
        dataset = load_dataset(config)
    elif config.degree_labels:
        dataset = dataset.with_degree_labels()
    feature_matrix = _features_for(config, dataset)
    features = feature_matrix.as_float()
    labels = dataset.labels

    tasks = []
    for repeat in range(config.repeats):
        splits = stratified_kfold(labels, config.folds, derive_seed(config.seed, repeat))
        for fold, (train_index, test_index) in enumerate(splits):
            tasks.append((repeat, fold, train_index, test_index))

    abort = threading.Event()

    def run_one(task: tuple[int, int, np.ndarray, np.ndarray]) -> Optional[FoldResult]:
        repeat, fold, train_index, test_index = task
        if abort.is_set():
            return None
        try:
            result = train_model(
                features,
                train_index,
                labels[train_index],
                test_index,
                num_classes=dataset.num_classes,
                lr=config.lr,
                epochs=config.epochs,
                weight_decay=config.weight_decay,
                hidden_sizes=config.hidden_sizes,
                att_hid=config.att_hid if config.adaptive else None,
                seed=derive_seed(config.seed, repeat, fold),
                record_scores=config.record_attention,
            )
        except TrainingError as exc:
            abort.set()
            raise exc.with_context(repeat, fold) from exc
        except Exception:
            abort.set()
            raise

        test_labels = labels[test_index]
        return FoldResult(
            repeat=repeat,
            fold=fold,
            test_accuracy=float(np.mean(result.final_test_predictions == test_labels)),
            train_losses=result.train_losses,
            train_accuracies=result.train_accuracies,
            test_accuracies=(result.test_predictions == test_labels).mean(axis=1),
            scores=result.scores,
            score_history=result.score_history,
        )

    results: dict[tuple[int, int], FoldResult] = {}
    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        futures = {executor.submit(run_one, task): task[:2] for task in tasks}
        for future in as_completed(futures):
            try:
                result = future.result()
            except BaseException:
                # drop queued runs
                abort.set()
                executor.shutdown(wait=True, cancel_futures=True)
                raise
            if result is None:
                continue
            results[(result.repeat, result.fold)] = result
            logger.info(
                "repeat %d fold %d: test accuracy %.4f",
                result.repeat,
                result.fold,
                result.test_accuracy,
            )
            if progress is not None:
                progress(len(results), len(tasks))

    runs = tuple(results[key] for key in sorted(results))
    fold_accuracies = tuple(
        tuple(run.test_accuracy for run in runs if run.repeat == repeat)
        for repeat in range(config.repeats)
    )
    scores = np.mean([run.scores for run in runs], axis=0) if config.adaptive else None
    report = ExperimentReport(
        config=config,
        fold_accuracies=fold_accuracies,
        feature_ids=feature_matrix.feature_ids,
        scores=scores,
        wall_clock=time.perf_counter() - start,
        runs=runs,
    )
    logger.info(
        "%s %s: %.4f +/- %.4f over %d runs in %.1fs",
        dataset.name,
        config.kernel.value,
        report.mean,
        report.stderr,
        len(runs),
        report.wall_clock,
    )
    return report


def sweep_wl_iterations(
    base_config: ExperimentConfig,
    iterations: Iterable[int],
    dataset: Optional[GraphDataset] = None,
    progress: Optional[ProgressCallback] = None,
) -> list[ExperimentReport]:
    """One full :func:`run_experiment` per WL iteration count."""
    if base_config.kernel is not KernelKind.WL:
        raise ConfigError("an iteration sweep needs kernel = 'wl'")
    iterations = list(iterations)
    if not iterations:
        return []
    if dataset is None:
        dataset = load_dataset(base_config)
    return [
        run_experiment(base_config.with_overrides(wl_iterations=i), dataset, progress)
        for i in iterations
    ]
