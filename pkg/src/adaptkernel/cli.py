"""CLI interface for adaptkernel."""

import argparse
import logging
import sys
import time
from pathlib import Path
from threading import Lock
from typing import Any, Optional, Sequence

from . import __version__
from .config import ExperimentConfig, resolve_config
from .exceptions import AdaptKernelError, ConfigError
from .experiment import load_dataset, run_experiment, sweep_wl_iterations
from .features import KernelKind, build_feature_matrix, write_feature_matrix
from .graphs import dataset_summary
from .kernels import gram, write_gram_matrix
from .model import composite_gradient_check
from .reports import (
    DEFAULT_HEATMAP_FEATURES,
    export_attention_heatmap,
    write_experiment_outputs,
    write_sweep_table,
)

logger = logging.getLogger(__name__)

DEFAULT_OUTPUT_DIR = Path("results")


class RunProgressBar:
    """Thread-safe progress line for (repeat, fold) runs, redrawn in place on stdout."""

    width = 30

    def __init__(self, total: int, desc: str = "Training"):
        self.total = total
        self.done = 0
        self.desc = desc
        self.started = time.monotonic()
        self.lock = Lock()
        self._drawn = 0

    def update(self, completed: int, total: Optional[int] = None):
        """Set progress to ``completed`` runs out of ``total``."""
        with self.lock:
            self.total = self.total if total is None else total
            self.done = completed
            self._draw()

    def _line(self) -> str:
        elapsed = time.monotonic() - self.started
        filled = self.width * self.done // self.total
        parts = [
            f"{self.desc}: [{'█' * filled}{'░' * (self.width - filled)}]",
            f"{self.done}/{self.total} runs ({100 * self.done // self.total}%)",
        ]
        if self.done:
            per_run = elapsed / self.done
            parts.append(f"{per_run:.2f}s/run")
            if self.done < self.total:
                parts.append(f"eta {per_run * (self.total - self.done):.0f}s")
        else:
            parts.append(f"{elapsed:.1f}s")
        return " | ".join(parts)

    def _draw(self):
        if self.total <= 0:
            return
        line = self._line()
        sys.stdout.write("\r" + line.ljust(self._drawn))
        sys.stdout.flush()
        self._drawn = max(self._drawn, len(line))

    def finish(self):
        with self.lock:
            self.done = self.total
            self._draw()
            print()


def _add_dataset_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--config",
        type=Path,
        help="Flat TOML file of experiment settings (flags override it)",
    )
    parser.add_argument(
        "--dataset",
        help="TUDataset name under the data root, or a dataset directory (default: MUTAG)",
    )
    parser.add_argument(
        "--data-root",
        type=Path,
        help="Directory holding TUDataset folders (default: $ADAPTKERNEL_DATA_ROOT or ./datasets)",
    )
    parser.add_argument(
        "--kernel",
        choices=[kind.value for kind in KernelKind],
        help="Substructure family: Weisfeiler-Lehman subtrees or shortest paths",
    )
    parser.add_argument("--wl-iterations", type=int, help="WL refinement depth")
    parser.add_argument(
        "--degree-labels",
        action="store_const",
        const=True,
        help="Use vertex degrees as initial labels even when node labels exist",
    )


def _add_experiment_arguments(parser: argparse.ArgumentParser) -> None:
    _add_dataset_arguments(parser)
    parser.add_argument("--lr", type=float, help="Adam learning rate")
    parser.add_argument("--epochs", type=int, help="Full-batch epochs per fold")
    parser.add_argument("--weight-decay", type=float, help="Decoupled weight decay")
    parser.add_argument("--att-hid", type=int, help="Attention hidden width")
    parser.add_argument("--nhid1", type=int, help="First MLP hidden width")
    parser.add_argument("--nhid2", type=int, help="Second MLP hidden width")
    parser.add_argument("--mlp-depth", type=int, choices=[2, 3], help="Number of MLP layers")
    parser.add_argument("--folds", type=int, help="Cross-validation folds (default: 10)")
    parser.add_argument("--repeats", type=int, help="Cross-validation repeats (default: 10)")
    parser.add_argument("--seed", type=int, help="Root seed for splits and initialisation")
    parser.add_argument(
        "--baseline",
        dest="adaptive",
        action="store_const",
        const=False,
        help="Train on the raw kernel with frozen uniform attention",
    )
    parser.add_argument("--workers", type=int, help="Parallel (repeat, fold) runs")
    parser.add_argument(
        "--attention-history",
        dest="record_attention",
        action="store_const",
        const=True,
        help="Record per-epoch attention scores",
    )
    parser.add_argument(
        "--output-dir",
        type=Path,
        help=f"Where reports are written (default: {DEFAULT_OUTPUT_DIR}/<dataset>-<kernel>)",
    )


_OVERRIDE_KEYS = (
    "dataset",
    "data_root",
    "kernel",
    "wl_iterations",
    "degree_labels",
    "lr",
    "epochs",
    "weight_decay",
    "att_hid",
    "nhid1",
    "nhid2",
    "mlp_depth",
    "folds",
    "repeats",
    "seed",
    "adaptive",
    "workers",
    "record_attention",
    "output_dir",
)


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    overrides: dict[str, Any] = {key: getattr(args, key, None) for key in _OVERRIDE_KEYS}
    return resolve_config(config_file=args.config, overrides=overrides)


def _output_dir(config: ExperimentConfig) -> Path:
    if config.output_dir is not None:
        return config.output_dir
    return DEFAULT_OUTPUT_DIR / f"{config.dataset_name}-{config.kernel.value}"


def _progress(args: argparse.Namespace, desc: str) -> Optional[RunProgressBar]:
    return None if args.verbose else RunProgressBar(total=0, desc=desc)


def _cmd_run(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    output_dir = _output_dir(config)
    progress_bar = _progress(args, config.dataset_name)
    report = run_experiment(
        config, progress=progress_bar.update if progress_bar is not None else None
    )
    if progress_bar is not None:
        progress_bar.finish()
    write_experiment_outputs(report, output_dir)
    print(
        f"{config.dataset_name} {config.kernel.value} (i={config.wl_iterations}): "
        f"{100 * report.mean:.2f} ± {100 * report.stderr:.2f}% "
        f"over {len(report.runs)} runs in {report.wall_clock:.1f}s"
    )
    print(f"Reports written to {output_dir}")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    iterations = range(args.min_iteration, args.max_iteration + 1)
    heatmap_iterations = range(1, args.heatmap_iterations + 1)
    if config.adaptive and not set(heatmap_iterations) <= set(iterations):
        raise ConfigError(
            f"heatmap iterations 1..{args.heatmap_iterations} are not all swept "
            f"(sweep covers {args.min_iteration}..{args.max_iteration})"
        )
    output_dir = _output_dir(config)
    progress_bar = _progress(args, f"{config.dataset_name} sweep")
    reports = sweep_wl_iterations(
        config,
        iterations,
        progress=progress_bar.update if progress_bar is not None else None,
    )
    if progress_bar is not None:
        progress_bar.finish()

    for report in reports:
        write_experiment_outputs(report, output_dir / f"wl{report.config.wl_iterations}")
        print(
            f"i={report.config.wl_iterations}: "
            f"{100 * report.mean:.2f} ± {100 * report.stderr:.2f}%"
        )
    write_sweep_table(reports, output_dir / "sweep.csv")

    if args.heatmap_iterations > 0:
        if not config.adaptive:
            logger.warning("baseline runs have no attention scores; skipping heatmap")
        else:
            by_iteration = {report.config.wl_iterations: report for report in reports}
            export_attention_heatmap(
                by_iteration,
                output_dir / "attention_heatmap.csv",
                first_k=args.heatmap_features,
                iterations=heatmap_iterations,
            )
    print(f"Sweep written to {output_dir}")
    return 0


def _cmd_features(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    dataset = load_dataset(config)
    features = build_feature_matrix(dataset, config.kernel, config.wl_iterations)
    output = args.output or Path(f"{config.dataset_name}_{config.kernel.value}_features.txt")
    write_feature_matrix(features, output)
    print(f"{features.num_graphs} x {features.num_features} feature matrix written to {output}")
    return 0


def _cmd_gram(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    dataset = load_dataset(config)
    features = build_feature_matrix(dataset, config.kernel, config.wl_iterations)
    kernel = gram(features.values, config.kernel)
    output = args.output or Path(f"{config.dataset_name}_{config.kernel.value}_gram.txt")
    write_gram_matrix(kernel, output)
    print(f"{kernel.size} x {kernel.size} kernel matrix written to {output}")
    return 0


def _cmd_gradcheck(args: argparse.Namespace) -> int:
    report = composite_gradient_check(seed=args.seed, tolerance=args.tolerance)
    print(f"max relative error: {report.max_relative_error:.3e}")
    print(f"mean relative error: {report.mean_relative_error:.3e}")
    print(f"coordinates checked: {report.num_checked}")
    if not report.passed:
        print(
            f"gradient check failed at {report.worst_parameter}[{report.worst_index}]",
            file=sys.stderr,
        )
        return 1
    return 0


def _cmd_summary(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    summary = dataset_summary(load_dataset(config))
    print(f"dataset:       {summary.name}")
    print(f"graphs:        {summary.num_graphs}")
    print(f"classes:       {summary.num_classes}")
    print(f"class counts:  {', '.join(str(n) for n in summary.class_counts)}")
    print(f"max vertices:  {summary.max_vertices}")
    print(f"mean vertices: {summary.mean_vertices:.2f}")
    print(f"mean edges:    {summary.mean_edges:.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adaptkernel",
        description="Attention-weighted graph kernels with an MLP classifier",
    )
    parser.add_argument(
        "--version", "-V", action="version", version=f"%(prog)s {__version__}"
    )
    parser.add_argument(
        "--verbose",
        "-v",
        action="store_true",
        help="Log per-fold progress instead of showing a progress bar",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="Repeated cross-validation on one dataset")
    _add_experiment_arguments(run)
    run.set_defaults(handler=_cmd_run)

    sweep = subparsers.add_parser("sweep", help="Cross-validation for a range of WL iterations")
    _add_experiment_arguments(sweep)
    sweep.add_argument("--min-iteration", type=int, default=1, help="First WL depth (default: 1)")
    sweep.add_argument("--max-iteration", type=int, default=10, help="Last WL depth (default: 10)")
    sweep.add_argument(
        "--heatmap-features",
        type=int,
        default=DEFAULT_HEATMAP_FEATURES,
        help="Features per heatmap row (default: 13)",
    )
    sweep.add_argument(
        "--heatmap-iterations",
        type=int,
        default=0,
        help="Export an attention heatmap for iterations 1..m (default: off)",
    )
    sweep.set_defaults(handler=_cmd_sweep)

    features = subparsers.add_parser("features", help="Write the substructure count matrix")
    _add_dataset_arguments(features)
    features.add_argument("--output", "-o", type=Path, help="Output text file")
    features.set_defaults(handler=_cmd_features)

    gram_parser = subparsers.add_parser("gram", help="Write the unweighted kernel matrix")
    _add_dataset_arguments(gram_parser)
    gram_parser.add_argument("--output", "-o", type=Path, help="Output text file")
    gram_parser.set_defaults(handler=_cmd_gram)

    gradcheck = subparsers.add_parser("gradcheck", help="Finite-difference check of the model")
    gradcheck.add_argument("--seed", type=int, default=0, help="Toy data and parameter seed")
    gradcheck.add_argument(
        "--tolerance", type=float, default=1e-4, help="Maximum relative error (default: 1e-4)"
    )
    gradcheck.set_defaults(handler=_cmd_gradcheck)

    summary = subparsers.add_parser("summary", help="Dataset statistics")
    _add_dataset_arguments(summary)
    summary.set_defaults(handler=_cmd_summary)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.verbose:
        logging.basicConfig(level=logging.DEBUG, format="%(levelname)s: %(message)s")
    else:
        logging.basicConfig(level=logging.WARNING, format="%(message)s")

    try:
        return args.handler(args)
    except (AdaptKernelError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
