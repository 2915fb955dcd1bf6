"""Experiment configuration: per-dataset defaults, flat TOML files and overrides."""

from __future__ import annotations

import os
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping, Optional

from .exceptions import ConfigError
from .features import KernelKind

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DATA_ROOT_ENV = "ADAPTKERNEL_DATA_ROOT"
DEFAULT_DATA_ROOT = Path("datasets")

# Published per-dataset training settings; epochs 500, att_hid 50, nhid2 300 throughout.
DATASET_PRESETS: dict[str, dict[str, Any]] = {
    "MUTAG": {"lr": 0.006, "weight_decay": 5e-8, "nhid1": 150},
    "PTC_MR": {"lr": 0.004, "weight_decay": 5e-8, "nhid1": 50},
    "PROTEINS": {"lr": 0.0004, "weight_decay": 5e-6, "nhid1": 50},
    "IMDB-BINARY": {"lr": 0.006, "weight_decay": 5e-8, "nhid1": 150},
    "IMDB-MULTI": {"lr": 0.006, "weight_decay": 5e-8, "nhid1": 150},
}


def default_data_root() -> Path:
    return Path(os.environ.get(DATA_ROOT_ENV, DEFAULT_DATA_ROOT))


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "MUTAG"
    data_root: Path = field(default_factory=default_data_root)
    kernel: KernelKind = KernelKind.WL
    wl_iterations: int = 1
    lr: float = 0.006
    epochs: int = 500
    weight_decay: float = 5e-8
    att_hid: int = 50
    nhid1: int = 150
    nhid2: int = 300
    mlp_depth: int = 3
    folds: int = 10
    repeats: int = 10
    seed: int = 0
    adaptive: bool = True
    degree_labels: bool = False
    workers: int = 1
    record_attention: bool = False
    output_dir: Optional[Path] = None

    def __post_init__(self) -> None:
        self._check_types()
        try:
            object.__setattr__(self, "kernel", KernelKind(self.kernel))
        except ValueError:
            raise ConfigError(f"kernel must be 'wl' or 'sp', got {self.kernel!r}") from None
        object.__setattr__(self, "data_root", Path(self.data_root))
        if self.output_dir is not None:
            object.__setattr__(self, "output_dir", Path(self.output_dir))
        checks = [
            (self.folds >= 2, f"folds must be >= 2, got {self.folds}"),
            (self.repeats >= 1, f"repeats must be >= 1, got {self.repeats}"),
            (self.epochs >= 1, f"epochs must be >= 1, got {self.epochs}"),
            (self.wl_iterations >= 0, f"wl_iterations must be >= 0, got {self.wl_iterations}"),
            (min(self.att_hid, self.nhid1, self.nhid2) >= 1, "all widths must be >= 1"),
            (self.mlp_depth in (2, 3), f"mlp_depth must be 2 or 3, got {self.mlp_depth}"),
            (self.lr > 0, f"lr must be positive, got {self.lr}"),
            (self.weight_decay >= 0, f"weight_decay must be >= 0, got {self.weight_decay}"),
            (0 <= self.seed < 2**32, f"seed must lie in [0, 2**32), got {self.seed}"),
            (self.workers >= 1, f"workers must be >= 1, got {self.workers}"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)

    def _check_types(self) -> None:
        """Reject values of the wrong type; integers are accepted for float fields."""
        for name in _INT_FIELDS:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{name} must be an integer, got {value!r}")
        for name in _FLOAT_FIELDS:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{name} must be a number, got {value!r}")
            object.__setattr__(self, name, float(value))
        for name in _BOOL_FIELDS:
            value = getattr(self, name)
            if not isinstance(value, bool):
                raise ConfigError(f"{name} must be true or false, got {value!r}")
        if not isinstance(self.dataset, str):
            raise ConfigError(f"dataset must be a string, got {self.dataset!r}")
        for name in ("data_root", "output_dir"):
            value = getattr(self, name)
            if value is not None and not isinstance(value, (str, os.PathLike)):
                raise ConfigError(f"{name} must be a path, got {value!r}")

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return (self.nhid1, self.nhid2) if self.mlp_depth == 3 else (self.nhid1,)

    @property
    def dataset_path(self) -> Path:
        """``dataset`` itself when it is a directory, otherwise ``data_root / dataset``."""
        candidate = Path(self.dataset)
        if candidate.is_dir():
            return candidate
        return self.data_root / self.dataset

    @property
    def dataset_name(self) -> str:
        return Path(self.dataset).name

    def with_overrides(self, **overrides: Any) -> ExperimentConfig:
        unknown = set(overrides) - _FIELD_NAMES
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
        return replace(self, **overrides)

    def to_dict(self) -> dict[str, Any]:
        """JSON-friendly echo of every field."""
        echo = asdict(self)
        echo["kernel"] = self.kernel.value
        echo["data_root"] = str(self.data_root)
        echo["output_dir"] = str(self.output_dir) if self.output_dir is not None else None
        return echo


_FIELD_NAMES = {f.name for f in fields(ExperimentConfig)}
_INT_FIELDS = (
    "wl_iterations",
    "epochs",
    "att_hid",
    "nhid1",
    "nhid2",
    "mlp_depth",
    "folds",
    "repeats",
    "seed",
    "workers",
)
_FLOAT_FIELDS = ("lr", "weight_decay")
_BOOL_FIELDS = ("adaptive", "degree_labels", "record_attention")


def load_config_file(path: Path | str) -> dict[str, Any]:
    """Read a flat ``key = value`` TOML file.

    Raises:
        ConfigError: The file is not valid TOML, nests tables, or names unknown keys.
    """
    path = Path(path)
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    nested = [key for key, value in data.items() if isinstance(value, dict)]
    if nested:
        raise ConfigError(f"{path}: nested tables are not supported ({', '.join(nested)})")
    unknown = set(data) - _FIELD_NAMES
    if unknown:
        raise ConfigError(f"{path}: unknown configuration keys: {', '.join(sorted(unknown))}")
    return data


def resolve_config(
    dataset: Optional[str] = None,
    config_file: Optional[Path | str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> ExperimentConfig:
    """Merge dataclass defaults < dataset preset < config file < explicit overrides."""
    from_file = load_config_file(config_file) if config_file is not None else {}
    explicit = {key: value for key, value in (overrides or {}).items() if value is not None}
    name = explicit.get("dataset") or dataset or from_file.get("dataset") or ExperimentConfig.dataset
    preset = DATASET_PRESETS.get(Path(str(name)).name.upper(), DATASET_PRESETS["MUTAG"])
    merged: dict[str, Any] = {**preset, **from_file, **explicit, "dataset": str(name)}
    return ExperimentConfig().with_overrides(**merged)
