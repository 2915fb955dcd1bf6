"""Exception hierarchy for adaptkernel."""

from pathlib import Path
from typing import Optional


class AdaptKernelError(Exception):
    """Base class for every error raised on purpose by adaptkernel."""


class DatasetLoadError(AdaptKernelError, FileNotFoundError):
    """A mandatory dataset file is missing or unreadable."""

    def __init__(self, path: Path, reason: str = "missing mandatory file"):
        self.path = Path(path)
        super().__init__(f"{reason}: {self.path}")


class DatasetFormatError(AdaptKernelError, ValueError):
    """A dataset file is readable but its content is malformed."""

    def __init__(self, path: Path, message: str, line: Optional[int] = None):
        self.path = Path(path)
        self.line = line
        location = f"{self.path}:{line}" if line is not None else str(self.path)
        super().__init__(f"{location}: {message}")


class ConfigError(AdaptKernelError, ValueError):
    """An experiment configuration value or key is invalid."""


class ContractViolation(AdaptKernelError, RuntimeError):
    """Two cooperating components disagree about a precondition."""


class TrainingError(AdaptKernelError):
    """Training produced non-finite values and was aborted."""

    def __init__(
        self,
        message: str,
        epoch: Optional[int] = None,
        repeat: Optional[int] = None,
        fold: Optional[int] = None,
    ):
        self.message = message
        self.epoch = epoch
        self.repeat = repeat
        self.fold = fold
        super().__init__(self._render())

    def _render(self) -> str:
        context = [
            f"{name}={value}"
            for name, value in (("repeat", self.repeat), ("fold", self.fold), ("epoch", self.epoch))
            if value is not None
        ]
        if not context:
            return self.message
        return f"{self.message} ({', '.join(context)})"

    def with_context(self, repeat: int, fold: int) -> "TrainingError":
        return TrainingError(self.message, epoch=self.epoch, repeat=repeat, fold=fold)


class CheckpointError(AdaptKernelError):
    """A checkpoint file cannot be restored."""
