from typing import Optional

from pydantic import ValidationError


EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INTERNAL = 3


class CfireError(Exception):
    """Base class for errors raised by the rule extraction pipeline."""


class InputError(CfireError, ValueError):
    """Malformed or inconsistent input data (shapes, non-finite values, unparseable files)."""


class ConfigError(CfireError, ValueError):
    """A parameter is outside its allowed range or the requested operation is ill-posed."""


class InternalError(CfireError, RuntimeError):
    """An invariant the pipeline guarantees was violated."""


class TrainingDivergenceError(CfireError, RuntimeError):
    def __init__(self, epoch: int, learning_rate: float, loss: Optional[float] = None):
        self.epoch = epoch
        self.learning_rate = learning_rate
        self.loss = loss
        super().__init__(
            f"Training diverged at epoch {epoch} (loss={loss}); "
            f"try a smaller learning_rate than {learning_rate}."
        )


def exit_code_for(exc: BaseException) -> int:
    """Map an exception raised by a command to the CLI exit code."""
    # pandas parse errors subclass ValueError, so they land in the input bucket too
    if isinstance(exc, (InputError, ConfigError, ValidationError, FileNotFoundError)):
        return EXIT_INPUT
    if isinstance(exc, (InternalError, TrainingDivergenceError, AssertionError)):
        return EXIT_INTERNAL
    if isinstance(exc, ValueError):
        return EXIT_INPUT
    return EXIT_INTERNAL
