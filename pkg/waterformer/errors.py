"""Exception hierarchy shared by every WaterFormer module.

Each error carries a ``detail`` message and the exit code the command-line
entry point reports for it:

- 2: usage/configuration problems
- 3: data problems (bad shapes, bad files, bad checkpoints)
- 4: runtime failures (divergence)
"""


class WaterFormerError(Exception):
    """Base class. ``detail`` is shown to the user verbatim."""

    exit_code: int = 4

    def __init__(self, detail: str) -> None:
        super().__init__(detail)
        self.detail = detail


class ConfigurationError(WaterFormerError):
    """Unknown preset, invalid hyperparameter combination or config file."""

    exit_code = 2


class DataError(WaterFormerError):
    """Input data the operation cannot work with."""

    exit_code = 3


class DimensionError(DataError):
    """Shapes disagree or an image is too small for the requested window."""


class DomainError(DataError):
    """Values outside the domain an operation is defined on."""


class IngestionError(DataError):
    """A file or directory could not be read as expected."""


class IntegrityError(DataError):
    """A checkpoint archive is corrupt or not a checkpoint at all."""


class IncompatibleCheckpointError(DataError):
    """A checkpoint was written by an unsupported format version."""


class DivergenceError(WaterFormerError):
    """Training produced non-finite values."""

    exit_code = 4
