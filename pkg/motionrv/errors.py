"""Exception hierarchy for motionrv.

Every error raised on bad data or configuration derives from
:class:`MotionRvError`, which the CLI maps to exit code 1.
"""


class MotionRvError(Exception):
    r"""Base class for all motionrv errors"""


class DataFormatError(MotionRvError, ValueError):
    r"""A file could not be parsed. Messages carry ``path:line``."""

    def __init__(self, message: str, path: str | None = None,
                 line: int | None = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{location}{message}")


class SignalError(MotionRvError, ValueError):
    r"""Invalid time series or RV computation input"""


class FilterDesignError(MotionRvError, ValueError):
    r"""Band edges or order cannot be realized at the given sample rate"""


class ShapeError(MotionRvError, ValueError):
    r"""Array shapes or clocks do not line up"""


class NonFiniteError(MotionRvError, ArithmeticError):
    r"""A NaN or infinity appeared inside the network"""

    def __init__(self, layer: str, stage: str = "forward"):
        self.layer = layer
        self.stage = stage
        super().__init__(f"non-finite values in {stage} pass of "
                         f"layer '{layer}'")


class TrainingDivergedError(MotionRvError, ArithmeticError):
    r"""Training loss became non-finite"""

    def __init__(self, epoch: int, batch: int, loss: float):
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
        super().__init__(f"training diverged at epoch {epoch}, "
                         f"batch {batch} (loss={loss})")


class ScenarioError(MotionRvError, ValueError):
    r"""Invalid synthetic scenario. ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class ScanMismatchError(MotionRvError, ValueError):
    r"""Two score sets or sample sets do not cover the same scans"""

    def __init__(self, only_a: list[str], only_b: list[str]):
        self.only_a = only_a
        self.only_b = only_b
        super().__init__(f"scan sets differ: only in first={only_a}, "
                         f"only in second={only_b}")


class DegenerateSeriesError(MotionRvError, ValueError):
    r"""A series has (near) zero variance where a correlation is needed"""
