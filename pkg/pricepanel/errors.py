"""
Exception hierarchy shared by the pipeline stages.

Row-level problems never raise: they are collected as rejects. Everything
below is fatal for the operation that raised it.
"""


class PanelError(Exception):
    """Base class for every error raised by pricepanel."""


class IngestError(PanelError):
    pass


class HeaderMismatchError(IngestError):
    pass


class DuplicateKeyError(IngestError):
    pass


class PatternError(PanelError):
    """A SUP pattern could not be compiled (e.g. unterminated escape)."""


class PipelineError(PanelError):
    pass


class EstimationError(PanelError):
    pass


class ConvergenceError(EstimationError):
    def __init__(self, iterations: int, residual: float) -> None:
        super().__init__(f"demeaning did not converge after {iterations} sweeps (max change {residual:.3e})")
        self.iterations = iterations
        self.residual = residual


class RankDeficientError(EstimationError):
    pass


class InsufficientClustersError(EstimationError):
    pass


class SummaryError(PanelError):
    pass


class StageError(PanelError):
    """Wraps a failure with the name of the CLI stage that produced it."""

    def __init__(self, stage: str, message: str) -> None:
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.message = message
