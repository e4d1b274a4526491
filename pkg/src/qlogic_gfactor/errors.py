from __future__ import annotations

from collections.abc import Sequence


class SimulationError(Exception):
    """Base error; ``exit_code`` is the process status the CLI maps it to."""

    exit_code = 2


class UsageError(SimulationError):
    exit_code = 1


class DomainError(SimulationError, ValueError):
    """An input outside the physical domain of a formula."""


class ConfigError(SimulationError):
    def __init__(
        self,
        message: str,
        *,
        key: str | None = None,
        line: int | None = None,
        column: int | None = None,
    ) -> None:
        super().__init__(message)
        self.key = key
        self.line = line
        self.column = column


class UnstableTrapError(SimulationError):
    def __init__(self, message: str, *, frequencies: Sequence[complex] = ()) -> None:
        super().__init__(message)
        self.frequencies = tuple(frequencies)


class AlignmentError(SimulationError):
    pass


class TruncationError(SimulationError):
    exit_code = 3

    def __init__(self, message: str, *, top_population: float) -> None:
        super().__init__(message)
        self.top_population = top_population


class EstimationError(SimulationError):
    exit_code = 3

    def __init__(self, message: str, *, residuals: Sequence[float] = ()) -> None:
        super().__init__(message)
        self.residuals = tuple(float(r) for r in residuals)


class OutputError(SimulationError):
    exit_code = 4
