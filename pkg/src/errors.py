from __future__ import annotations

from typing import Optional


class SimulationError(RuntimeError):
    """Base error; `exit_code` is what the CLI returns when this escapes a run."""

    exit_code: int = 4


class InvalidParameterError(SimulationError, ValueError):
    pass


class ConfigError(InvalidParameterError):
    exit_code = 2

    def __init__(self, message: str, *, field: Optional[str] = None, line: Optional[int] = None):
        where = []
        if field:
            where.append(f"field={field}")
        if line:
            where.append(f"line={line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.field = field
        self.line = line


class UnstableRegimeError(SimulationError):
    exit_code = 3

    def __init__(self, message: str, *, critical_omega: float, critical_coupling: float):
        super().__init__(message)
        self.critical_omega = critical_omega
        self.critical_coupling = critical_coupling


class NumericalDegeneracyError(SimulationError):
    def __init__(self, message: str, *, residual: float):
        super().__init__(f"{message} residual={residual:.3e}")
        self.residual = residual


class StepTooLargeError(SimulationError):
    pass


class UnsupportedStateError(SimulationError):
    pass


class DimensionCapError(SimulationError):
    pass


class ConvergenceError(SimulationError):
    def __init__(self, message: str, *, residual: float):
        super().__init__(f"{message} residual={residual:.3e}")
        self.residual = residual


class ReadoutError(SimulationError):
    pass
