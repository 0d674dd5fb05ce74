"""Exceptions raised across the app."""
from typing import List, Optional


class BasisMismatchError(ValueError):
    """Two operators written in different bases were combined."""


class ConfigError(ValueError):
    """Run configuration failed to parse or validate.

    Attributes:
        messages: One line per problem, formatted ``line N: path: message``.
    """

    def __init__(self, messages: List[str]):
        self.messages = list(messages)
        super().__init__("; ".join(self.messages))


class NonConvergenceError(RuntimeError):
    """Coding-sequence search ended above the residual tolerance."""

    def __init__(self, residual: float, tolerance: float, restarts: Optional[int] = None):
        self.residual = residual
        self.tolerance = tolerance
        self.restarts = restarts
        super().__init__(
            f"coding search did not converge: residual {residual:.3e} > tolerance {tolerance:.1e}"
            + (f" after {restarts} restarts" if restarts is not None else "")
        )
