#!/usr/bin/env python3
"""
Transmutation Toolkit - Errors and Warnings
Exception and warning taxonomy shared by every stage of the pipeline
"""

from typing import Optional


class TransmutationError(Exception):
    """Base error; ``stage`` is filled in by the job runner"""

    def __init__(self, message: str, stage: Optional[str] = None):
        super().__init__(message)
        self.stage = stage

    def with_stage(self, stage: str) -> "TransmutationError":
        if self.stage is None:
            self.stage = stage
        return self


class DomainError(TransmutationError, ValueError):
    """Input outside the region where a representation or routine is defined"""


class OrderError(DomainError):
    """Requested order exceeds what was tabulated or what doubles can hold"""


class SingularPotential(DomainError):
    """Potential is not finite at a sample point"""


class SeedVanishes(TransmutationError):
    """Seed solution f comes too close to zero on the grid"""


class StepUnderflow(TransmutationError):
    """Adaptive integrator asked for a step below the floor"""


class RankDeficient(TransmutationError):
    """Least-squares matrix lost full column rank"""

    def __init__(self, message: str, column: int = -1, stage: Optional[str] = None):
        super().__init__(message, stage)
        self.column = column


class BasisDegenerate(TransmutationError):
    """Collocation basis is numerically dependent"""


class ScanTooCoarse(TransmutationError):
    """Sign-change brackets are too close for the scan density"""


class ParseError(TransmutationError):
    """Expression text could not be parsed"""

    def __init__(self, text: str, position: int, expected: str):
        self.text = text
        self.position = position
        self.expected = expected
        super().__init__(self._render())

    def _render(self) -> str:
        caret = " " * self.position + "^"
        return f"expected {self.expected} at position {self.position}\n  {self.text}\n  {caret}"


class NumericalWarning(UserWarning):
    """Base class for results that were computed but should not be trusted blindly"""


class TailStagnant(NumericalWarning):
    """Coefficients are not decreasing over the tail window"""


class CancellationWarning(NumericalWarning):
    """Alternating sum lost most of its significant digits"""


class MagnitudeWarning(NumericalWarning):
    """Evaluation outside the range where the series is well resolved"""


class NearDegenerate(NumericalWarning):
    """Two roots closer than the deduplication threshold"""


class ResidualAboveTolerance(NumericalWarning):
    """Eigenfunction misses the differential equation by more than the requested tolerance"""
