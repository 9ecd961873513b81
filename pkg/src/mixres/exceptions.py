"""Structured errors raised by evaluation and training code."""

from __future__ import annotations


class DimensionError(ValueError):
    """An input or parameter array has the wrong shape for its spec."""


class NonFiniteError(FloatingPointError):
    """A NaN or infinity appeared where a finite value is required.

    ``sample_index`` points at the offending batch row when the problem was
    detected in a per-sample residual, and is None for parameter checks.
    """

    def __init__(self, message: str, sample_index: int | None = None):
        super().__init__(message)
        self.sample_index = sample_index
