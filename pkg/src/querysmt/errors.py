"""Shared exception types.

FormatError covers malformed persisted artifacts (binary LM, phrase table);
PipelineError carries the failing stage name so the CLI can report it and
exit nonzero.
"""
from __future__ import annotations


class FormatError(ValueError):
    """A persisted artifact does not match its documented layout."""


class PipelineError(RuntimeError):
    """A training pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
