"""Exception hierarchy shared by every stage of the pipeline.

The CLI maps these onto exit codes: :class:`PreconditionError` and
:class:`ConfigError` exit with 2, :class:`DataError` (and its subclasses)
with 3, anything else with 1.
"""

from __future__ import annotations


class IomtXaiError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(IomtXaiError):
    """Invalid or inconsistent pipeline configuration."""


class PreconditionError(IomtXaiError):
    """An operation was called with arguments violating its precondition."""


class DataError(IomtXaiError):
    """The data itself cannot support the requested operation."""


class IngestionError(DataError):
    """A CSV file could not be turned into a :class:`FeatureTable`."""


class NoUsableFeaturesError(DataError):
    def __init__(self, detail: str = "") -> None:
        msg = "no usable features"
        if detail:
            msg = f"{msg}: {detail}"
        super().__init__(msg)


class DivergenceError(DataError):
    """Training produced a non-finite or increasing loss."""
