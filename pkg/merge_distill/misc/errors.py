# -*- coding: utf-8 -*-

"""Exception types shared by all stages, with the CLI exit code each one
maps to.
"""


class MergeDistillError(Exception):
    """Base class of all library errors."""
    exit_code = 1


class ValidationError(MergeDistillError, ValueError):
    """Invalid input, configuration or precondition."""
    exit_code = 2


class DataExhaustedError(ValidationError):
    """A language ran out of examples and reshuffling is disabled."""


class IntegrityError(MergeDistillError):
    """Corrupt artifact, or artifacts produced from different vocabularies."""
    exit_code = 3


class TrainingError(MergeDistillError):
    """Training produced a non-finite loss or parameter."""
    exit_code = 1
