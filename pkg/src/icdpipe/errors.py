"""Exception and warning types shared across the package."""

from __future__ import annotations


class IcdPipeError(Exception):
    """Base class for all package errors."""


class ConfigError(IcdPipeError, ValueError):
    """Invalid configuration: bad hyperparameter, stage order, grid, schema."""


class DataError(IcdPipeError, ValueError):
    """Data violates an operation's precondition: unreadable file, bad token,
    single-class labels, all-missing feature, emptied class, and similar."""


class UnseenCategoryWarning(UserWarning):
    """A category absent from the training vocabulary appeared at apply time."""
