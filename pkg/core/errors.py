"""Exception hierarchy shared by every package."""
from __future__ import annotations

from typing import Any


class L2SError(Exception):
    """Base class for all errors raised by the toolkit."""


class ConfigurationError(L2SError, ValueError):
    """Invalid configuration, scene spec or CLI input."""


class SceneParseError(L2SError, ValueError):
    """A scene container could not be parsed.

    ``offset`` is the byte offset of the failure inside a binary file, or
    ``None`` when the problem lies in the JSON metadata.
    """

    def __init__(self, message: str, *, path: str | None = None, offset: int | None = None) -> None:
        location = path or "<memory>"
        if offset is not None:
            location = f"{location} @ byte {offset}"
        super().__init__(f"{message} ({location})")
        self.path = path
        self.offset = offset


class ShapeError(L2SError, ValueError):
    """Two operands have incompatible shapes."""

    def __init__(self, op: str, left: tuple[int, ...], right: tuple[int, ...] | None = None) -> None:
        if right is None:
            message = f"{op}: unexpected shape {left}"
        else:
            message = f"{op}: incompatible shapes {left} and {right}"
        super().__init__(message)
        self.op = op
        self.left = left
        self.right = right


class NumericalError(L2SError, ArithmeticError):
    """Non-finite values appeared where finite values are required."""

    def __init__(self, message: str, **context: Any) -> None:
        details = ", ".join(f"{key}={value}" for key, value in context.items())
        super().__init__(f"{message} ({details})" if details else message)
        self.context = context


class EmptyCloudError(L2SError, ValueError):
    """An operation would leave a Gaussian cloud without primitives."""


__all__ = [
    "ConfigurationError",
    "EmptyCloudError",
    "L2SError",
    "NumericalError",
    "SceneParseError",
    "ShapeError",
]
