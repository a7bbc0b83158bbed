# Bilayer: deep learning for large bending of bilayer plates
#
# Copyright (C) 2024-2026 The Bilayer developers
#
# This file is part of Bilayer.
#
# Bilayer is free software: you can redistribute it and/or modify it
# under the terms of the GNU Lesser General Public License as published
# by the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# Bilayer is distributed in the hope that it will be useful, but
# WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the GNU
# Lesser General Public License for more details.
#
# You should have received a copy of the GNU Lesser General Public
# License along with Bilayer. If not, see <https://www.gnu.org/licenses/>.
"""
Module for common core functionality.
"""

from __future__ import annotations

from typing import Any

import numpy as np


class NumericalError(ArithmeticError):
    """
    Error raised when a loss, gradient, or energy density is not finite.

    The *context* mapping records where the failure happened, e.g. the
    training step, the stage label, or the index of the offending sample.
    """

    def __init__(self, message: str, **context: Any) -> None:
        self.message = message
        self.context: dict[str, Any] = dict(context)
        if context:
            details = ", ".join(f"{k}={v!r}" for k, v in context.items())
            message = f"{message} ({details})"
        super().__init__(message)

    def with_context(self, **context: Any) -> NumericalError:
        """Return a new error with additional context."""
        return NumericalError(self.message, **{**self.context, **context})


class ConfigError(ValueError):
    """
    Error in an experiment configuration.  If *path* and *line* are known,
    the message is anchored to them as ``path:line: message``.
    """

    def __init__(
        self,
        message: str,
        *,
        path: str | None = None,
        line: int | None = None,
    ) -> None:
        self.path = path
        self.line = line
        if path is not None and line is not None:
            message = f"{path}:{line}: {message}"
        elif path is not None:
            message = f"{path}: {message}"
        super().__init__(message)


class DecompositionError(ValueError):
    """
    Error raised when a domain cannot be split into nested subdomains.
    """


class UnsupportedLiftError(ValueError):
    """
    Error raised when no analytic boundary lift exists for a clamp.
    """


def check_finite(name: str, value: Any, **context: Any) -> None:
    """
    Raise :class:`NumericalError` if *value* contains non-finite entries.
    """
    arr = np.asarray(value)
    if np.all(np.isfinite(arr)):
        return
    bad = np.flatnonzero(~np.isfinite(arr.reshape(-1)))
    msg = f"non-finite {name}"
    raise NumericalError(msg, **context, first_index=int(bad[0]), count=bad.size)


class ExceptionExplainer:
    """
    Context manager that adds a note to exceptions.
    """

    def __init__(
        self,
        exc_type: type[BaseException] | tuple[type[BaseException], ...],
        note: str,
    ) -> None:
        self.exc_type = exc_type
        self.note = note

    def __enter__(self) -> None:
        pass

    def __exit__(self, exc_type, exc_value, traceback) -> None:
        if exc_type and issubclass(exc_type, self.exc_type):
            try:
                exc_value.add_note(self.note)
            except AttributeError:
                pass


external_dependency_explainer = ExceptionExplainer(
    ModuleNotFoundError,
    "You are trying to import a Bilayer module that relies on a missing "
    "optional dependency, such as the rich package used for progress bars. "
    "Optional dependencies are installed with the 'all' extra of Bilayer. "
    "Please install the missing packages, and this error will disappear.",
)
