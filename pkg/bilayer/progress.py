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
Module for the progress reporting protocol.
"""

from __future__ import annotations

from typing import Protocol


class Progress(Protocol):
    """
    Protocol for progress reporting.  Implementations of this protocol are
    meant to be used as a context manager::

        with MyProgress("training") as progress:
            for i, stage in enumerate(stages):
                progress.update(i, len(stages))

                # report progress and metrics of an individual stage
                with progress.task(stage) as task:
                    for step in range(epochs):
                        task.update(step + 1, epochs)
                        task.metrics(E=energy, C=tolerance)

    """

    def update(self, current: int | None = None, total: int | None = None) -> None:
        """
        Update progress.
        """

    def metrics(self, **values: float) -> None:
        """
        Report the current values of named metrics.
        """

    def task(self, label: str) -> Progress:
        """
        Create a task with the given label.
        """

    def __enter__(self) -> Progress:
        """
        Start progress.
        """

    def __exit__(self, *exc: object) -> None:
        """
        Stop progress.
        """


class NoProgress:
    """
    Dummy progress reporter.
    """

    def update(self, current: int | None = None, total: int | None = None) -> None:
        pass

    def metrics(self, **values: float) -> None:
        pass

    def task(self, label: str) -> NoProgress:
        return NoProgress()

    def __enter__(self) -> NoProgress:
        return self

    def __exit__(self, *exc: object) -> None:
        pass
