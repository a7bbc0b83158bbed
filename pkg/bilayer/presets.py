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
Module for the preset experiments.

Each preset is the text of a configuration file, which can be printed with
``bilayer preset <name>`` and run with ``bilayer run <name>``.

"""

from __future__ import annotations

from textwrap import dedent

# standard plate clamped along its left edge
_STANDARD_PLATE = """\
[domain]
outer = -5 5 -2 2
clamp = -5 -2 -5 2
"""


def _cylinder(
    name: str,
    alpha: str,
    beta: str,
    epochs: str,
    pretrain: int = 0,
) -> str:
    """Preset for isotropic curvature on the standard plate."""
    schedule = f"epochs = {epochs}\n"
    if pretrain:
        schedule = f"pretrain = {pretrain}\nepochs-pre = 50000\n" + schedule
    return (
        f"# isotropic curvature alpha = {alpha} on the standard plate\n"
        + _STANDARD_PLATE
        + "\n[energy]\n"
        + f"Z = -{alpha} 0 0 -{alpha}\n"
        + f"beta = {beta}\n"
        + "\n[schedule]\n"
        + schedule
        + "\n[evaluation]\n"
        + f"alpha = {alpha}\n"
        + "\n[run]\n"
        + f"output = {name}\n"
    )


PRESETS: dict[str, str] = {
    "example1": _cylinder("example1", "1", "500", "200000"),
    "example2": _cylinder("example2", "2.5", "500", "1000000"),
    "example3": _cylinder("example3", "5", "500", "2000000"),
    "example3-pretrain": _cylinder("example3-pretrain", "5", "100", "500000", 5),
    "example4": _cylinder("example4", "10", "1000", "2000000", 5),
    "example4-direct": _cylinder("example4-direct", "10", "1000", "3000000"),
    "oshape": dedent(
        """\
        # O-shaped plate clamped along its left edge
        [domain]
        outer = -5 5 -2 2
        hole = -10/3 10/3 -4/3 4/3
        clamp = -5 -2 -5 2

        [energy]
        Z = -5 0 0 -5
        beta = 1000

        [schedule]
        pretrain = 5
        epochs-pre = 50000
        epochs = 1000000

        [evaluation]
        alpha = 5
        reference-energy = 277.78

        [run]
        output = oshape
        """
    ),
    "oshape-corner": dedent(
        """\
        # O-shaped plate clamped at its lower left corner, with trained g1
        [domain]
        outer = -5 5 -2 2
        hole = -13/3 13/3 -4/3 4/3
        clamp =
            -5 -2 -5 -4/3
            -5 -2 -13/3 -2

        [energy]
        Z = -1 0 0 -1
        beta = 500

        [schedule]
        pretrain = 5
        epochs-pre = 50000
        epochs = 1000000

        [g1]
        target = 1 1 19/3
        steps = 50000

        [run]
        output = oshape-corner
        """
    ),
    "corkscrew": dedent(
        """\
        # anisotropic curvature, clamped along the bottom edge
        [domain]
        outer = -2 2 -3 3
        clamp = -2 -3 2 -3

        [energy]
        Z = -3 2 2 -3
        beta = 500

        [schedule]
        epochs = 200000

        [run]
        output = corkscrew
        """
    ),
    "cigar": dedent(
        """\
        # anisotropic curvature with free boundary
        # the matrix has eigenvalues 1 and 5
        [domain]
        outer = -5 5 -2 2

        [energy]
        Z = 3 -2 -2 3
        beta = 500

        [schedule]
        epochs = 200000

        [run]
        output = cigar
        """
    ),
    "helix": dedent(
        """\
        # narrow plate with free boundary rolls into a helix
        [domain]
        outer = -8 8 -0.5 0.5

        [energy]
        Z = -1 3/2 3/2 -1
        beta = 500

        [schedule]
        epochs = 200000

        [run]
        output = helix
        """
    ),
}


def preset(name: str) -> str:
    """
    Return the configuration text of the preset *name*.
    """
    try:
        return PRESETS[name]
    except KeyError:
        expected = ", ".join(PRESETS)
        msg = f"unknown preset {name!r} (expected one of {expected})"
        raise KeyError(msg) from None
