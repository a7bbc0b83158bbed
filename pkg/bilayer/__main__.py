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
"""Executable module."""

import sys

from .cli import main

sys.exit(main())
