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
Module for the residual network ansatz.

The network maps plate coordinates to a point in space.  An input layer
with activation is followed by a number of residual blocks, each made of
two fully connected layers with activation and an additive skip
connection, and a final linear output layer.

All parameters live in a single flat vector, laid out layer by layer as
weight matrix (row-major, shape ``(fan_in, fan_out)``) followed by bias.

"""

from __future__ import annotations

import dataclasses
import logging
from collections.abc import Iterator
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy as np

from .autodiff import Jet2, tanh, value_of

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Architecture:
    """
    Shape of the residual network: *blocks* residual blocks of *width*
    hidden nodes, with the given numbers of *inputs* and *outputs*.
    """

    blocks: int = 5
    width: int = 10
    inputs: int = 2
    outputs: int = 3

    def __post_init__(self) -> None:
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                msg = f"architecture {field.name} must be a positive integer"
                raise ValueError(msg)

    def shapes(self) -> list[tuple[int, int]]:
        """Return the ``(fan_in, fan_out)`` shape of every layer in order."""
        m = self.width
        return [
            (self.inputs, m),
            *[(m, m)] * (2 * self.blocks),
            (m, self.outputs),
        ]

    @property
    def size(self) -> int:
        """Number of parameters, biases included."""
        return sum((n + 1) * k for n, k in self.shapes())

    @property
    def weight_count(self) -> int:
        """Number of parameters, biases excluded."""
        return sum(n * k for n, k in self.shapes())

    def with_outputs(self, outputs: int) -> Architecture:
        return dataclasses.replace(self, outputs=outputs)


@dataclass(frozen=True, eq=False)
class NetworkParameters:
    """
    Flat parameter vector *theta* of a network with architecture *arch*.
    The *seed* used for initialisation is kept for the checkpoint header.
    """

    theta: Any
    arch: Architecture = Architecture()
    seed: int = 0

    def __post_init__(self) -> None:
        shape = np.shape(self.theta)
        if shape != (self.arch.size,):
            msg = (
                f"parameter vector has shape {shape}, expected "
                f"({self.arch.size},) for {self.arch}"
            )
            raise ValueError(msg)
        if not np.all(np.isfinite(value_of(self.theta))):
            msg = "parameter vector contains non-finite values"
            raise ValueError(msg)

    @property
    def size(self) -> int:
        return self.arch.size

    def replace(self, **changes: Any) -> NetworkParameters:
        """Return a copy with the given fields replaced."""
        return dataclasses.replace(self, **changes)

    def layers(self) -> Iterator[tuple[Any, Any]]:
        """
        Iterate over the ``(weight, bias)`` pairs of all layers.  Works for
        plain arrays and taped parameter vectors alike.
        """
        offset = 0
        for n, k in self.arch.shapes():
            w = self.theta[offset : offset + n * k].reshape(n, k)
            offset += n * k
            b = self.theta[offset : offset + k]
            offset += k
            yield w, b


def init_params(arch: Architecture, seed: int = 0) -> NetworkParameters:
    """
    Initialise the parameters of a network.

    Weights are drawn uniformly from ``[-a, a]`` with
    ``a = sqrt(6 / (fan_in + fan_out))`` and biases are zero.  The result
    depends on *seed* only.

    """
    rng = np.random.default_rng(seed)
    theta = np.zeros(arch.size)
    offset = 0
    for n, k in arch.shapes():
        limit = np.sqrt(6.0 / (n + k))
        theta[offset : offset + n * k] = rng.uniform(-limit, limit, size=n * k)
        offset += n * k + k
    logger.debug("initialised %d parameters with seed %d", arch.size, seed)
    return NetworkParameters(theta, arch, seed)


def forward(params: NetworkParameters, x: Jet2) -> Jet2:
    """
    Evaluate the network on the jet *x* of the input coordinates and
    return the jet of the output.  The input is either a batch of points,
    with components of shape ``(n, 2)``, or a single point of shape ``(2,)``.
    """
    ndim = value_of(x.value).ndim
    if ndim == 1:
        y = forward(params, x.reshape(1, -1))
        return y.reshape(-1)
    if ndim != 2:
        msg = "network input must be a point or a batch of points of shape (n, 2)"
        raise ValueError(msg)
    if x.channels != params.arch.inputs:
        msg = f"network expects {params.arch.inputs} inputs, got {x.channels}"
        raise ValueError(msg)
    layers = params.layers()
    h = tanh(x.linear(*next(layers)))
    for _ in range(params.arch.blocks):
        a = tanh(h.linear(*next(layers)))
        h = h + tanh(a.linear(*next(layers)))
    return h.linear(*next(layers))


def predict(params: NetworkParameters, x: ArrayLike) -> NDArray[Any]:
    """
    Evaluate the network values at the points *x* without derivatives.
    """
    x = np.asarray(x, dtype=float)
    theta = value_of(params.theta)
    layers = params.replace(theta=theta).layers()
    w, b = next(layers)
    h = np.tanh(x @ w + b)
    for _ in range(params.arch.blocks):
        w, b = next(layers)
        a = np.tanh(h @ w + b)
        w, b = next(layers)
        h = h + np.tanh(a @ w + b)
    w, b = next(layers)
    return h @ w + b
