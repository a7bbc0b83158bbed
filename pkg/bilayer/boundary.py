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
Module for boundary lifts.

Clamped boundary conditions are built into the ansatz by writing the
deformation as ``u = g1 * y + g2``, where ``y`` is the network output,
``g1`` vanishes to first order on the clamped boundary, and ``g2`` is the
flat reference configuration.  For a clamp along a full straight edge,
``g1`` is the squared distance to the edge.  Otherwise ``g1`` is a small
network trained to vanish on the clamp and follow a distance-like target
elsewhere on the boundary.

"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Callable, Protocol, runtime_checkable

import numpy as np

from .autodiff import Jet2, seed_input, value_of
from .core import UnsupportedLiftError
from .geometry import outer_side, sample_boundary
from .network import Architecture, NetworkParameters, forward, init_params
from .progress import NoProgress

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

    from .geometry import PlateDomain
    from .progress import Progress

logger = logging.getLogger(__name__)

# the flat embedding (x1, x2) -> (x1, x2, 0)
FLAT_EMBEDDING = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])

# acceptance thresholds for trained g1
G1_TOLERANCE = 1e-2
G1_RELATIVE_TOLERANCE = 5e-2

# a deformation maps points to the jet of their image
Deformation = Callable[["NDArray[Any]"], Jet2]


@runtime_checkable
class BoundaryLift(Protocol):
    """
    Protocol for boundary lifts.  The functions :meth:`g1` and :meth:`g2`
    receive the jet of the input coordinates.
    """

    @property
    def free(self) -> bool:
        """
        Whether the boundary is free, in which case no lift is applied.
        """

    def g1(self, x: Jet2) -> Jet2:
        """
        Scalar factor that vanishes to first order on the clamped boundary.
        """

    def g2(self, x: Jet2) -> Jet2:
        """
        Vector field that carries the clamped boundary values.
        """


def flat_embedding(x: Jet2) -> Jet2:
    """
    Return the jet of the flat reference configuration ``(x1, x2, 0)``.
    """
    return x.linear(FLAT_EMBEDDING, 0.0)


@dataclass(frozen=True)
class EdgeLift:
    """
    Lift for a plate clamped along the full straight edge ``x_k = c``, with
    *axis* ``k`` counted from zero and *coordinate* ``c``.
    """

    axis: int
    coordinate: float

    @property
    def free(self) -> bool:
        return False

    def g1(self, x: Jet2) -> Jet2:
        d = x.channel(self.axis) - self.coordinate
        return d * d

    def g2(self, x: Jet2) -> Jet2:
        return flat_embedding(x)


@dataclass(frozen=True, eq=False)
class NetworkLift:
    """
    Lift with a trained network for *g1*.  The network parameters are
    frozen, and *residuals* holds the residuals achieved in training.
    """

    params: NetworkParameters
    residuals: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.params.arch.outputs != 1:
            msg = "g1 network must have exactly one output"
            raise ValueError(msg)
        theta = np.array(value_of(self.params.theta), dtype=float)
        theta.setflags(write=False)
        object.__setattr__(self, "params", self.params.replace(theta=theta))

    @property
    def free(self) -> bool:
        return False

    def g1(self, x: Jet2) -> Jet2:
        return forward(self.params, x)

    def g2(self, x: Jet2) -> Jet2:
        return flat_embedding(x)


class FreeLift:
    """
    Lift for a plate without clamped boundary.
    """

    @property
    def free(self) -> bool:
        return True

    def g1(self, x: Jet2) -> Jet2:
        msg = "free boundary has no lift"
        raise TypeError(msg)

    g2 = g1

    def __repr__(self) -> str:
        return "FreeLift()"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FreeLift)

    def __hash__(self) -> int:
        return hash(FreeLift)


def lift(bc: BoundaryLift, yhat: Jet2, x: Jet2) -> Jet2:
    """
    Return the jet of the deformation ``g1 * yhat + g2`` for the network
    output *yhat* at the input jet *x*, or *yhat* for a free boundary.
    """
    if bc.free:
        return yhat
    return bc.g1(x) * yhat + bc.g2(x)


def deformation(params: NetworkParameters, bc: BoundaryLift) -> Deformation:
    """
    Return the deformation of the network *params* with boundary lift *bc*
    as a function of the points.
    """

    def u(points: NDArray[Any]) -> Jet2:
        x = seed_input(points)
        return lift(bc, forward(params, x), x)

    return u


def edge_lift(domain: PlateDomain) -> EdgeLift:
    """
    Return the analytic lift of a domain clamped along one full edge of its
    outer rectangle.
    """
    if len(domain.clamp) != 1:
        msg = (
            f"analytic lift needs exactly one clamped edge, got "
            f"{len(domain.clamp)} clamped segments; train g1 instead"
        )
        raise UnsupportedLiftError(msg)
    (segment,) = domain.clamp
    side = outer_side(domain, segment)
    k = segment.fixed_axis
    lo, hi = domain.outer.lower[1 - k], domain.outer.upper[1 - k]
    if side is None or segment.interval != (lo, hi):
        msg = "clamped segment is not a full edge of the plate; train g1 instead"
        raise UnsupportedLiftError(msg)
    return EdgeLift(k, segment.coordinate)


@dataclass(frozen=True)
class AffineTarget:
    """
    Target ``d(x) = a x1 + b x2 + c`` of trained *g1* on the free boundary.
    """

    a: float
    b: float
    c: float

    def __call__(self, x: ArrayLike) -> NDArray[Any]:
        x = np.asarray(x, dtype=float)
        return self.a * x[..., 0] + self.b * x[..., 1] + self.c


def g1_residuals(
    bc: BoundaryLift,
    domain: PlateDomain,
    target: Callable[[NDArray[Any]], NDArray[Any]],
    rng: np.random.Generator,
    n: int = 2000,
) -> dict[str, float]:
    """
    Measure how well *g1* of the lift *bc* satisfies its conditions on the
    boundary of *domain*, using *n* samples on each boundary part.
    """
    clamp = seed_input(sample_boundary(domain, "clamp", n, rng))
    g = bc.g1(clamp)
    xf = sample_boundary(domain, "free", n, rng)
    gf = bc.g1(seed_input(xf)).value[:, 0]
    d = target(xf)
    grad = np.hypot(g.d1[0][:, 0], g.d1[1][:, 0])
    return {
        "clamp_value": float(np.max(np.abs(g.value))),
        "clamp_gradient": float(np.max(grad)),
        "free_relative": float(np.sqrt(np.sum((gf - d) ** 2) / np.sum(d**2))),
    }


def train_g1(
    domain: PlateDomain,
    target: Callable[[NDArray[Any]], NDArray[Any]],
    steps: int,
    rng: np.random.Generator,
    *,
    arch: Architecture | None = None,
    samples: int = 256,
    seed: int = 0,
    learning_rate: float = 1e-3,
    progress: Progress | None = None,
) -> NetworkLift:
    """
    Train a network for *g1* on the boundary of *domain*.

    The loss is the sum of three equally weighted mean squares over
    boundary samples: the value and the gradient of *g1* on the clamped
    boundary, and the difference ``g1 - target`` on the rest of the
    boundary.  Each step draws *samples* fresh points from both parts.

    A warning is emitted if the trained network misses the acceptance
    thresholds :data:`G1_TOLERANCE` or :data:`G1_RELATIVE_TOLERANCE`.

    """
    from .autodiff import loss_gradient
    from .trainer import OptimizerState, adam_step

    if domain.free:
        msg = "cannot train g1 for a domain without clamped boundary"
        raise ValueError(msg)

    ends = np.array([p for s in domain.free_boundary() for p in (s.start, s.end)])
    if np.any(target(ends) < -1e-12):
        msg = "target for g1 must be nonnegative on the free boundary"
        raise ValueError(msg)

    if arch is None:
        arch = Architecture()
    params = init_params(arch.with_outputs(1), seed)
    state = OptimizerState.zeros(params.size, lr=learning_rate)

    if progress is None:
        progress = NoProgress()

    logger.info("training g1 for %d steps with %d samples", steps, samples)

    with progress.task("g1") as task:
        for step in range(1, steps + 1):
            xc = seed_input(sample_boundary(domain, "clamp", samples, rng))
            xf = sample_boundary(domain, "free", samples, rng)
            d = target(xf)[:, np.newaxis]
            free = seed_input(xf)

            def build(p: NetworkParameters) -> Any:
                gc = forward(p, xc)
                gf = forward(p, free).value - d
                value = (gc.value * gc.value).sum() / samples
                gradient = (gc.d1[0] * gc.d1[0] + gc.d1[1] * gc.d1[1]).sum() / samples
                return value + gradient + (gf * gf).sum() / samples

            loss, grad = loss_gradient(params, build, step=step, phase="g1")
            state, params = adam_step(state, params, grad, step=step, phase="g1")

            if step % 100 == 0 or step == steps:
                task.update(step, steps)
                task.metrics(loss=loss)

    residuals = g1_residuals(NetworkLift(params), domain, target, rng)
    bc = NetworkLift(params, residuals)

    logger.info(
        "trained g1: max |g1| = %.3e, max |grad g1| = %.3e on clamp, "
        "relative residual %.3e elsewhere",
        residuals["clamp_value"],
        residuals["clamp_gradient"],
        residuals["free_relative"],
    )

    if (
        residuals["clamp_value"] > G1_TOLERANCE
        or residuals["clamp_gradient"] > G1_TOLERANCE
        or residuals["free_relative"] > G1_RELATIVE_TOLERANCE
    ):
        warnings.warn(
            f"trained g1 misses its tolerances after {steps} steps: "
            f"max |g1| = {residuals['clamp_value']:.3e}, "
            f"max |grad g1| = {residuals['clamp_gradient']:.3e} on the clamp "
            f"(tolerance {G1_TOLERANCE}), relative residual "
            f"{residuals['free_relative']:.3e} elsewhere "
            f"(tolerance {G1_RELATIVE_TOLERANCE})",
            stacklevel=2,
        )

    return bc
