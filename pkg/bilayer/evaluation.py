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
Module for the evaluation of trained deformations.

For isotropic spontaneous curvature ``Z = -alpha I`` and a plate clamped
along the edge ``x1 = a``, the energy is minimised by rolling the plate
into a cylinder of radius ``1/alpha``.  This exact solution serves as the
reference for the relative :math:`L^2` error and the shape label of a
trained deformation.

"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Callable, Optional

import numpy as np

from .autodiff import Jet2
from .energy import EnergyConfig, integrate
from .geometry import sample_interior

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

    from .boundary import BoundaryLift
    from .geometry import PlateDomain
    from .network import NetworkParameters

logger = logging.getLogger(__name__)

CYLINDER = "cylinder"
NON_CYLINDER = "non-cylinder"

# number of test samples per unit area
TEST_DENSITY = 1e4


def exact_cylinder(alpha: float, x: ArrayLike, *, clamp: float = -5.0) -> Jet2:
    """
    Return the jet of the cylinder of curvature *alpha* clamped flat along
    the edge ``x1 = clamp``.
    """
    if not alpha > 0:
        msg = f"curvature must be positive, got {alpha}"
        raise ValueError(msg)
    x = np.asarray(x, dtype=float)
    t = alpha * (x[..., 0] - clamp)
    sn, cs = np.sin(t), np.cos(t)
    zero = np.zeros_like(t)
    return Jet2(
        np.stack([sn / alpha + clamp, x[..., 1], (1 - cs) / alpha], axis=-1),
        (
            np.stack([cs, zero, sn], axis=-1),
            np.stack([zero, zero + 1, zero], axis=-1),
        ),
        (
            np.stack([-alpha * sn, zero, alpha * cs], axis=-1),
            np.zeros(t.shape + (3,)),
            np.zeros(t.shape + (3,)),
        ),
    )


@dataclass(frozen=True)
class ReferenceSolution:
    """
    Cylinder of curvature *alpha* clamped along ``x1 = clamp``, with the
    reference *energy*.
    """

    alpha: float
    energy: float
    clamp: float = -5.0

    def jet(self, points: ArrayLike) -> Jet2:
        return exact_cylinder(self.alpha, points, clamp=self.clamp)

    def config(self, beta: float = 1.0) -> EnergyConfig:
        """Energy configuration for which the cylinder is the minimiser."""
        return EnergyConfig(((-self.alpha, 0.0), (0.0, -self.alpha)), beta)


def cylinder_reference(
    alpha: float,
    domain: PlateDomain,
    energy: float | None = None,
) -> ReferenceSolution:
    """
    Return the cylinder reference for *domain*, clamped along the left edge
    of the outer rectangle.  The reference energy is ``alpha**2 |Omega| / 2``
    unless given.
    """
    if energy is None:
        energy = 0.5 * alpha**2 * domain.area
    return ReferenceSolution(alpha, energy, domain.outer.x1min)


@dataclass(frozen=True)
class ShapeThresholds:
    """
    Largest relative :math:`L^2` error and relative energy error for which
    a deformation is labelled as the cylinder.
    """

    e_l2: float = 0.15
    energy: float = 0.10


@dataclass(frozen=True)
class TestMetrics:
    """
    Test-time energy *E*, isometry tolerance *C*, penalised energy *Istar*,
    relative :math:`L^2` error *e_l2*, and *shape* label.
    """

    __test__ = False

    E: float
    C: float
    Istar: float
    e_l2: Optional[float] = None
    shape: Optional[str] = None


def label_shape(
    e_l2: float,
    energy: float,
    reference: ReferenceSolution,
    thresholds: ShapeThresholds = ShapeThresholds(),
) -> str:
    """
    Return the shape label for the given errors against *reference*.
    """
    relative = abs(energy - reference.energy) / reference.energy
    if e_l2 < thresholds.e_l2 and relative < thresholds.energy:
        return CYLINDER
    return NON_CYLINDER


def measure(
    u: Callable[[NDArray[Any]], Jet2],
    domain: PlateDomain,
    cfg: EnergyConfig,
    rng: np.random.Generator,
    n: int,
    reference: ReferenceSolution | None = None,
    thresholds: ShapeThresholds = ShapeThresholds(),
    *,
    chunk: int = 2**16,
) -> TestMetrics:
    """
    Measure the deformation *u* with *n* uniform samples on *domain*.
    """
    points = sample_interior(domain, n, rng)
    est = integrate(u, points, domain.area / n, cfg, chunk=chunk)
    if reference is None:
        return TestMetrics(est.energy, est.tolerance, est.penalized)
    err = norm = 0.0
    for i in range(0, n, chunk):
        x = points[i : i + chunk]
        exact = reference.jet(x).value
        approx = np.asarray(u(x).value)
        err += float(np.sum((exact - approx) ** 2))
        norm += float(np.sum(exact**2))
    e_l2 = float(np.sqrt(err / norm))
    shape = label_shape(e_l2, est.energy, reference, thresholds)
    return TestMetrics(est.energy, est.tolerance, est.penalized, e_l2, shape)


def test_metrics(
    params: NetworkParameters,
    bc: BoundaryLift,
    domain: PlateDomain,
    cfg: EnergyConfig,
    reference: ReferenceSolution | None = None,
    rng: np.random.Generator | None = None,
    *,
    n: int | None = None,
    thresholds: ShapeThresholds = ShapeThresholds(),
) -> TestMetrics:
    """
    Test-time metrics of the trained deformation with fresh samples, by
    default ``1e4`` per unit area.  The relative :math:`L^2` error and the
    shape label are only computed if a *reference* is given.
    """
    from .boundary import deformation

    if rng is None:
        rng = np.random.default_rng()
    if n is None:
        n = max(1, int(np.floor(TEST_DENSITY * domain.area + 0.5)))
    logger.info("evaluating test metrics with %d samples", n)
    result = measure(deformation(params, bc), domain, cfg, rng, n, reference, thresholds)
    logger.info(
        "test metrics: E = %.6g, C = %.4e%s",
        result.E,
        result.C,
        f", e_L2 = {result.e_l2:.4e}, {result.shape}" if reference is not None else "",
    )
    return result


# not a test function
test_metrics.__test__ = False  # type: ignore[attr-defined]


def classify_shape(
    params: NetworkParameters,
    bc: BoundaryLift,
    domain: PlateDomain,
    reference: ReferenceSolution,
    *,
    cfg: EnergyConfig | None = None,
    rng: np.random.Generator | None = None,
    n: int | None = None,
    thresholds: ShapeThresholds = ShapeThresholds(),
) -> str:
    """
    Return whether the trained deformation is the *reference* cylinder.
    The energy is evaluated with *cfg*, by default the isotropic
    spontaneous curvature of the reference.
    """
    if cfg is None:
        cfg = reference.config()
    metrics = test_metrics(
        params, bc, domain, cfg, reference, rng, n=n, thresholds=thresholds
    )
    return metrics.shape  # type: ignore[return-value]
