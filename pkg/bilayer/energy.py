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
Module for the bending energy of bilayer plates.

The energy of a deformation ``u`` with spontaneous curvature ``Z`` is the
integral of ``|H(u) + Z|^2 / 2`` over the plate, where ``H(u)`` is the
second fundamental form with the unnormalised normal ``d1 u x d2 u``.
Deviations from isometry are penalised by ``beta`` times the squared
:math:`L^2` norm of ``grad(u)^T grad(u) - I``.

The reshaped energy replaces ``|H|^2`` by the full squared Hessian
``|D^2 u|^2``, which agrees with the energy for isometries but admits
spurious low-energy states under the penalty.  Both formulations are
available; the reshaped one is selected with ``formulation="tilde"``.

Symmetric 2x2 quantities are stored packed as ``(11, 12, 22)``.

"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Callable, Optional

import numpy as np

from .autodiff import Jet2, Var, value_of
from .core import NumericalError
from .geometry import grid_points, sample_interior

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

    from .boundary import BoundaryLift
    from .geometry import PlateDomain
    from .network import NetworkParameters

logger = logging.getLogger(__name__)

FORMULATIONS = ("I", "tilde")

# default number of points per chunk for untaped integration
CHUNK_SIZE = 2**16

# packed symmetric 2x2 tensor
Packed = tuple[Any, Any, Any]


def _symmetric(matrix: ArrayLike, name: str) -> tuple[tuple[float, float], ...]:
    m = np.asarray(matrix, dtype=float)
    if m.shape != (2, 2):
        msg = f"{name} must be a 2x2 matrix, got shape {m.shape}"
        raise ValueError(msg)
    if m[0, 1] != m[1, 0]:
        msg = f"{name} must be symmetric"
        raise ValueError(msg)
    return ((float(m[0, 0]), float(m[0, 1])), (float(m[1, 0]), float(m[1, 1])))


@dataclass(frozen=True)
class AffineSource:
    """
    Body force ``f(x) = constant + gradient @ x``.
    """

    constant: tuple[float, float, float] = (0.0, 0.0, 0.0)
    gradient: tuple[tuple[float, float], ...] = ((0.0, 0.0),) * 3

    def __post_init__(self) -> None:
        c = np.asarray(self.constant, dtype=float)
        g = np.asarray(self.gradient, dtype=float)
        if c.shape != (3,) or g.shape != (3, 2):
            msg = "source needs a constant of shape (3,) and gradient of shape (3, 2)"
            raise ValueError(msg)
        object.__setattr__(self, "constant", tuple(map(float, c)))
        object.__setattr__(self, "gradient", tuple(tuple(map(float, r)) for r in g))

    def __call__(self, x: ArrayLike) -> NDArray[Any]:
        x = np.asarray(x, dtype=float)
        return np.asarray(self.constant) + x @ np.asarray(self.gradient).T


@dataclass(frozen=True)
class EnergyConfig:
    """
    Parameters of the energy: spontaneous curvature *Z*, penalty *beta*,
    optional body force *source*, and the *formulation* (``"I"`` for the
    bending energy, ``"tilde"`` for the reshaped one).  If
    *normalize_normal* is true, the second fundamental form uses the unit
    normal.
    """

    Z: Any
    beta: float
    source: Optional[AffineSource] = None
    formulation: str = "I"
    normalize_normal: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "Z", _symmetric(self.Z, "spontaneous curvature"))
        object.__setattr__(self, "beta", float(self.beta))
        if not self.beta > 0:
            msg = f"penalty must be positive, got {self.beta}"
            raise ValueError(msg)
        if self.formulation not in FORMULATIONS:
            msg = f"unknown formulation {self.formulation!r} (expected I or tilde)"
            raise ValueError(msg)

    @property
    def packed_Z(self) -> tuple[float, float, float]:
        return (self.Z[0][0], self.Z[0][1], self.Z[1][1])


@dataclass(frozen=True)
class PointEnergy:
    """
    Energy density *e*, isometry defect density *c2*, and packed second
    fundamental form *H* at a batch of points.
    """

    e: Any
    c2: Any
    H: Packed


def frobenius2(p: Packed) -> Any:
    """Squared Frobenius norm of a packed symmetric tensor."""
    return p[0] * p[0] + 2 * (p[1] * p[1]) + p[2] * p[2]


def as_matrix(p: Packed) -> NDArray[Any]:
    """Unpack a packed symmetric tensor into an array of 2x2 matrices."""
    a, b, c = (value_of(q) for q in p)
    return np.stack([np.stack([a, b], axis=-1), np.stack([b, c], axis=-1)], axis=-2)


def _components(v: Any) -> tuple[Any, Any, Any]:
    return v[..., 0], v[..., 1], v[..., 2]


def _dot(u: Any, v: Any) -> Any:
    return (u * v).sum(axis=-1)


def second_fundamental_form(jet: Jet2, *, normalize: bool = False) -> Packed:
    """
    Return the packed second fundamental form ``H_ij = n . d_ij u`` of the
    deformation jet *jet*, with the normal ``n = d1 u x d2 u``.  If
    *normalize* is true, the normal is scaled to unit length.
    """
    a1, a2, a3 = _components(jet.d1[0])
    b1, b2, b3 = _components(jet.d1[1])
    n = (a2 * b3 - a3 * b2, a3 * b1 - a1 * b3, a1 * b2 - a2 * b1)
    if normalize:
        norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]) ** 0.5
        n = (n[0] / norm, n[1] / norm, n[2] / norm)
    out = []
    for d in jet.d2:
        c1, c2, c3 = _components(d)
        out.append(n[0] * c1 + n[1] * c2 + n[2] * c3)
    return tuple(out)  # type: ignore[return-value]


def isometry_defect(jet: Jet2) -> Packed:
    """
    Return the packed isometry defect ``grad(u)^T grad(u) - I`` of the
    deformation jet *jet*.
    """
    a, b = jet.d1
    return (_dot(a, a) - 1, _dot(a, b), _dot(b, b) - 1)


def density(jet: Jet2, x: ArrayLike, cfg: EnergyConfig) -> PointEnergy:
    """
    Return the energy and isometry defect densities of the deformation jet
    *jet* at the points *x*.
    """
    H = second_fundamental_form(jet, normalize=cfg.normalize_normal)
    c2 = frobenius2(isometry_defect(jet))
    z11, z12, z22 = cfg.packed_Z
    if cfg.formulation == "I":
        e = 0.5 * frobenius2((H[0] + z11, H[1] + z12, H[2] + z22))
    else:
        d11, d12, d22 = jet.d2
        hessian = _dot(d11, d11) + 2 * _dot(d12, d12) + _dot(d22, d22)
        coupling = H[0] * z11 + 2 * (H[1] * z12) + H[2] * z22
        e = 0.5 * hessian + coupling + 0.5 * frobenius2(cfg.packed_Z)
    if cfg.source is not None:
        e = e - _dot(jet.value, cfg.source(x))
    return PointEnergy(e, c2, H)


def _check_density(pe: PointEnergy, x: NDArray[Any]) -> None:
    for name, values in (("energy density", pe.e), ("isometry defect", pe.c2)):
        values = value_of(values)
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            i = int(bad[0])
            msg = f"non-finite {name}"
            raise NumericalError(msg, sample=i, point=tuple(x[i].tolist()))


def mc_loss(
    params: NetworkParameters,
    bc: BoundaryLift,
    batch: NDArray[Any],
    cfg: EnergyConfig,
    domain: PlateDomain,
) -> tuple[Var, float, float]:
    """
    Monte Carlo loss of the penalised energy over the points *batch*.

    Returns the loss ``|Omega|/N sum(e + beta c2)`` as a taped value if
    *params* is taped, together with the plain Monte Carlo estimates of the
    energy and the squared isometry tolerance.

    """
    from .autodiff import seed_input
    from .boundary import lift
    from .network import forward

    batch = np.asarray(batch, dtype=float)
    n = len(batch)
    if n < 1:
        msg = "batch must contain at least one point"
        raise ValueError(msg)
    x = seed_input(batch)
    u = lift(bc, forward(params, x), x)
    pe = density(u, batch, cfg)
    _check_density(pe, batch)
    weight = domain.area / n
    istar = (pe.e + cfg.beta * pe.c2).sum() * weight
    e_hat = float(np.sum(value_of(pe.e)) * weight)
    c2_hat = float(np.sum(value_of(pe.c2)) * weight)
    return istar, e_hat, c2_hat


@dataclass(frozen=True)
class EnergyEstimate:
    """
    Integrated energy, squared isometry tolerance, and penalised energy.
    """

    energy: float
    c2: float
    beta: float

    @property
    def tolerance(self) -> float:
        return float(np.sqrt(self.c2))

    @property
    def penalized(self) -> float:
        return self.energy + self.beta * self.c2


def integrate(
    u: Callable[[NDArray[Any]], Jet2],
    points: NDArray[Any],
    weights: ArrayLike,
    cfg: EnergyConfig,
    *,
    chunk: int = CHUNK_SIZE,
) -> EnergyEstimate:
    """
    Integrate the energy densities of the deformation *u* with the
    quadrature rule *points*, *weights*.  The points are processed in
    chunks of the given size.
    """
    points = np.asarray(points, dtype=float)
    weights = np.broadcast_to(np.asarray(weights, dtype=float), points.shape[:1])
    energy = c2 = 0.0
    for i in range(0, len(points), chunk):
        x = points[i : i + chunk]
        w = weights[i : i + chunk]
        pe = density(u(x), x, cfg)
        _check_density(pe, x)
        energy += float(np.dot(w, value_of(pe.e)))
        c2 += float(np.dot(w, value_of(pe.c2)))
    return EnergyEstimate(energy, c2, cfg.beta)


def estimate(
    u: Callable[[NDArray[Any]], Jet2],
    domain: PlateDomain,
    cfg: EnergyConfig,
    n: int,
    rng: np.random.Generator,
) -> EnergyEstimate:
    """
    Monte Carlo estimate of the energies of *u* with *n* uniform samples.
    """
    points = sample_interior(domain, n, rng)
    return integrate(u, points, domain.area / n, cfg)


def grid_quadrature(
    u: Callable[[NDArray[Any]], Jet2],
    domain: PlateDomain,
    cfg: EnergyConfig,
    shape: tuple[int, int] = (1000, 400),
) -> EnergyEstimate:
    """
    Midpoint-rule quadrature of the energies of *u* on a grid of *shape*.
    """
    points, weights = grid_points(domain, shape)
    return integrate(u, points, weights, cfg)


def rolled_strip(points: ArrayLike, k: float, s: float) -> Jet2:
    """
    Jet of the map ``(sin(k x1)/k, s x2, cos(k x1)/k)``, which rolls the
    plate around the second axis with curvature *k* and stretches it by
    *s* along that axis.
    """
    x = np.asarray(points, dtype=float)
    t = k * x[..., 0]
    sn, cs = np.sin(t), np.cos(t)
    zero = np.zeros_like(t)
    return Jet2(
        np.stack([sn / k, s * x[..., 1], cs / k], axis=-1),
        (
            np.stack([cs, zero, -sn], axis=-1),
            np.stack([zero, zero + s, zero], axis=-1),
        ),
        (
            np.stack([-k * sn, zero, -k * cs], axis=-1),
            np.zeros(t.shape + (3,)),
            np.zeros(t.shape + (3,)),
        ),
    )


@dataclass(frozen=True)
class Witness:
    """
    Closed-form deformation that lowers the reshaped penalised energy below
    that of the exact solution, with its closed-form energies.

    The deformation rolls the plate with curvature *curvature* and
    stretches it across by the factor *stretch*.  For an area ``A``, the
    reshaped energy is ``energy_density * A``, the isometry tolerance is
    ``tolerance_density * sqrt(A)``, and the penalised energy satisfies
    ``penalized(A) <= bound(A)`` (strictly if *strict*).
    """

    beta: float
    gamma: Optional[float]
    Z: tuple[tuple[float, float], ...]
    curvature: float
    stretch: float
    energy_density: float
    tolerance_density: float
    bound_density: float
    strict: bool

    def jet(self, points: ArrayLike) -> Jet2:
        return rolled_strip(points, self.curvature, self.stretch)

    def config(self) -> EnergyConfig:
        """Energy configuration of the reshaped formulation."""
        return EnergyConfig(self.Z, self.beta, formulation="tilde")

    def energy(self, area: float) -> float:
        return self.energy_density * area

    def tolerance(self, area: float) -> float:
        return self.tolerance_density * np.sqrt(area)

    def penalized(self, area: float) -> float:
        return self.energy(area) + self.beta * self.tolerance(area) ** 2

    def bound(self, area: float) -> float:
        return self.bound_density * area


def prop1_witness(beta: float) -> Witness:
    """
    Witness for unit spontaneous curvature ``Z = diag(1, 0)``: the
    penalised reshaped energy lies at least ``4|Omega|/(625 beta)`` below
    that of the exact solution when ``beta >= 1``.
    """
    if beta < 1:
        warnings.warn(
            f"energy bound of the witness requires beta >= 1, got {beta}",
            stacklevel=2,
        )
    return Witness(
        beta=beta,
        gamma=None,
        Z=((1.0, 0.0), (0.0, 0.0)),
        curvature=1.0,
        stretch=1 + 1 / (5 * beta),
        energy_density=-1 / (5 * beta),
        tolerance_density=(10 * beta + 1) / (25 * beta**2),
        bound_density=-4 / (625 * beta),
        strict=False,
    )


def prop2_witness(beta: float, gamma: float) -> Witness:
    """
    Witness for large spontaneous curvature ``Z_11 = beta**gamma``: the
    reshaped energy is below that of the exact solution by at least
    ``|Omega|`` while the isometry tolerance is of order ``beta**(-2 gamma)``.
    The bound on the penalised energy needs ``gamma > 1/4`` and
    ``beta >= 9**(1/(4 gamma - 1))``.
    """
    if not gamma > 0.25 or beta < 9 ** (1 / (4 * gamma - 1)):
        warnings.warn(
            f"energy bound of the witness requires gamma > 1/4 and "
            f"beta >= 9**(1/(4 gamma - 1)), got beta={beta}, gamma={gamma}",
            stacklevel=2,
        )
    k = beta**gamma
    q = beta ** (-2 * gamma)
    return Witness(
        beta=beta,
        gamma=gamma,
        Z=((k, 0.0), (0.0, 0.0)),
        curvature=k,
        stretch=1 + q,
        energy_density=-1.0,
        tolerance_density=q * (2 + q),
        bound_density=9 * beta ** (1 - 4 * gamma) - 1,
        strict=True,
    )
