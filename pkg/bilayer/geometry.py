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
Module for plate domains.

A plate is an axis-aligned rectangle, optionally with a rectangular hole,
and a set of clamped segments on its boundary.  This module samples points
inside plates and on their boundaries, builds midpoint quadrature grids,
and splits plates into nested subdomains for pre-training.

"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np

from .core import DecompositionError

if TYPE_CHECKING:
    from collections.abc import Iterator, Sequence

    from numpy.typing import ArrayLike, NDArray

logger = logging.getLogger(__name__)

# relative tolerance for comparing coordinates of boundary pieces
TOLERANCE = 1e-12


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= TOLERANCE * max(1.0, abs(a), abs(b))


@dataclass(frozen=True)
class Rectangle:
    """
    Axis-aligned rectangle ``(x1min, x1max) x (x2min, x2max)``.
    """

    x1min: float
    x1max: float
    x2min: float
    x2max: float

    def __post_init__(self) -> None:
        if not (self.x1min < self.x1max and self.x2min < self.x2max):
            msg = f"empty rectangle {self.bounds}"
            raise ValueError(msg)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (self.x1min, self.x1max, self.x2min, self.x2max)

    @property
    def area(self) -> float:
        return (self.x1max - self.x1min) * (self.x2max - self.x2min)

    @property
    def lower(self) -> NDArray[Any]:
        return np.array([self.x1min, self.x2min])

    @property
    def upper(self) -> NDArray[Any]:
        return np.array([self.x1max, self.x2max])

    def contains(self, x: ArrayLike, *, closed: bool = False) -> NDArray[Any]:
        """Return which of the points *x* lie in the rectangle."""
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        if closed:
            return (
                (x1 >= self.x1min)
                & (x1 <= self.x1max)
                & (x2 >= self.x2min)
                & (x2 <= self.x2max)
            )
        return (
            (x1 > self.x1min) & (x1 < self.x1max) & (x2 > self.x2min) & (x2 < self.x2max)
        )

    def encloses(self, other: Rectangle, *, strict: bool = False) -> bool:
        """Return whether *other* lies inside this rectangle."""
        if strict:
            return (
                self.x1min < other.x1min
                and other.x1max < self.x1max
                and self.x2min < other.x2min
                and other.x2max < self.x2max
            )
        return (
            self.x1min <= other.x1min
            and other.x1max <= self.x1max
            and self.x2min <= other.x2min
            and other.x2max <= self.x2max
        )

    def intersect(self, other: Rectangle) -> Rectangle | None:
        """Return the intersection with *other*, or ``None`` if it is empty."""
        x1min, x1max = max(self.x1min, other.x1min), min(self.x1max, other.x1max)
        x2min, x2max = max(self.x2min, other.x2min), min(self.x2max, other.x2max)
        if x1min < x1max and x2min < x2max:
            return Rectangle(x1min, x1max, x2min, x2max)
        return None

    def edges(self) -> list[Segment]:
        """Return the four edges, counterclockwise from the bottom edge."""
        a1, b1, a2, b2 = self.bounds
        return [
            Segment((a1, a2), (b1, a2)),
            Segment((b1, a2), (b1, b2)),
            Segment((b1, b2), (a1, b2)),
            Segment((a1, b2), (a1, a2)),
        ]


@dataclass(frozen=True)
class Segment:
    """
    Axis-aligned straight segment from *start* to *end*.
    """

    start: tuple[float, float]
    end: tuple[float, float]

    def __post_init__(self) -> None:
        start = tuple(map(float, self.start))
        end = tuple(map(float, self.end))
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "end", end)
        if len(start) != 2 or len(end) != 2:
            msg = "segment end points must have two coordinates"
            raise ValueError(msg)
        if start[0] != end[0] and start[1] != end[1]:
            msg = f"segment {start} -> {end} is not axis-aligned"
            raise ValueError(msg)
        if start == end:
            msg = f"segment {start} -> {end} is empty"
            raise ValueError(msg)

    @property
    def fixed_axis(self) -> int:
        """Axis along which the segment is constant."""
        return 0 if self.start[0] == self.end[0] else 1

    @property
    def coordinate(self) -> float:
        """Constant coordinate of the segment along :attr:`fixed_axis`."""
        return self.start[self.fixed_axis]

    @property
    def interval(self) -> tuple[float, float]:
        """Sorted extent of the segment along its varying axis."""
        k = 1 - self.fixed_axis
        return tuple(sorted((self.start[k], self.end[k])))  # type: ignore[return-value]

    @property
    def length(self) -> float:
        lo, hi = self.interval
        return hi - lo

    def points(self, t: ArrayLike) -> NDArray[Any]:
        """Return the points at fractions *t* of the way from start to end."""
        t = np.asarray(t, dtype=float)[..., np.newaxis]
        start, end = np.array(self.start), np.array(self.end)
        return start + t * (end - start)

    def collinear(self, other: Segment) -> bool:
        return self.fixed_axis == other.fixed_axis and _close(
            self.coordinate,
            other.coordinate,
        )

    def _from_interval(self, lo: float, hi: float) -> Segment:
        a, b = [0.0, 0.0], [0.0, 0.0]
        a[self.fixed_axis] = b[self.fixed_axis] = self.coordinate
        a[1 - self.fixed_axis], b[1 - self.fixed_axis] = lo, hi
        return Segment(tuple(a), tuple(b))

    def subtract(self, others: Sequence[Segment]) -> list[Segment]:
        """
        Return the pieces of this segment not covered by any of *others*.
        """
        pieces = [self.interval]
        for other in others:
            if not self.collinear(other):
                continue
            olo, ohi = other.interval
            remaining = []
            for lo, hi in pieces:
                if ohi <= lo or olo >= hi:
                    remaining.append((lo, hi))
                    continue
                if olo > lo:
                    remaining.append((lo, olo))
                if ohi < hi:
                    remaining.append((ohi, hi))
            pieces = remaining
        return [self._from_interval(lo, hi) for lo, hi in pieces if hi - lo > 0]

    def clip(self, rect: Rectangle) -> Segment | None:
        """Return the part of the segment in the closed rectangle *rect*."""
        k = self.fixed_axis
        c = self.coordinate
        if not (rect.lower[k] <= c <= rect.upper[k]):
            return None
        lo, hi = self.interval
        lo = max(lo, rect.lower[1 - k])
        hi = min(hi, rect.upper[1 - k])
        if hi <= lo:
            return None
        return self._from_interval(lo, hi)

    def within(self, segments: Sequence[Segment]) -> bool:
        """Return whether the segment is covered by *segments*."""
        return not self.subtract(segments)

    def inside(self, rect: Rectangle) -> bool:
        """Return whether the segment lies in the closed rectangle *rect*."""
        clipped = self.clip(rect)
        return clipped is not None and _close(clipped.length, self.length)


# clamped boundary pieces are plain segments
ClampSegment = Segment


@dataclass(frozen=True)
class PlateDomain:
    """
    Plate domain *outer* minus the optional *hole*, with the clamped
    boundary segments *clamp*.

    The hole may touch the outer rectangle; this happens for the subdomains
    made by :func:`decompose`.  Domains given by users must have the hole
    strictly inside, which :meth:`validate` checks.

    """

    outer: Rectangle
    hole: Rectangle | None = None
    clamp: tuple[Segment, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "clamp", tuple(self.clamp))
        if self.hole is not None and not self.outer.encloses(self.hole):
            msg = "hole must lie inside the outer rectangle"
            raise ValueError(msg)
        if not self.area > 0:
            msg = "domain has no area"
            raise ValueError(msg)
        boundary = self.boundary()
        for segment in self.clamp:
            if not segment.within(boundary):
                msg = f"clamped segment {segment.start} -> {segment.end} is not on the boundary"
                raise ValueError(msg)

    def validate(self) -> None:
        """
        Check the conditions on user-facing domains: the hole lies strictly
        inside the outer rectangle.
        """
        if self.hole is not None and not self.outer.encloses(self.hole, strict=True):
            msg = "hole must lie strictly inside the outer rectangle"
            raise ValueError(msg)

    @property
    def area(self) -> float:
        hole = self.hole.area if self.hole is not None else 0.0
        return self.outer.area - hole

    @property
    def free(self) -> bool:
        """Whether the domain has no clamped boundary."""
        return not self.clamp

    def contains(self, x: ArrayLike) -> NDArray[Any]:
        """Return which of the points *x* lie in the open domain."""
        inside = self.outer.contains(x)
        if self.hole is not None:
            inside &= ~self.hole.contains(x, closed=True)
        return inside

    def boundary(self) -> list[Segment]:
        """Return the segments that make up the boundary of the domain."""
        outer = self.outer.edges()
        if self.hole is None:
            return outer
        hole = self.hole.edges()
        segments = []
        for edge in outer:
            segments += edge.subtract(hole)
        for edge in hole:
            segments += edge.subtract(outer)
        return segments

    def free_boundary(self) -> list[Segment]:
        """Return the segments of the boundary that are not clamped."""
        segments = []
        for edge in self.boundary():
            segments += edge.subtract(self.clamp)
        return segments

    def restrict(self, rect: Rectangle) -> PlateDomain:
        """
        Return the intersection of the domain with the rectangle *rect*.
        """
        outer = self.outer.intersect(rect)
        if outer is None:
            msg = "rectangle does not intersect the domain"
            raise ValueError(msg)
        hole = self.hole.intersect(outer) if self.hole is not None else None
        clamp = [s for s in (c.clip(outer) for c in self.clamp) if s is not None]
        return PlateDomain(outer, hole, tuple(clamp))


@dataclass(frozen=True)
class SubdomainChain:
    """
    Nested subdomains for pre-training, ending with the full domain.
    """

    domains: tuple[PlateDomain, ...]
    axis: int = 0
    side: int = -1

    def __post_init__(self) -> None:
        object.__setattr__(self, "domains", tuple(self.domains))
        if len(self.domains) < 2:
            msg = "subdomain chain needs at least two domains"
            raise ValueError(msg)
        for inner, outer in zip(self.domains, self.domains[1:]):
            if not outer.outer.encloses(inner.outer):
                msg = "subdomains are not nested"
                raise ValueError(msg)
        first, full = self.domains[0], self.domains[-1]
        for segment in full.clamp:
            if not segment.inside(first.outer):
                msg = "clamped boundary is not contained in the first subdomain"
                raise ValueError(msg)

    def __len__(self) -> int:
        return len(self.domains)

    def __iter__(self) -> Iterator[PlateDomain]:
        return iter(self.domains)

    def __getitem__(self, i: int) -> PlateDomain:
        return self.domains[i]

    @property
    def full(self) -> PlateDomain:
        return self.domains[-1]

    @property
    def stages(self) -> tuple[PlateDomain, ...]:
        """The subdomains used for pre-training."""
        return self.domains[:-1]


def outer_side(domain: PlateDomain, segment: Segment) -> tuple[int, int] | None:
    """
    Return ``(axis, side)`` of the outer edge on which *segment* lies, where
    *side* is -1 for the lower and +1 for the upper edge, or ``None``.
    """
    k = segment.fixed_axis
    if _close(segment.coordinate, domain.outer.lower[k]):
        return k, -1
    if _close(segment.coordinate, domain.outer.upper[k]):
        return k, +1
    return None


def decompose(domain: PlateDomain, n: int) -> SubdomainChain:
    """
    Split *domain* into *n* nested subdomains grown from its clamped side.

    The outer rectangle is cut into *n* slabs of equal width along the axis
    orthogonal to a clamped outer edge, and the i-th subdomain is the union
    of the first i slabs intersected with the domain.  The first clamped
    segment whose side puts the whole clamped boundary into the first
    subdomain determines the direction.

    """
    if domain.free:
        msg = "cannot decompose a domain without clamped boundary"
        raise DecompositionError(msg)
    if n < 2:
        msg = f"decomposition needs at least 2 subdomains, got {n}"
        raise ValueError(msg)

    a1, b1, a2, b2 = domain.outer.bounds
    sides = [outer_side(domain, segment) for segment in domain.clamp]
    if None in sides:
        msg = "clamped boundary must lie on the outer rectangle for decomposition"
        raise DecompositionError(msg)

    for axis, side in dict.fromkeys(sides):  # type: ignore[arg-type]
        lo, hi = domain.outer.lower[axis], domain.outer.upper[axis]
        width = (hi - lo) / n
        slabs = []
        for i in range(1, n):
            if side < 0:
                cut = (lo, lo + i * width)
            else:
                cut = (hi - i * width, hi)
            bounds = [a1, b1, a2, b2]
            bounds[2 * axis : 2 * axis + 2] = cut
            slabs.append(Rectangle(*bounds))
        first = slabs[0]
        if all(segment.inside(first) for segment in domain.clamp):
            break
    else:
        msg = "clamped boundary does not fit into a single slab"
        raise DecompositionError(msg)

    domains = tuple(domain.restrict(slab) for slab in slabs) + (domain,)
    logger.debug(
        "decomposed domain into %d slabs along x%d from the %s side",
        n,
        axis + 1,
        "lower" if side < 0 else "upper",
    )
    return SubdomainChain(domains, axis, side)


def sample_interior(
    domain: PlateDomain,
    n: int,
    rng: np.random.Generator,
) -> NDArray[Any]:
    """
    Draw *n* uniform random points from the domain.

    Points are drawn uniformly from the outer rectangle and rejected if
    they fall into the hole.

    """
    if n < 1:
        msg = f"number of samples must be positive, got {n}"
        raise ValueError(msg)
    lower, upper = domain.outer.lower, domain.outer.upper
    ratio = domain.outer.area / domain.area
    out = np.empty((n, 2))
    filled = 0
    while filled < n:
        size = int(np.ceil((n - filled) * ratio * 1.1)) + 16
        points = rng.uniform(lower, upper, size=(size, 2))
        if domain.hole is not None:
            points = points[~domain.hole.contains(points, closed=True)]
        take = min(len(points), n - filled)
        out[filled : filled + take] = points[:take]
        filled += take
    return out


BOUNDARY_PARTS = ("clamp", "free", "all")


def boundary_segments(domain: PlateDomain, part: str) -> list[Segment]:
    """Return the boundary segments of the given *part* of the domain."""
    if part == "clamp":
        return list(domain.clamp)
    if part == "free":
        return domain.free_boundary()
    if part == "all":
        return domain.boundary()
    msg = f"unknown boundary part {part!r} (expected one of {BOUNDARY_PARTS})"
    raise ValueError(msg)


def sample_boundary(
    domain: PlateDomain,
    part: str,
    n: int,
    rng: np.random.Generator,
) -> NDArray[Any]:
    """
    Draw *n* points uniformly by arclength from a *part* of the boundary,
    which is one of ``"clamp"``, ``"free"``, or ``"all"``.
    """
    segments = boundary_segments(domain, part)
    if not segments:
        msg = f"boundary part {part!r} of the domain is empty"
        raise ValueError(msg)
    lengths = np.array([s.length for s in segments])
    cumulative = np.cumsum(lengths)
    u = rng.uniform(0.0, cumulative[-1], size=n)
    index = np.searchsorted(cumulative, u, side="right")
    np.minimum(index, len(segments) - 1, out=index)
    start = cumulative[index] - lengths[index]
    t = (u - start) / lengths[index]
    a = np.array([s.start for s in segments])
    b = np.array([s.end for s in segments])
    return a[index] + t[:, np.newaxis] * (b[index] - a[index])


def grid_points(
    domain: PlateDomain,
    shape: tuple[int, int] = (1000, 400),
) -> tuple[NDArray[Any], NDArray[Any]]:
    """
    Return the nodes and weights of the midpoint rule on a tensor grid of
    the given *shape* over the outer rectangle.  Cells whose midpoint lies
    in the hole are omitted.
    """
    n1, n2 = shape
    if n1 < 1 or n2 < 1:
        msg = f"invalid grid shape {shape}"
        raise ValueError(msg)
    a1, b1, a2, b2 = domain.outer.bounds
    h1, h2 = (b1 - a1) / n1, (b2 - a2) / n2
    x1 = a1 + h1 * (np.arange(n1) + 0.5)
    x2 = a2 + h2 * (np.arange(n2) + 0.5)
    points = np.stack(np.meshgrid(x1, x2, indexing="ij"), axis=-1).reshape(-1, 2)
    if domain.hole is not None:
        points = points[~domain.hole.contains(points, closed=True)]
    weights = np.full(len(points), h1 * h2)
    return points, weights
