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
Module for automatic differentiation.

Two mechanisms are combined here.  Spatial derivatives of the network
output up to second order are propagated forward with :class:`Jet2`
objects, which carry the value, the gradient, and the packed Hessian of a
field with respect to the two plate coordinates.  Gradients of a scalar
loss with respect to the network parameters are obtained by a single
reverse sweep over a :class:`Tape`, which records every operation on
:class:`Var` objects.

A :class:`Var` holds a whole array of independent scalar values (one entry
per sample and channel), so that one recorded operation covers the entire
mini-batch.  Plain NumPy arrays take the place of :class:`Var` whenever
nothing needs to be taped, e.g. during evaluation.

"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Callable, Union

import numpy as np

from .core import NumericalError

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import ArrayLike, NDArray

    from .network import NetworkParameters

# the type of a vector-Jacobian product
Pullback = Callable[["NDArray[Any]"], "NDArray[Any]"]

# generation counter shared by all tapes
_generations = itertools.count()


def _unbroadcast(g: NDArray[Any], shape: tuple[int, ...]) -> NDArray[Any]:
    """
    Sum *g* over the axes that broadcasting added to an operand of *shape*.
    """
    if g.shape == shape:
        return g
    ndim = g.ndim - len(shape)
    if ndim > 0:
        g = g.sum(axis=tuple(range(ndim)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


class Tape:
    """
    Record of operations for a reverse sweep.

    Nodes are appended in evaluation order, which is a topological order of
    the computation graph.  A tape is meant to be used for exactly one loss
    and is cleared after :meth:`gradient`.

    """

    def __init__(self) -> None:
        self.generation = next(_generations)
        self._parents: list[tuple[tuple[int, Pullback], ...]] = []
        self._shapes: list[tuple[int, ...]] = []
        self.closed = False

    def __len__(self) -> int:
        return len(self._parents)

    def __repr__(self) -> str:
        state = "closed" if self.closed else f"{len(self)} nodes"
        return f"<Tape generation={self.generation} {state}>"

    def _check_open(self) -> None:
        if self.closed:
            msg = f"tape generation {self.generation} was already cleared"
            raise ValueError(msg)

    def variable(self, value: ArrayLike) -> Var:
        """
        Create a leaf variable on this tape.
        """
        return self.record(np.array(value, dtype=float), ())

    def record(
        self,
        value: NDArray[Any],
        parents: Sequence[tuple[Var, Pullback]],
    ) -> Var:
        """
        Record a new node with the given *parents* and their pullbacks.
        """
        self._check_open()
        for parent, _ in parents:
            if parent.tape is not self:
                msg = "cannot combine variables from different tapes"
                raise ValueError(msg)
        index = len(self._parents)
        self._parents.append(tuple((p.index, f) for p, f in parents))
        self._shapes.append(value.shape)
        return Var(value, self, index)

    def gradient(self, loss: Var, wrt: Sequence[Var]) -> list[NDArray[Any]]:
        """
        Reverse sweep from *loss* to the variables *wrt*.
        """
        self._check_open()
        if loss.tape is not self:
            msg = "loss was not recorded on this tape"
            raise ValueError(msg)
        adjoints: list[NDArray[Any] | None] = [None] * (loss.index + 1)
        adjoints[loss.index] = np.ones_like(loss.value)
        for i in range(loss.index, -1, -1):
            g = adjoints[i]
            if g is None:
                continue
            for j, pullback in self._parents[i]:
                contribution = pullback(g)
                if adjoints[j] is None:
                    adjoints[j] = contribution
                else:
                    adjoints[j] = adjoints[j] + contribution
        grads = []
        for v in wrt:
            if v.tape is not self:
                msg = "variable was not recorded on this tape"
                raise ValueError(msg)
            g = adjoints[v.index] if v.index <= loss.index else None
            grads.append(np.zeros(self._shapes[v.index]) if g is None else g)
        return grads

    def clear(self) -> None:
        """
        Release all recorded nodes.  The tape cannot be used afterwards.
        """
        self._parents.clear()
        self._shapes.clear()
        self.closed = True


def _operand(tape: Tape, x: Any) -> Var | NDArray[Any]:
    """Check that *x* belongs to *tape*, or turn it into a constant array."""
    if isinstance(x, Var):
        if x.tape is not tape:
            msg = "cannot combine variables from different tapes"
            raise ValueError(msg)
        return x
    return np.asarray(x, dtype=float)


def value_of(x: Any) -> NDArray[Any]:
    """Return the numerical value of a :class:`Var` or array."""
    if isinstance(x, Var):
        return x.value
    return np.asarray(x, dtype=float)


class Var:
    """
    Array of taped scalars.

    Instances are created by :meth:`Tape.variable` and by arithmetic on
    other instances.  Arithmetic with plain arrays and numbers treats those
    as constants.

    """

    __slots__ = ("index", "tape", "value")

    # make NumPy defer to our reflected operators
    __array_ufunc__ = None

    def __init__(self, value: NDArray[Any], tape: Tape, index: int) -> None:
        self.value = value
        self.tape = tape
        self.index = index

    def __repr__(self) -> str:
        return f"Var(shape={self.shape}, generation={self.tape.generation})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def __float__(self) -> float:
        return float(self.value)

    def _binary(
        self,
        other: Any,
        value: NDArray[Any],
        pull_self: Pullback,
        pull_other: Callable[[NDArray[Any], NDArray[Any]], NDArray[Any]],
    ) -> Var:
        parents = [(self, pull_self)]
        if isinstance(other, Var):
            parents.append((other, lambda g: pull_other(g, other.value)))
        return self.tape.record(value, parents)

    def __add__(self, other: Any) -> Var:
        other = _operand(self.tape, other)
        b = value_of(other)
        return self._binary(
            other,
            self.value + b,
            lambda g: _unbroadcast(g, self.shape),
            lambda g, b: _unbroadcast(g, b.shape),
        )

    __radd__ = __add__

    def __sub__(self, other: Any) -> Var:
        other = _operand(self.tape, other)
        b = value_of(other)
        return self._binary(
            other,
            self.value - b,
            lambda g: _unbroadcast(g, self.shape),
            lambda g, b: _unbroadcast(-g, b.shape),
        )

    def __rsub__(self, other: Any) -> Var:
        return (-self) + other

    def __neg__(self) -> Var:
        return self.tape.record(-self.value, [(self, lambda g: -g)])

    def __mul__(self, other: Any) -> Var:
        other = _operand(self.tape, other)
        a, b = self.value, value_of(other)
        return self._binary(
            other,
            a * b,
            lambda g: _unbroadcast(g * b, a.shape),
            lambda g, b: _unbroadcast(g * a, b.shape),
        )

    __rmul__ = __mul__

    def __truediv__(self, other: Any) -> Var:
        other = _operand(self.tape, other)
        a, b = self.value, value_of(other)
        return self._binary(
            other,
            a / b,
            lambda g: _unbroadcast(g / b, a.shape),
            lambda g, b: _unbroadcast(-g * a / (b * b), b.shape),
        )

    def __rtruediv__(self, other: Any) -> Var:
        a = np.asarray(other, dtype=float)
        b = self.value
        return self.tape.record(
            a / b,
            [(self, lambda g: _unbroadcast(-g * a / (b * b), b.shape))],
        )

    def __pow__(self, p: float) -> Var:
        if isinstance(p, Var):
            msg = "exponent must be a constant"
            raise TypeError(msg)
        a = self.value
        return self.tape.record(a**p, [(self, lambda g: g * p * a ** (p - 1))])

    def __matmul__(self, other: Any) -> Var:
        other = _operand(self.tape, other)
        a, b = self.value, value_of(other)
        if a.ndim != 2 or b.ndim != 2:
            msg = "matrix product requires two-dimensional operands"
            raise ValueError(msg)
        return self._binary(
            other,
            a @ b,
            lambda g: g @ b.T,
            lambda g, b: a.T @ g,
        )

    def __rmatmul__(self, other: Any) -> Var:
        a, b = np.asarray(other, dtype=float), self.value
        if a.ndim != 2 or b.ndim != 2:
            msg = "matrix product requires two-dimensional operands"
            raise ValueError(msg)
        return self.tape.record(a @ b, [(self, lambda g: a.T @ g)])

    def __getitem__(self, key: Any) -> Var:
        shape = self.shape
        parts = key if isinstance(key, tuple) else (key,)
        basic = all(
            isinstance(k, (int, np.integer, slice)) or k is Ellipsis or k is None
            for k in parts
        )

        def pullback(g: NDArray[Any]) -> NDArray[Any]:
            z = np.zeros(shape)
            if basic:
                z[key] += g
            else:
                np.add.at(z, key, g)
            return z

        return self.tape.record(self.value[key], [(self, pullback)])

    def reshape(self, *shape: Any) -> Var:
        old = self.shape
        return self.tape.record(
            self.value.reshape(*shape),
            [(self, lambda g: g.reshape(old))],
        )

    def sum(self, axis: int | None = None) -> Var:
        shape = self.shape
        if axis is None:
            return self.tape.record(
                np.sum(self.value),
                [(self, lambda g: np.full(shape, g))],
            )
        axis = axis % len(shape)
        return self.tape.record(
            self.value.sum(axis=axis),
            [(self, lambda g: np.broadcast_to(np.expand_dims(g, axis), shape))],
        )

    def tanh(self) -> Var:
        t = np.tanh(self.value)
        return self.tape.record(t, [(self, lambda g: g * (1 - t * t))])

    def sin(self) -> Var:
        a = self.value
        return self.tape.record(np.sin(a), [(self, lambda g: g * np.cos(a))])

    def cos(self) -> Var:
        a = self.value
        return self.tape.record(np.cos(a), [(self, lambda g: -g * np.sin(a))])


# a taped or constant array
Scalar = Union[Var, "NDArray[Any]"]


def tanh(x: Any) -> Any:
    """Hyperbolic tangent of a :class:`Jet2`, :class:`Var`, or array."""
    if isinstance(x, (Jet2, Var)):
        return x.tanh()
    return np.tanh(x)


def sin(x: Any) -> Any:
    """Sine of a :class:`Jet2`, :class:`Var`, or array."""
    if isinstance(x, (Jet2, Var)):
        return x.sin()
    return np.sin(x)


def cos(x: Any) -> Any:
    """Cosine of a :class:`Jet2`, :class:`Var`, or array."""
    if isinstance(x, (Jet2, Var)):
        return x.cos()
    return np.cos(x)


@dataclass(frozen=True)
class Jet2:
    """
    Second-order jet of a field over the plate coordinates.

    Each component is an array (or :class:`Var`) whose last axis indexes
    the channels of the field.  The Hessian is stored in packed order
    ``(d11, d12, d22)``, which makes it symmetric by construction.

    """

    value: Any
    d1: tuple[Any, Any]
    d2: tuple[Any, Any, Any]

    __array_ufunc__ = None

    def _chain(self, f0: Any, f1: Any, f2: Any) -> Jet2:
        """
        Compose a scalar function with derivatives *f0*, *f1*, *f2*
        (evaluated at the value) with this jet.
        """
        a1, a2 = self.d1
        a11, a12, a22 = self.d2
        return Jet2(
            f0,
            (f1 * a1, f1 * a2),
            (
                f1 * a11 + f2 * (a1 * a1),
                f1 * a12 + f2 * (a1 * a2),
                f1 * a22 + f2 * (a2 * a2),
            ),
        )

    def tanh(self) -> Jet2:
        s = tanh(self.value)
        t = 1 - s * s
        return self._chain(s, t, -2 * s * t)

    def sin(self) -> Jet2:
        s, c = sin(self.value), cos(self.value)
        return self._chain(s, c, -s)

    def cos(self) -> Jet2:
        s, c = sin(self.value), cos(self.value)
        return self._chain(c, -s, -c)

    def __add__(self, other: Any) -> Jet2:
        if isinstance(other, Jet2):
            return Jet2(
                self.value + other.value,
                (self.d1[0] + other.d1[0], self.d1[1] + other.d1[1]),
                (
                    self.d2[0] + other.d2[0],
                    self.d2[1] + other.d2[1],
                    self.d2[2] + other.d2[2],
                ),
            )
        return Jet2(self.value + other, self.d1, self.d2)

    __radd__ = __add__

    def __neg__(self) -> Jet2:
        return Jet2(
            -self.value,
            (-self.d1[0], -self.d1[1]),
            (-self.d2[0], -self.d2[1], -self.d2[2]),
        )

    def __sub__(self, other: Any) -> Jet2:
        return self + (-other)

    def __rsub__(self, other: Any) -> Jet2:
        return (-self) + other

    def __mul__(self, other: Any) -> Jet2:
        if not isinstance(other, Jet2):
            return Jet2(
                self.value * other,
                (self.d1[0] * other, self.d1[1] * other),
                (self.d2[0] * other, self.d2[1] * other, self.d2[2] * other),
            )
        f, g = self.value, other.value
        f1, f2 = self.d1
        g1, g2 = other.d1
        f11, f12, f22 = self.d2
        g11, g12, g22 = other.d2
        return Jet2(
            f * g,
            (f1 * g + f * g1, f2 * g + f * g2),
            (
                f11 * g + 2 * (f1 * g1) + f * g11,
                f12 * g + f1 * g2 + f2 * g1 + f * g12,
                f22 * g + 2 * (f2 * g2) + f * g22,
            ),
        )

    __rmul__ = __mul__

    def linear(self, weight: Any, bias: Any) -> Jet2:
        """
        Apply the affine map ``x @ weight + bias`` over the channel axis.
        """
        return Jet2(
            self.value @ weight + bias,
            (self.d1[0] @ weight, self.d1[1] @ weight),
            (self.d2[0] @ weight, self.d2[1] @ weight, self.d2[2] @ weight),
        )

    def reshape(self, *shape: Any) -> Jet2:
        """
        Reshape all components of the jet.
        """
        return Jet2(
            self.value.reshape(*shape),
            (self.d1[0].reshape(*shape), self.d1[1].reshape(*shape)),
            tuple(d.reshape(*shape) for d in self.d2),
        )

    def channel(self, k: int) -> Jet2:
        """
        Return channel *k* as a jet with a single channel.
        """
        s = (..., slice(k, k + 1))
        return Jet2(
            self.value[s],
            (self.d1[0][s], self.d1[1][s]),
            (self.d2[0][s], self.d2[1][s], self.d2[2][s]),
        )

    def __getitem__(self, k: int) -> Jet2:
        return self.channel(k)

    @property
    def channels(self) -> int:
        return value_of(self.value).shape[-1]

    def numpy(self) -> Jet2:
        """
        Return a copy of the jet with all taped components replaced by their
        values.
        """
        return Jet2(
            value_of(self.value),
            (value_of(self.d1[0]), value_of(self.d1[1])),
            tuple(value_of(d) for d in self.d2),
        )


def seed_input(x: ArrayLike) -> Jet2:
    """
    Seed the jet of the coordinate map for the point(s) *x*.

    The result has two channels; channel *k* is the coordinate ``x_k`` with
    unit gradient ``e_k`` and vanishing Hessian.

    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (2,):
        msg = f"points must have a last axis of size 2, got shape {x.shape}"
        raise ValueError(msg)
    e1 = np.broadcast_to([1.0, 0.0], x.shape).copy()
    e2 = np.broadcast_to([0.0, 1.0], x.shape).copy()
    zero = np.zeros_like(x)
    return Jet2(x, (e1, e2), (zero, zero.copy(), zero.copy()))


def loss_gradient(
    params: NetworkParameters,
    build: Callable[[NetworkParameters], Var],
    **context: Any,
) -> tuple[float, NDArray[Any]]:
    """
    Return the value of a scalar loss and its gradient with respect to the
    network parameters.

    The function *build* receives a copy of *params* whose parameter vector
    is a taped :class:`Var` and must return the loss as a :class:`Var` of
    size one.  A fresh tape is used and cleared after the reverse sweep.
    Any keyword arguments are attached as context to the
    :class:`~bilayer.core.NumericalError` raised for a non-finite loss.

    """
    tape = Tape()
    try:
        theta = tape.variable(params.theta)
        loss = build(params.replace(theta=theta))
        if not isinstance(loss, Var) or loss.tape is not tape:
            msg = "loss must be a variable recorded from the taped parameters"
            raise TypeError(msg)
        if loss.value.size != 1:
            msg = f"loss must be a single scalar, got shape {loss.shape}"
            raise ValueError(msg)
        value = float(loss.value)
        if not np.isfinite(value):
            msg = "non-finite loss"
            raise NumericalError(msg, **context, loss=value)
        (grad,) = tape.gradient(loss, [theta])
    finally:
        tape.clear()
    return value, np.asarray(grad, dtype=float).reshape(-1)
