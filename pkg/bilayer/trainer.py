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
Module for training.

The deformation is trained by Adam on the Monte Carlo loss, with a fresh
batch of uniform samples in every step.  With pre-training, the network is
first trained on a chain of nested subdomains grown from the clamped
boundary, and each stage starts from the parameters of the previous one.

The batch of global step ``k`` is drawn from a generator seeded with
``(seed, k)``, so that a run resumed from a checkpoint at step ``k``
reproduces the uninterrupted run exactly.

"""

from __future__ import annotations

import hashlib
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import timedelta
from typing import TYPE_CHECKING, Any, Optional, Protocol

import numpy as np

from .autodiff import loss_gradient
from .core import NumericalError, check_finite
from .energy import mc_loss
from .geometry import sample_interior
from .progress import NoProgress

if TYPE_CHECKING:
    from numpy.typing import NDArray

    from .boundary import BoundaryLift
    from .energy import EnergyConfig
    from .geometry import PlateDomain, SubdomainChain
    from .network import NetworkParameters
    from .progress import Progress

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class OptimizerState:
    """
    State of the Adam optimiser: moments *m* and *v*, step counter *t*,
    learning rate *lr*, decay rates *betas*, and regulariser *eps*.
    """

    m: NDArray[Any]
    v: NDArray[Any]
    t: int = 0
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8

    def __post_init__(self) -> None:
        self.m = np.asarray(self.m, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.m.shape != self.v.shape or self.m.ndim != 1:
            msg = "optimizer moments must be vectors of the same length"
            raise ValueError(msg)
        if self.t < 0:
            msg = "optimizer step counter must be nonnegative"
            raise ValueError(msg)

    @classmethod
    def zeros(cls, size: int, **kwargs: Any) -> OptimizerState:
        """Return a fresh state for *size* parameters."""
        return cls(np.zeros(size), np.zeros(size), **kwargs)

    @property
    def size(self) -> int:
        return self.m.size

    def reset(self) -> None:
        """Reset moments and step counter."""
        self.m[:] = 0.0
        self.v[:] = 0.0
        self.t = 0

    def checksum(self) -> str:
        """Return a digest of moments and step counter."""
        h = hashlib.sha256()
        h.update(self.m.tobytes())
        h.update(self.v.tobytes())
        h.update(self.t.to_bytes(8, "little"))
        return h.hexdigest()


def adam_step(
    state: OptimizerState,
    params: NetworkParameters,
    grad: NDArray[Any],
    **context: Any,
) -> tuple[OptimizerState, NetworkParameters]:
    """
    Apply one bias-corrected Adam update with gradient *grad*.

    The moments of *state* are updated in place.  Returns the state and new
    parameters.  A non-finite gradient raises
    :class:`~bilayer.core.NumericalError` with the given context.

    """
    grad = np.asarray(grad, dtype=float)
    if grad.shape != state.m.shape:
        msg = f"gradient has shape {grad.shape}, expected {state.m.shape}"
        raise ValueError(msg)
    check_finite("gradient", grad, **context)
    b1, b2 = state.betas
    state.t += 1
    state.m *= b1
    state.m += (1 - b1) * grad
    state.v *= b2
    state.v += (1 - b2) * grad * grad
    mhat = state.m / (1 - b1**state.t)
    vhat = state.v / (1 - b2**state.t)
    theta = params.theta - state.lr * mhat / (np.sqrt(vhat) + state.eps)
    return state, params.replace(theta=theta)


def round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


@dataclass(frozen=True)
class Schedule:
    """
    Training schedule.

    If *chain* is given, the network is pre-trained for *epochs_pre* steps
    on each subdomain but the last, followed by *epochs* steps on the full
    domain.  The batch size is *batch_size* or, if not given, the area of
    the current (sub)domain times *batch_density*, rounded.

    """

    chain: Optional[SubdomainChain] = None
    epochs_pre: int = 50_000
    epochs: int = 1_000_000
    batch_size: Optional[int] = None
    batch_density: float = 16.0
    seed: int = 0
    metrics_every: int = 1000
    checkpoint_every: int = 10_000
    export_every: int = 10_000
    carry_moments: bool = True
    nthreads: int = 1
    deterministic: bool = True

    def __post_init__(self) -> None:
        for name in ("epochs_pre", "epochs"):
            if getattr(self, name) < 0:
                msg = f"{name} must be nonnegative"
                raise ValueError(msg)
        for name in ("metrics_every", "checkpoint_every", "export_every", "nthreads"):
            if getattr(self, name) < 1:
                msg = f"{name} must be positive"
                raise ValueError(msg)
        if self.batch_size is not None and self.batch_size < 1:
            msg = "batch size must be positive"
            raise ValueError(msg)
        if not self.batch_density > 0:
            msg = "batch density must be positive"
            raise ValueError(msg)

    def batch_for(self, domain: PlateDomain) -> int:
        """Return the batch size on *domain*."""
        if self.batch_size is not None:
            return self.batch_size
        return max(1, round_half_up(self.batch_density * domain.area))

    def stages(self, domain: PlateDomain) -> list[tuple[str, PlateDomain, int]]:
        """Return the ``(phase, domain, epochs)`` of all training stages."""
        stages = []
        if self.chain is not None:
            for i, sub in enumerate(self.chain.stages):
                stages.append((f"pre-{i + 1}", sub, self.epochs_pre))
        stages.append(("main", domain, self.epochs))
        return stages

    @property
    def pretraining_steps(self) -> int:
        if self.chain is None:
            return 0
        return len(self.chain.stages) * self.epochs_pre

    @property
    def total_steps(self) -> int:
        return self.pretraining_steps + self.epochs


@dataclass(frozen=True)
class MetricsRow:
    """
    One row of training metrics.  Rows of the ``test`` phase also carry the
    relative :math:`L^2` error and the shape label.
    """

    step: int
    E: float
    C: float
    Istar: float
    elapsed: Optional[float]
    phase: str
    e_l2: Optional[float] = None
    shape: Optional[str] = None


class RunOutput(Protocol):
    """
    Protocol for the receiver of training output.
    """

    def write_metrics(self, row: MetricsRow) -> None:
        """Append a row of metrics."""

    def checkpoint(
        self,
        step: int,
        params: NetworkParameters,
        state: OptimizerState,
    ) -> None:
        """Write a checkpoint of parameters and optimiser state."""

    def snapshot(self, step: int, params: NetworkParameters) -> None:
        """Write a snapshot of the deformation."""


def batch_rng(seed: int, step: int) -> np.random.Generator:
    """Return the random generator for the batch of the given global step."""
    return np.random.default_rng([seed, step])


@dataclass
class _Clock:
    start: float = field(default_factory=time.perf_counter)

    def elapsed(self) -> float:
        return time.perf_counter() - self.start


def _loss_and_gradient(
    params: NetworkParameters,
    bc: BoundaryLift,
    batch: NDArray[Any],
    cfg: EnergyConfig,
    domain: PlateDomain,
    executor: ThreadPoolExecutor | None,
    nthreads: int,
    **context: Any,
) -> tuple[float, NDArray[Any], float, float]:
    """
    Return loss, gradient, and the energy estimates for *batch*, splitting
    the batch into *nthreads* chunks if an executor is given.
    """

    def chunk(points: NDArray[Any]) -> tuple[float, NDArray[Any], float, float]:
        extra: dict[str, float] = {}

        def build(p: NetworkParameters) -> Any:
            istar, extra["E"], extra["C2"] = mc_loss(p, bc, points, cfg, domain)
            return istar

        try:
            loss, grad = loss_gradient(params, build, **context)
        except NumericalError as exc:
            raise exc.with_context(**context) from None
        return loss, grad, extra["E"], extra["C2"]

    if executor is None or nthreads == 1 or len(batch) < 2 * nthreads:
        return chunk(batch)

    parts = np.array_split(batch, nthreads)
    weights = [len(part) / len(batch) for part in parts]
    loss, grad, e_hat, c2_hat = 0.0, np.zeros(params.size), 0.0, 0.0
    # chunks are combined in order so the sum does not depend on scheduling
    for w, (lc, gc, ec, cc) in zip(weights, executor.map(chunk, parts)):
        loss += w * lc
        grad += w * gc
        e_hat += w * ec
        c2_hat += w * cc
    return loss, grad, e_hat, c2_hat


def train_on_domain(
    params: NetworkParameters,
    domain: PlateDomain,
    bc: BoundaryLift,
    cfg: EnergyConfig,
    schedule: Schedule,
    epochs: int,
    *,
    state: OptimizerState | None = None,
    start_step: int = 0,
    phase: str = "main",
    out: RunOutput | None = None,
    progress: Progress | None = None,
    clock: _Clock | None = None,
) -> tuple[NetworkParameters, list[MetricsRow]]:
    """
    Train for *epochs* steps on *domain*.

    Each step samples a batch on *domain*, evaluates the Monte Carlo loss
    and its gradient, and applies an Adam update to *params*.  Steps are
    numbered globally from *start_step*, which determines the batches and
    the cadence of metrics, checkpoints, and snapshots written to *out*.
    The optimiser *state* is updated in place.

    On numerical failure, the last good parameters are checkpointed before
    the error is raised.

    """
    if state is None:
        state = OptimizerState.zeros(params.size)
    if state.size != params.size:
        msg = "optimizer state does not match the parameters"
        raise ValueError(msg)
    if progress is None:
        progress = NoProgress()
    if clock is None:
        clock = _Clock()

    metrics: list[MetricsRow] = []
    if epochs == 0:
        return params, metrics

    batch_size = schedule.batch_for(domain)
    logger.info(
        "%s: training %d steps on %.4g area with batch size %d",
        phase,
        epochs,
        domain.area,
        batch_size,
    )

    t0 = time.monotonic()
    executor = None
    if schedule.nthreads > 1:
        executor = ThreadPoolExecutor(schedule.nthreads)

    step = start_step
    try:
        with progress.task(phase) as task:
            for step in range(start_step + 1, start_step + epochs + 1):
                batch = sample_interior(domain, batch_size, batch_rng(schedule.seed, step))
                loss, grad, e_hat, c2_hat = _loss_and_gradient(
                    params,
                    bc,
                    batch,
                    cfg,
                    domain,
                    executor,
                    schedule.nthreads,
                    step=step,
                    phase=phase,
                )
                state, new_params = adam_step(
                    state, params, grad, step=step, phase=phase
                )
                params = new_params

                if step % schedule.metrics_every == 0:
                    row = MetricsRow(
                        step=step,
                        E=e_hat,
                        C=float(np.sqrt(c2_hat)),
                        Istar=loss,
                        elapsed=None if schedule.deterministic else clock.elapsed(),
                        phase=phase,
                    )
                    metrics.append(row)
                    if out is not None:
                        out.write_metrics(row)
                    task.metrics(E=row.E, C=row.C)
                if out is not None and step % schedule.checkpoint_every == 0:
                    out.checkpoint(step, params, state)
                if out is not None and step % schedule.export_every == 0:
                    out.snapshot(step, params)
                if step % 100 == 0 or step == start_step + epochs:
                    task.update(step - start_step, epochs)
    except NumericalError:
        # params still holds the result of the last completed step
        last = step - 1
        logger.error("%s: numerical failure at step %d", phase, step)
        if out is not None:
            out.checkpoint(last, params, state)
        raise
    finally:
        if executor is not None:
            executor.shutdown()

    logger.info(
        "%s: finished %d steps in %s",
        phase,
        epochs,
        timedelta(seconds=round(time.monotonic() - t0)),
    )
    return params, metrics


def run_schedule(
    params: NetworkParameters,
    domain: PlateDomain,
    bc: BoundaryLift,
    cfg: EnergyConfig,
    schedule: Schedule,
    *,
    state: OptimizerState | None = None,
    start_step: int = 0,
    out: RunOutput | None = None,
    progress: Progress | None = None,
) -> tuple[NetworkParameters, list[MetricsRow]]:
    """
    Train with the pre-training schedule.

    The network is trained on each pre-training subdomain in turn, then on
    the full *domain*.  The optimiser *state* is carried across stages
    unless the schedule says otherwise.  Training resumes after global step
    *start_step*, skipping all stages that were completed before it.

    """
    if schedule.chain is not None and schedule.chain.full != domain:
        msg = "subdomain chain does not end with the training domain"
        raise ValueError(msg)
    if state is None:
        state = OptimizerState.zeros(params.size)
    if progress is None:
        progress = NoProgress()

    clock = _Clock()
    metrics: list[MetricsRow] = []
    begin = 0
    for phase, sub, epochs in schedule.stages(domain):
        end = begin + epochs
        if start_step < end:
            first = max(start_step, begin)
            if first == begin and begin > 0 and not schedule.carry_moments:
                logger.info("%s: resetting optimizer moments", phase)
                state.reset()
            logger.debug("%s: optimizer state %s", phase, state.checksum()[:16])
            params, rows = train_on_domain(
                params,
                sub,
                bc,
                cfg,
                schedule,
                end - first,
                state=state,
                start_step=first,
                phase=phase,
                out=out,
                progress=progress,
                clock=clock,
            )
            metrics += rows
        begin = end
    return params, metrics
