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
Module for analytic oracles.

The oracles feed closed-form deformations through the energy pipeline
with deterministic grid quadrature and compare the results with their
closed forms: the witnesses that lower the reshaped penalised energy
below that of the exact solution, and the exact cylinder.

"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from datetime import timedelta
from typing import TYPE_CHECKING

from .energy import grid_quadrature, prop1_witness, prop2_witness
from .evaluation import cylinder_reference
from .geometry import PlateDomain, Rectangle

if TYPE_CHECKING:
    from .energy import Witness
    from .progress import Progress

logger = logging.getLogger(__name__)

# the standard plate (-5, 5) x (-2, 2)
STANDARD_PLATE = PlateDomain(Rectangle(-5.0, 5.0, -2.0, 2.0))

PROP1_BETAS = (1.0, 10.0, 100.0, 1000.0)
PROP2_CASES = ((0.5, 16.0), (1.0, 9.0), (1.0, 100.0))
CYLINDER_ALPHAS = (1.0, 2.5, 5.0, 10.0)

# largest isometry tolerance of the exact cylinder
CYLINDER_TOLERANCE = 1e-12

# relative slack for inequality checks
BOUND_SLACK = 1e-9


@dataclass(frozen=True)
class OracleCheck:
    """
    Result of comparing a computed *value* with its *expected* value.
    """

    name: str
    value: float
    expected: float
    deviation: float
    passed: bool

    def __str__(self) -> str:
        status = "ok" if self.passed else "FAILED"
        return (
            f"{self.name}: {self.value:.10g} (expected {self.expected:.10g}, "
            f"deviation {self.deviation:.3e}) {status}"
        )


@dataclass
class OracleReport:
    """
    Collection of oracle checks.
    """

    checks: list[OracleCheck] = field(default_factory=list)

    def __iter__(self):
        return iter(self.checks)

    def __len__(self) -> int:
        return len(self.checks)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> list[OracleCheck]:
        return [check for check in self.checks if not check.passed]

    @property
    def max_deviation(self) -> float:
        """Largest relative deviation of the equality checks."""
        return max(
            (c.deviation for c in self.checks if c.deviation == c.deviation),
            default=0.0,
        )

    def relative(self, name: str, value: float, expected: float, tolerance: float) -> None:
        deviation = abs(value - expected) / abs(expected)
        self.checks.append(
            OracleCheck(name, value, expected, deviation, deviation <= tolerance),
        )

    def at_most(self, name: str, value: float, bound: float, *, strict: bool) -> None:
        slack = 0.0 if strict else BOUND_SLACK * abs(bound)
        passed = value < bound if strict else value <= bound + slack
        # inequality checks have no meaningful relative deviation
        self.checks.append(OracleCheck(name, value, bound, float("nan"), passed))


def _witness_checks(
    report: OracleReport,
    label: str,
    witness: Witness,
    domain: PlateDomain,
    shape: tuple[int, int],
    tolerance: float,
) -> None:
    area = domain.area
    est = grid_quadrature(witness.jet, domain, witness.config(), shape)
    report.relative(f"{label} energy", est.energy, witness.energy(area), tolerance)
    report.relative(
        f"{label} tolerance", est.tolerance, witness.tolerance(area), tolerance
    )
    report.at_most(
        f"{label} penalised",
        est.penalized,
        witness.bound(area),
        strict=witness.strict,
    )
    if witness.strict:
        report.at_most(f"{label} penalised sign", est.penalized, 0.0, strict=True)


def _cylinder_checks(
    report: OracleReport,
    alpha: float,
    domain: PlateDomain,
    shape: tuple[int, int],
) -> None:
    reference = cylinder_reference(alpha, domain)
    est = grid_quadrature(reference.jet, domain, reference.config(), shape)
    label = f"cylinder, alpha={alpha:g}"
    report.relative(f"{label} energy", est.energy, reference.energy, 1e-6)
    report.at_most(
        f"{label} tolerance", est.tolerance, CYLINDER_TOLERANCE, strict=False
    )


def oracle_suite(
    shape: tuple[int, int] = (1000, 400),
    tolerance: float = 1e-3,
    *,
    domain: PlateDomain = STANDARD_PLATE,
    progress: Progress | None = None,
) -> OracleReport:
    """
    Run all analytic oracles with grid quadrature of the given *shape* on
    *domain*.

    The energies and isometry tolerances of the witnesses must match their
    closed forms to relative *tolerance*, and their penalised energies must
    satisfy the closed-form bounds.  The energy of the exact cylinder must
    match ``alpha**2 |Omega| / 2`` to relative ``1e-6`` with vanishing
    isometry tolerance.

    """
    from .progress import NoProgress

    if progress is None:
        progress = NoProgress()

    t = time.monotonic()

    witnesses = [
        (f"unit curvature witness, beta={beta:g}", prop1_witness(beta))
        for beta in PROP1_BETAS
    ]
    witnesses += [
        (
            f"large curvature witness, gamma={gamma:g}, beta={beta:g}",
            prop2_witness(beta, gamma),
        )
        for gamma, beta in PROP2_CASES
    ]
    total = len(witnesses) + len(CYLINDER_ALPHAS)

    report = OracleReport()
    with progress.task("oracles") as task:
        for i, (label, witness) in enumerate(witnesses):
            logger.debug("checking %s", label)
            _witness_checks(report, label, witness, domain, shape, tolerance)
            task.update(i + 1, total)
        for i, alpha in enumerate(CYLINDER_ALPHAS, start=len(witnesses)):
            logger.debug("checking cylinder with alpha=%g", alpha)
            _cylinder_checks(report, alpha, domain, shape)
            task.update(i + 1, total)

    logger.info(
        "ran %d oracle checks in %s, %d failed",
        len(report),
        timedelta(seconds=round(time.monotonic() - t)),
        len(report.failures),
    )
    return report
