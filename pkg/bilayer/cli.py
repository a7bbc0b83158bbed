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
"""The Bilayer command line interface."""

from __future__ import annotations

import argparse
import configparser
import logging
import os
import re
import sys
import time
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import TYPE_CHECKING, Any, Optional

import numpy as np

from .boundary import AffineTarget
from .core import ConfigError, NumericalError
from .energy import FORMULATIONS, AffineSource, EnergyConfig
from .evaluation import ShapeThresholds
from .geometry import PlateDomain, Rectangle, Segment
from .network import Architecture
from .trainer import Schedule

if TYPE_CHECKING:
    from .boundary import BoundaryLift
    from .evaluation import ReferenceSolution
    from .progress import Progress

# environment variable with the root of relative output paths
OUTPUT_ENV = "BILAYER_OUTPUT"

# exit codes
EXIT_CONFIG_ERROR = 1
EXIT_NUMERICAL_ERROR = 2
EXIT_ORACLE_FAILURE = 3
EXIT_FAILURE = 4

# valid sections and their option keys
SCHEMA: dict[str, tuple[str, ...]] = {
    "domain": ("outer", "hole", "clamp"),
    "energy": (
        "z",
        "beta",
        "formulation",
        "normalize-normal",
        "source",
        "source-gradient",
    ),
    "network": ("blocks", "width", "seed"),
    "schedule": (
        "pretrain",
        "epochs-pre",
        "epochs",
        "batch-size",
        "batch-density",
        "seed",
        "learning-rate",
        "metrics-every",
        "checkpoint-every",
        "export-every",
        "carry-moments",
        "threads",
        "deterministic",
    ),
    "g1": ("target", "steps", "samples", "seed", "checkpoint"),
    "evaluation": (
        "alpha",
        "reference-energy",
        "density",
        "seed",
        "e-l2-threshold",
        "energy-threshold",
    ),
    "run": ("output", "mesh-resolution"),
}

# sections that every configuration must have
REQUIRED_SECTIONS = ("domain", "energy")


def getlist(value: str) -> list[str]:
    """Convert to list."""
    return list(filter(None, map(str.strip, value.splitlines())))


def getnumber(value: str) -> float:
    """Convert to number, allowing fractions such as ``10/3``."""
    try:
        return float(Fraction(value.strip()))
    except (ValueError, ZeroDivisionError):
        msg = f"Invalid value: {value!r} (expected a number)"
        raise ValueError(msg) from None


def getfloats(value: str) -> list[float]:
    """Convert to list of numbers."""
    return [getnumber(item) for item in value.split()]


def getresolution(value: str) -> tuple[int, int]:
    """Convert to a pair of vertex counts."""
    items = value.split()
    if len(items) != 2 or not all(item.isdigit() for item in items):
        msg = f"Invalid value: {value!r} (expected two integers)"
        raise ValueError(msg)
    return int(items[0]), int(items[1])


def getchoice(value: str, choices: dict[str, Any]) -> Any:
    """Get choice from a fixed set of option values."""
    try:
        return choices[value]
    except KeyError:
        expected = ", ".join(map(repr, choices))
        msg = f"Invalid value: {value!r} (expected {expected})"
        raise ValueError(msg) from None


def getpath(value: str) -> str:
    "Convert to path, expanding environment variables."
    return os.path.expanduser(os.path.expandvars(value))


_SECTION_LINE = re.compile(r"^\[(?P<name>[^\]]+)\]")
_OPTION_LINE = re.compile(r"^(?P<key>[^\s=#\[][^=]*?)\s*=")


def option_lines(text: str) -> dict[tuple[str, str | None], int]:
    """
    Return the line numbers of sections and options in configuration text.
    Sections are keyed as ``(section, None)``.
    """
    lines: dict[tuple[str, str | None], int] = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        if match := _SECTION_LINE.match(line):
            section = match["name"].strip()
            lines.setdefault((section, None), lineno)
        elif section is not None and (match := _OPTION_LINE.match(line)):
            lines.setdefault((section, match["key"].strip().lower()), lineno)
    return lines


class ConfigParser(configparser.ConfigParser):
    """ConfigParser with additional getters and line-anchored errors."""

    _UNSET = configparser._UNSET  # type: ignore[attr-defined]

    def __init__(self) -> None:
        # fully specify parent class
        super().__init__(
            dict_type=dict,
            allow_no_value=False,
            delimiters=("=",),
            comment_prefixes=("#",),
            inline_comment_prefixes=("#",),
            strict=True,
            empty_lines_in_values=False,
            default_section="defaults",
            interpolation=None,
            converters={
                "list": getlist,
                "number": getnumber,
                "floats": getfloats,
                "resolution": getresolution,
                "path": getpath,
            },
        )
        self.source: str | None = None
        self.lines: dict[tuple[str, str | None], int] = {}

    def read_experiment(self, text: str, source: str = "<string>") -> None:
        """
        Read configuration *text* from *source*, keeping track of the line
        numbers of sections and options.
        """
        try:
            self.read_string(text, source)
        except configparser.DuplicateOptionError as exc:
            msg = f"duplicate option {exc.option!r} in section [{exc.section}]"
            raise ConfigError(msg, path=source, line=exc.lineno) from None
        except configparser.DuplicateSectionError as exc:
            msg = f"duplicate section [{exc.section}]"
            raise ConfigError(msg, path=source, line=exc.lineno) from None
        except configparser.MissingSectionHeaderError as exc:
            msg = f"option outside of a section: {exc.line.strip()!r}"
            raise ConfigError(msg, path=source, line=exc.lineno) from None
        except configparser.ParsingError as exc:
            lineno, line = exc.errors[0]
            msg = f"cannot parse {line.strip()!r}"
            raise ConfigError(msg, path=source, line=lineno) from None
        self.source = source
        self.lines.update(option_lines(text))

    def line(self, section: str, option: str | None = None) -> int | None:
        """Return the line number of a section or option, if known."""
        if option is not None and (section, option) in self.lines:
            return self.lines[section, option]
        return self.lines.get((section, None))

    def error(
        self,
        message: str,
        section: str,
        option: str | None = None,
    ) -> ConfigError:
        """Return a :class:`ConfigError` anchored to a section or option."""
        return ConfigError(
            message,
            path=self.source,
            line=self.line(section, option),
        )

    @contextmanager
    def anchor(self, section: str, option: str | None = None) -> Iterator[None]:
        """
        Context manager that turns invalid values into errors anchored to the
        given section or option.
        """
        try:
            yield
        except ConfigError:
            raise
        except configparser.NoOptionError as exc:
            msg = f"missing option {exc.option!r} in section [{exc.section}]"
            raise self.error(msg, section) from None
        except configparser.NoSectionError as exc:
            msg = f"missing section [{exc.section}]"
            raise ConfigError(msg, path=self.source) from None
        except (TypeError, ValueError) as exc:
            prefix = f"[{section}] {option}: " if option else f"[{section}] "
            raise self.error(prefix + str(exc), section, option) from None

    def getchoice(
        self,
        section,
        option,
        choices,
        *,
        raw=False,
        vars=None,  # noqa: A002
        fallback=_UNSET,
    ):
        """Get choice from a fixed set of option values."""
        try:
            value = self.get(section, option, raw=False, vars=None)
        except (configparser.NoSectionError, configparser.NoOptionError):
            if fallback is not self._UNSET:
                return fallback
            raise
        return getchoice(value, choices)

    def check_schema(self) -> None:
        """
        Raise :class:`ConfigError` for unknown or missing sections and for
        unknown options.
        """
        for section in self.sections():
            if section not in SCHEMA:
                expected = ", ".join(f"[{s}]" for s in SCHEMA)
                msg = f"unknown section [{section}] (expected {expected})"
                raise self.error(msg, section)
            for option in self.options(section):
                if option not in SCHEMA[section]:
                    expected = ", ".join(SCHEMA[section])
                    msg = f"unknown option {option!r} in section [{section}] (expected {expected})"
                    raise self.error(msg, section, option)
        for section in REQUIRED_SECTIONS:
            if not self.has_section(section):
                msg = f"missing section [{section}]"
                raise ConfigError(msg, path=self.source)


def _numbers(values: list[float], n: int, what: str) -> list[float]:
    if len(values) != n:
        msg = f"expected {n} numbers for {what}, got {len(values)}"
        raise ValueError(msg)
    return values


def _fmt(x: float) -> str:
    """Format a number so that it reads back exactly."""
    return repr(float(x))


@dataclass(frozen=True)
class G1Settings:
    """
    Settings for the trained *g1* of clamps that are not a full edge.
    """

    target: AffineTarget
    steps: int = 50_000
    samples: int = 256
    seed: int = 0
    checkpoint: Optional[str] = None


@dataclass(frozen=True)
class EvaluationSettings:
    """
    Settings for the test metrics.  If *alpha* is given, the deformation is
    compared with the cylinder of that curvature.
    """

    alpha: Optional[float] = None
    reference_energy: Optional[float] = None
    density: float = 1e4
    seed: int = 1
    thresholds: ShapeThresholds = ShapeThresholds()

    def reference(self, domain: PlateDomain) -> ReferenceSolution | None:
        """Return the reference solution on *domain*, if any."""
        from .evaluation import cylinder_reference

        if self.alpha is None:
            return None
        return cylinder_reference(self.alpha, domain, self.reference_energy)

    def samples(self, domain: PlateDomain) -> int:
        """Number of test samples on *domain*."""
        return max(1, int(np.floor(self.density * domain.area + 0.5)))


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Complete description of an experiment.

    The *schedule* never holds a subdomain chain; if *pretrain* is nonzero,
    the chain of that many subdomains is made by
    :meth:`training_schedule`.

    """

    domain: PlateDomain
    energy: EnergyConfig
    arch: Architecture = Architecture()
    network_seed: int = 0
    schedule: Schedule = Schedule()
    pretrain: int = 0
    learning_rate: float = 1e-3
    g1: Optional[G1Settings] = None
    evaluation: EvaluationSettings = EvaluationSettings()
    output: str = "run"
    mesh_resolution: tuple[int, int] = (101, 41)

    def training_schedule(self) -> Schedule:
        """Return the schedule with the subdomain chain for pre-training."""
        from .geometry import decompose

        if self.pretrain == 0:
            return self.schedule
        return replace(self.schedule, chain=decompose(self.domain, self.pretrain))

    def to_config(self) -> str:
        """Return the configuration text of the experiment."""
        d = self.domain
        lines = ["[domain]", "outer = " + " ".join(map(_fmt, d.outer.bounds))]
        if d.hole is not None:
            lines.append("hole = " + " ".join(map(_fmt, d.hole.bounds)))
        if d.clamp:
            lines.append("clamp =")
            for s in d.clamp:
                lines.append("    " + " ".join(map(_fmt, (*s.start, *s.end))))

        e = self.energy
        lines += [
            "",
            "[energy]",
            "Z = " + " ".join(_fmt(z) for row in e.Z for z in row),
            f"beta = {_fmt(e.beta)}",
            f"formulation = {e.formulation}",
            f"normalize-normal = {str(e.normalize_normal).lower()}",
        ]
        if e.source is not None:
            lines.append("source = " + " ".join(map(_fmt, e.source.constant)))
            gradient = [g for row in e.source.gradient for g in row]
            lines.append("source-gradient = " + " ".join(map(_fmt, gradient)))

        lines += [
            "",
            "[network]",
            f"blocks = {self.arch.blocks}",
            f"width = {self.arch.width}",
            f"seed = {self.network_seed}",
        ]

        s = self.schedule
        batch_size = "auto" if s.batch_size is None else str(s.batch_size)
        lines += [
            "",
            "[schedule]",
            f"pretrain = {self.pretrain}",
            f"epochs-pre = {s.epochs_pre}",
            f"epochs = {s.epochs}",
            f"batch-size = {batch_size}",
            f"batch-density = {_fmt(s.batch_density)}",
            f"seed = {s.seed}",
            f"learning-rate = {_fmt(self.learning_rate)}",
            f"metrics-every = {s.metrics_every}",
            f"checkpoint-every = {s.checkpoint_every}",
            f"export-every = {s.export_every}",
            f"carry-moments = {str(s.carry_moments).lower()}",
            f"threads = {s.nthreads}",
            f"deterministic = {str(s.deterministic).lower()}",
        ]

        if self.g1 is not None:
            g = self.g1
            t = g.target
            lines += [
                "",
                "[g1]",
                f"target = {_fmt(t.a)} {_fmt(t.b)} {_fmt(t.c)}",
                f"steps = {g.steps}",
                f"samples = {g.samples}",
                f"seed = {g.seed}",
            ]
            if g.checkpoint is not None:
                lines.append(f"checkpoint = {g.checkpoint}")

        v = self.evaluation
        lines += ["", "[evaluation]"]
        if v.alpha is not None:
            lines.append(f"alpha = {_fmt(v.alpha)}")
        if v.reference_energy is not None:
            lines.append(f"reference-energy = {_fmt(v.reference_energy)}")
        lines += [
            f"density = {_fmt(v.density)}",
            f"seed = {v.seed}",
            f"e-l2-threshold = {_fmt(v.thresholds.e_l2)}",
            f"energy-threshold = {_fmt(v.thresholds.energy)}",
        ]

        n1, n2 = self.mesh_resolution
        lines += [
            "",
            "[run]",
            f"output = {self.output}",
            f"mesh-resolution = {n1} {n2}",
        ]
        return "\n".join(lines) + "\n"


def domain_from_config(config: ConfigParser) -> PlateDomain:
    """Construct the plate domain from config."""

    section = "domain"

    with config.anchor(section, "outer"):
        outer = Rectangle(*_numbers(config.getfloats(section, "outer"), 4, "outer"))

    hole = None
    if config.get(section, "hole", fallback="none") != "none":
        with config.anchor(section, "hole"):
            hole = Rectangle(*_numbers(config.getfloats(section, "hole"), 4, "hole"))

    clamp = []
    if config.get(section, "clamp", fallback="none") != "none":
        with config.anchor(section, "clamp"):
            for row in config.getlist(section, "clamp"):
                x1, y1, x2, y2 = _numbers(getfloats(row), 4, "clamp segment")
                clamp.append(Segment((x1, y1), (x2, y2)))

    with config.anchor(section):
        domain = PlateDomain(outer, hole, tuple(clamp))
        domain.validate()
    return domain


def energy_from_config(config: ConfigParser) -> EnergyConfig:
    """Construct the energy configuration from config."""

    section = "energy"

    with config.anchor(section, "z"):
        z11, z12, z21, z22 = _numbers(config.getfloats(section, "z"), 4, "Z")
    with config.anchor(section, "beta"):
        beta = config.getnumber(section, "beta")
    with config.anchor(section, "formulation"):
        formulation = config.getchoice(
            section,
            "formulation",
            {f: f for f in FORMULATIONS},
            fallback="I",
        )
    with config.anchor(section, "normalize-normal"):
        normalize = config.getboolean(section, "normalize-normal", fallback=False)

    source = None
    if config.has_option(section, "source"):
        with config.anchor(section, "source"):
            constant = _numbers(config.getfloats(section, "source"), 3, "source")
        with config.anchor(section, "source-gradient"):
            values = config.getfloats(section, "source-gradient", fallback=[0.0] * 6)
            g = _numbers(values, 6, "source gradient")
            source = AffineSource(tuple(constant), (g[0:2], g[2:4], g[4:6]))
    elif config.has_option(section, "source-gradient"):
        msg = "source gradient given without source"
        raise config.error(msg, section, "source-gradient")

    with config.anchor(section, "z"):
        return EnergyConfig(
            ((z11, z12), (z21, z22)),
            beta,
            source=source,
            formulation=formulation,
            normalize_normal=normalize,
        )


def schedule_from_config(config: ConfigParser) -> tuple[Schedule, int, float]:
    """
    Construct the training schedule, number of pre-training subdomains, and
    learning rate from config.
    """

    section = "schedule"
    options: dict[str, Any] = {}

    def getint(option: str, default: int) -> int:
        with config.anchor(section, option):
            return config.getint(section, option, fallback=default)

    def getbool(option: str, default: bool) -> bool:
        with config.anchor(section, option):
            return config.getboolean(section, option, fallback=default)

    pretrain = getint("pretrain", 0)
    if pretrain == 1 or pretrain < 0:
        msg = "pretrain must be 0 or at least 2 subdomains"
        raise config.error(msg, section, "pretrain")

    options["epochs_pre"] = getint("epochs-pre", 50_000)
    options["epochs"] = getint("epochs", 1_000_000)
    with config.anchor(section, "batch-size"):
        batch_size = config.get(section, "batch-size", fallback="auto")
        options["batch_size"] = None if batch_size == "auto" else int(batch_size)
    with config.anchor(section, "batch-density"):
        options["batch_density"] = config.getnumber(
            section, "batch-density", fallback=16.0
        )
    options["seed"] = getint("seed", 0)
    options["metrics_every"] = getint("metrics-every", 1000)
    options["checkpoint_every"] = getint("checkpoint-every", 10_000)
    options["export_every"] = getint("export-every", 10_000)
    options["carry_moments"] = getbool("carry-moments", True)
    options["nthreads"] = getint("threads", 1)
    options["deterministic"] = getbool("deterministic", True)

    with config.anchor(section, "learning-rate"):
        learning_rate = config.getnumber(section, "learning-rate", fallback=1e-3)
        if not learning_rate > 0:
            msg = "learning rate must be positive"
            raise ValueError(msg)

    with config.anchor(section):
        schedule = Schedule(**options)
    return schedule, pretrain, learning_rate


def g1_from_config(config: ConfigParser) -> G1Settings | None:
    """Construct the settings for trained g1 from config, if any."""

    section = "g1"
    if not config.has_section(section):
        return None
    with config.anchor(section, "target"):
        a, b, c = _numbers(config.getfloats(section, "target"), 3, "target")
    with config.anchor(section):
        steps = config.getint(section, "steps", fallback=50_000)
        samples = config.getint(section, "samples", fallback=256)
        seed = config.getint(section, "seed", fallback=0)
    checkpoint = None
    if config.has_option(section, "checkpoint"):
        checkpoint = config.getpath(section, "checkpoint")
    return G1Settings(AffineTarget(a, b, c), steps, samples, seed, checkpoint)


def evaluation_from_config(config: ConfigParser) -> EvaluationSettings:
    """Construct the evaluation settings from config."""

    section = "evaluation"
    if not config.has_section(section):
        return EvaluationSettings()

    def getnumber(option: str, default: float | None) -> float | None:
        with config.anchor(section, option):
            return config.getnumber(section, option, fallback=default)

    alpha = getnumber("alpha", None)
    if alpha is not None and not alpha > 0:
        msg = f"curvature must be positive, got {alpha}"
        raise config.error(msg, section, "alpha")
    reference_energy = getnumber("reference-energy", None)
    if reference_energy is not None and alpha is None:
        msg = "reference energy given without alpha"
        raise config.error(msg, section, "reference-energy")
    with config.anchor(section, "seed"):
        seed = config.getint(section, "seed", fallback=1)
    thresholds = ShapeThresholds(
        getnumber("e-l2-threshold", ShapeThresholds.e_l2),
        getnumber("energy-threshold", ShapeThresholds.energy),
    )
    return EvaluationSettings(
        alpha,
        reference_energy,
        getnumber("density", 1e4),  # type: ignore[arg-type]
        seed,
        thresholds,
    )


def experiment_from_config(config: ConfigParser) -> ExperimentConfig:
    """Construct an experiment from config."""

    from .boundary import edge_lift
    from .core import DecompositionError, UnsupportedLiftError
    from .geometry import decompose

    config.check_schema()

    domain = domain_from_config(config)
    energy = energy_from_config(config)

    with config.anchor("network"):
        arch = Architecture(
            config.getint("network", "blocks", fallback=5),
            config.getint("network", "width", fallback=10),
        )
        network_seed = config.getint("network", "seed", fallback=0)

    schedule, pretrain, learning_rate = schedule_from_config(config)
    if pretrain:
        try:
            decompose(domain, pretrain)
        except DecompositionError as exc:
            raise config.error(str(exc), "schedule", "pretrain") from None

    g1 = g1_from_config(config)
    if domain.free and g1 is not None:
        msg = "g1 given for a domain without clamped boundary"
        raise config.error(msg, "g1")
    if not domain.free and g1 is None:
        try:
            edge_lift(domain)
        except UnsupportedLiftError as exc:
            raise config.error(str(exc), "domain", "clamp") from None

    evaluation = evaluation_from_config(config)

    with config.anchor("run", "mesh-resolution"):
        resolution = config.getresolution("run", "mesh-resolution", fallback=(101, 41))
        if min(resolution) < 2:
            msg = "mesh resolution must be at least 2 per axis"
            raise ValueError(msg)
    output = config.get("run", "output", fallback="run")

    return ExperimentConfig(
        domain=domain,
        energy=energy,
        arch=arch,
        network_seed=network_seed,
        schedule=schedule,
        pretrain=pretrain,
        learning_rate=learning_rate,
        g1=g1,
        evaluation=evaluation,
        output=output,
        mesh_resolution=resolution,
    )


def load_experiment(name: str) -> ExperimentConfig:
    """
    Load an experiment from a config file or, if there is no such file,
    from the preset of that name.
    """
    from .presets import PRESETS

    if os.path.exists(name):
        with open(name) as fp:
            text = fp.read()
        source = name
    elif name in PRESETS:
        text = PRESETS[name]
        source = f"<preset {name}>"
    else:
        msg = f"no such config file or preset: {name!r}"
        raise ConfigError(msg)
    config = ConfigParser()
    config.read_experiment(text, source)
    return experiment_from_config(config)


def output_path(output: str) -> Path:
    """
    Resolve an output path, relative to the directory given by the
    environment variable ``BILAYER_OUTPUT`` if set.
    """
    path = Path(getpath(output))
    root = os.environ.get(OUTPUT_ENV)
    if root and not path.is_absolute():
        path = Path(getpath(root)) / path
    return path


def make_progress(enabled: bool, label: str) -> Progress:
    """Return a rich progress bar if enabled and available."""
    from .progress import NoProgress

    if enabled:
        try:
            from .rich import Progress
        except ModuleNotFoundError:
            pass
        else:
            return Progress(label)
    return NoProgress()


def boundary_from_experiment(
    exp: ExperimentConfig,
    path: Path,
    logger: logging.Logger,
    progress: Progress,
) -> BoundaryLift:
    """
    Return the boundary lift of an experiment, training and storing *g1*
    in *path* if needed.
    """
    from .boundary import FreeLift, edge_lift, train_g1
    from .io import G1_FILE, read_lift, write_checkpoint

    domain = exp.domain
    if domain.free:
        return FreeLift()
    if exp.g1 is None:
        return edge_lift(domain)

    stored = path / G1_FILE
    if exp.g1.checkpoint is not None:
        logger.info("reading g1 from %s", exp.g1.checkpoint)
        return read_lift(exp.g1.checkpoint)
    if stored.exists():
        logger.info("reading g1 from %s", stored)
        return read_lift(stored)

    bc = train_g1(
        domain,
        exp.g1.target,
        exp.g1.steps,
        np.random.default_rng(exp.g1.seed),
        arch=exp.arch,
        samples=exp.g1.samples,
        seed=exp.g1.seed,
        learning_rate=exp.learning_rate,
        progress=progress,
    )
    write_checkpoint(stored, bc.params, role="g1")
    logger.info("wrote g1 to %s", stored)
    return bc


def run(
    config: str,
    *,
    resume: str | None = None,
    logger: logging.Logger,
    progress: bool,
) -> int:
    """train the deformation of an experiment

    Train the deformation of the experiment given by a config file or the
    name of a preset, then evaluate it on fresh samples.  Metrics,
    checkpoints, and mesh snapshots are written to the output directory of
    the experiment.  With --resume, training continues from a checkpoint
    of an earlier run.

    """

    from .evaluation import test_metrics
    from .io import (
        RunDirectory,
        checkpoint_step,
        optimizer_path,
        read_checkpoint,
        read_optimizer_state,
    )
    from .network import init_params
    from .trainer import MetricsRow, OptimizerState, run_schedule

    exp = load_experiment(config)
    schedule = exp.training_schedule()
    domain = exp.domain

    path = output_path(exp.output)
    path.mkdir(parents=True, exist_ok=True)
    logger.info("writing output to %s", path)
    with open(path / "config.ini", "w") as fp:
        fp.write(exp.to_config())

    if resume is not None:
        logger.info("resuming from %s", resume)
        params, _ = read_checkpoint(resume)
        if params.arch != exp.arch:
            msg = f"checkpoint {resume} does not match the network of the experiment"
            raise ConfigError(msg)
        state, step = read_optimizer_state(optimizer_path(resume))
        if step != checkpoint_step(resume):
            msg = f"optimizer state of {resume} is for step {step}"
            raise ConfigError(msg)
    else:
        params = init_params(exp.arch, exp.network_seed)
        state = OptimizerState.zeros(params.size, lr=exp.learning_rate)
        step = 0

    start = time.perf_counter()

    with make_progress(progress, "bilayer") as prog:
        bc = boundary_from_experiment(exp, path, logger, prog)
        out = RunDirectory(
            path,
            domain,
            bc,
            resolution=exp.mesh_resolution,
            resume_step=step if resume is not None else None,
        )
        params, _ = run_schedule(
            params,
            domain,
            bc,
            exp.energy,
            schedule,
            state=state,
            start_step=step,
            out=out,
            progress=prog,
        )

    total = schedule.total_steps
    if total > step and total % schedule.checkpoint_every != 0:
        out.checkpoint(total, params, state)

    settings = exp.evaluation
    result = test_metrics(
        params,
        bc,
        domain,
        exp.energy,
        settings.reference(domain),
        np.random.default_rng(settings.seed),
        n=settings.samples(domain),
        thresholds=settings.thresholds,
    )
    out.write_metrics(
        MetricsRow(
            step=total,
            E=result.E,
            C=result.C,
            Istar=result.Istar,
            elapsed=None if schedule.deterministic else time.perf_counter() - start,
            phase="test",
            e_l2=result.e_l2,
            shape=result.shape,
        ),
    )
    logger.info("finished, metrics in %s", out.metrics_path)
    return 0


def oracle(
    *,
    resolution: tuple[int, int],
    tolerance: float,
    logger: logging.Logger,
    progress: bool,
) -> int:
    """check the analytic oracles

    Feed the closed-form witness deformations and the exact cylinder
    through the energy pipeline with grid quadrature, and compare the
    results with their closed forms.  Exits with status 3 if any check
    fails.

    """

    from .oracles import oracle_suite

    with make_progress(progress, "oracles") as prog:
        report = oracle_suite(tuple(resolution), tolerance, progress=prog)

    for check in report:
        logger.info("%s", check)
    logger.info("maximum relative deviation: %.3e", report.max_deviation)

    if not report.passed:
        logger.error("%d of %d oracle checks failed", len(report.failures), len(report))
        return EXIT_ORACLE_FAILURE
    return 0


def export(
    checkpoint: str,
    config: str,
    path: str,
    *,
    resolution: tuple[int, int] | None,
    logger: logging.Logger,
    progress: bool,
) -> int:
    """export the deformation of a checkpoint as a mesh

    Evaluate the deformation of a checkpoint on a structured grid of the
    plate of the experiment, and write the surface in Wavefront format.
    Cells in the hole of O-shaped plates are omitted.

    """

    from .io import export_mesh, read_checkpoint

    exp = load_experiment(config)
    params, _ = read_checkpoint(checkpoint)
    run_path = output_path(exp.output)
    bc = boundary_from_experiment(exp, run_path, logger, make_progress(False, ""))
    if resolution is None:
        resolution = exp.mesh_resolution
    vertices, faces = export_mesh(params, bc, exp.domain, tuple(resolution), path)
    logger.info("wrote %d vertices and %d faces to %s", len(vertices), len(faces), path)
    return 0


def metrics(
    path: str,
    *,
    logger: logging.Logger,
    progress: bool,
) -> int:
    """show the metrics of a run

    Print the metrics file of a run directory as a table.

    """

    from .io import METRICS_FILE, read_metrics

    file = Path(path)
    if file.is_dir():
        file = file / METRICS_FILE
    rows = read_metrics(file)

    def opt(x: Any, fmt: str) -> str:
        return "-" if x is None else format(x, fmt)

    print(
        f"{'step':>10}  {'phase':<7}  {'E':>12}  {'C':>10}  {'Istar':>12}"
        f"  {'eL2':>10}  shape",
    )
    for row in rows:
        print(
            f"{row.step:>10}  {row.phase:<7}  {row.E:>12.6g}  {row.C:>10.4e}"
            f"  {row.Istar:>12.6g}  {opt(row.e_l2, '>10.4e'):>10}  {row.shape or '-'}",
        )
    logger.debug("read %d rows from %s", len(rows), file)
    return 0


def preset(
    name: str,
    *,
    logger: logging.Logger,
    progress: bool,
) -> int:
    """print the configuration of a preset

    Print the configuration file of a preset experiment, which can be
    edited and given to the run command.

    """

    from .presets import PRESETS

    if name not in PRESETS:
        expected = ", ".join(PRESETS)
        msg = f"unknown preset {name!r} (expected one of {expected})"
        raise ConfigError(msg)
    sys.stdout.write(PRESETS[name])
    return 0


class MainFormatter(argparse.RawDescriptionHelpFormatter):
    """Formatter that keeps order of arguments for usage."""

    def add_usage(self, usage, actions, groups, prefix=None):
        self.actions = actions
        super().add_usage(usage, actions, groups, prefix)

    def _format_actions_usage(self, actions, groups):
        return super()._format_actions_usage(self.actions, groups)


def main(argv: list[str] | None = None) -> int:
    """Main method of the `bilayer` command.

    Parses arguments and calls the appropriate subcommand.

    """

    def add_command(func):
        """Create a subparser for a command given by a function."""

        name = func.__name__
        doc = func.__doc__.strip()
        help_, _, description = doc.partition("\n")

        parser = commands.add_parser(
            name,
            help=help_,
            description=description,
            parents=[cmd_parser],
            formatter_class=MainFormatter,
        )
        parser.set_defaults(cmd=func)
        return parser

    # common parser for all subcommands
    cmd_parser = argparse.ArgumentParser(
        add_help=False,
    )
    cmd_parser.add_argument(
        "--no-progress",
        help="do not show progress bars",
        action="store_false",
        dest="progress",
    )

    # main parser for CLI invokation
    main_parser = argparse.ArgumentParser(
        prog="bilayer",
        epilog=f"Relative output paths are resolved against ${OUTPUT_ENV}.",
        formatter_class=MainFormatter,
    )
    main_parser.set_defaults(cmd=None)

    commands = main_parser.add_subparsers(
        title="commands",
        metavar="<command>",
        help="the task to carry out",
    )

    #######
    # run #
    #######

    parser = add_command(run)
    parser.add_argument(
        "--resume",
        help="checkpoint of an earlier run to resume from",
        metavar="<ckpt>",
    )
    parser.add_argument(
        "config",
        help="config file or preset name",
        metavar="<config>",
    )

    ##########
    # oracle #
    ##########

    parser = add_command(oracle)
    parser.add_argument(
        "--resolution",
        nargs=2,
        type=int,
        default=(1000, 400),
        help="quadrature grid size",
        metavar=("<n1>", "<n2>"),
    )
    parser.add_argument(
        "--tolerance",
        type=float,
        default=1e-3,
        help="relative tolerance of the witness checks",
        metavar="<tol>",
    )

    ##########
    # export #
    ##########

    parser = add_command(export)
    parser.add_argument(
        "--resolution",
        nargs=2,
        type=int,
        default=None,
        help="number of mesh vertices per axis",
        metavar=("<n1>", "<n2>"),
    )
    group = parser.add_argument_group("inputs")
    group.add_argument(
        "checkpoint",
        help="checkpoint file",
        metavar="<ckpt>",
    )
    group.add_argument(
        "config",
        help="config file or preset name",
        metavar="<config>",
    )
    group = parser.add_argument_group("output")
    group.add_argument(
        "path",
        help="output mesh file",
        metavar="<out>",
    )

    ###########
    # metrics #
    ###########

    parser = add_command(metrics)
    parser.add_argument(
        "path",
        help="run directory or metrics file",
        metavar="<dir>",
    )

    ##########
    # preset #
    ##########

    parser = add_command(preset)
    parser.add_argument(
        "name",
        help="name of the preset",
        metavar="<name>",
    )

    #######
    # run #
    #######

    args = main_parser.parse_args(argv)

    # show full help if no command is given
    if args.cmd is None:
        main_parser.print_help()
        return 1

    # get keyword args
    kwargs = vars(args)
    cmd = kwargs.pop("cmd")

    # set up logger for CLI output
    logger = logging.getLogger(__package__)
    if not logger.handlers:
        logger.addHandler(logging.StreamHandler())
    logger.setLevel(logging.DEBUG)

    try:
        status = cmd(**kwargs, logger=logger)
    except ConfigError as exc:
        logger.debug("Exception", exc_info=exc)
        logger.error(f"ERROR: {exc!s}")
        return EXIT_CONFIG_ERROR
    except NumericalError as exc:
        logger.debug("Exception", exc_info=exc)
        logger.error(f"ERROR: {exc!s}")
        return EXIT_NUMERICAL_ERROR
    except Exception as exc:  # noqa: BLE001
        logger.debug("Exception", exc_info=exc)
        logger.error(f"ERROR: {exc!s}")
        return EXIT_FAILURE
    else:
        return status or 0

