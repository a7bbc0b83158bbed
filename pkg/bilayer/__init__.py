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
Main module of the *Bilayer* package.
"""

__all__ = [
    # _version
    "__version__",
    "__version_tuple__",
    # autodiff
    "Jet2",
    "Tape",
    "Var",
    "loss_gradient",
    "seed_input",
    # boundary
    "AffineTarget",
    "BoundaryLift",
    "EdgeLift",
    "FreeLift",
    "NetworkLift",
    "deformation",
    "edge_lift",
    "lift",
    "train_g1",
    # core
    "ConfigError",
    "DecompositionError",
    "NumericalError",
    "UnsupportedLiftError",
    # energy
    "AffineSource",
    "EnergyConfig",
    "density",
    "estimate",
    "grid_quadrature",
    "isometry_defect",
    "mc_loss",
    "prop1_witness",
    "prop2_witness",
    "second_fundamental_form",
    # evaluation
    "ReferenceSolution",
    "ShapeThresholds",
    "classify_shape",
    "cylinder_reference",
    "exact_cylinder",
    "test_metrics",
    # geometry
    "ClampSegment",
    "PlateDomain",
    "Rectangle",
    "Segment",
    "SubdomainChain",
    "decompose",
    "sample_boundary",
    "sample_interior",
    # io
    "RunDirectory",
    "export_mesh",
    "read_checkpoint",
    "read_lift",
    "read_metrics",
    "write_checkpoint",
    # network
    "Architecture",
    "NetworkParameters",
    "forward",
    "init_params",
    # oracles
    "oracle_suite",
    # progress
    "NoProgress",
    "Progress",
    # trainer
    "OptimizerState",
    "Schedule",
    "adam_step",
    "run_schedule",
    "train_on_domain",
]

try:
    from ._version import __version__, __version_tuple__
except ModuleNotFoundError:
    __version__ = None
    __version_tuple__ = None

from .autodiff import (
    Jet2,
    Tape,
    Var,
    loss_gradient,
    seed_input,
)

from .boundary import (
    AffineTarget,
    BoundaryLift,
    EdgeLift,
    FreeLift,
    NetworkLift,
    deformation,
    edge_lift,
    lift,
    train_g1,
)

from .core import (
    ConfigError,
    DecompositionError,
    NumericalError,
    UnsupportedLiftError,
)

from .energy import (
    AffineSource,
    EnergyConfig,
    density,
    estimate,
    grid_quadrature,
    isometry_defect,
    mc_loss,
    prop1_witness,
    prop2_witness,
    second_fundamental_form,
)

from .evaluation import (
    ReferenceSolution,
    ShapeThresholds,
    classify_shape,
    cylinder_reference,
    exact_cylinder,
    test_metrics,
)

from .geometry import (
    ClampSegment,
    PlateDomain,
    Rectangle,
    Segment,
    SubdomainChain,
    decompose,
    sample_boundary,
    sample_interior,
)

from .io import (
    RunDirectory,
    export_mesh,
    read_checkpoint,
    read_lift,
    read_metrics,
    write_checkpoint,
)

from .network import (
    Architecture,
    NetworkParameters,
    forward,
    init_params,
)

from .oracles import (
    oracle_suite,
)

from .progress import (
    NoProgress,
    Progress,
)

from .trainer import (
    OptimizerState,
    Schedule,
    adam_step,
    run_schedule,
    train_on_domain,
)
