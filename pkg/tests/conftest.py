import numpy as np
import pytest
from numba import config

config.DISABLE_JIT = True


@pytest.fixture(scope="session")
def rng(seed: int = 50) -> np.random.Generator:
    return np.random.default_rng(seed)


@pytest.fixture(scope="session")
def plate():
    """The standard plate clamped along its left edge."""
    from bilayer.geometry import PlateDomain, Rectangle, Segment

    return PlateDomain(
        Rectangle(-5.0, 5.0, -2.0, 2.0),
        clamp=(Segment((-5.0, -2.0), (-5.0, 2.0)),),
    )


@pytest.fixture(scope="session")
def oshape():
    """The O-shaped plate clamped along its left edge."""
    from bilayer.geometry import PlateDomain, Rectangle, Segment

    return PlateDomain(
        Rectangle(-5.0, 5.0, -2.0, 2.0),
        Rectangle(-10 / 3, 10 / 3, -4 / 3, 4 / 3),
        clamp=(Segment((-5.0, -2.0), (-5.0, 2.0)),),
    )


@pytest.fixture(scope="session")
def corner():
    """The O-shaped plate clamped at its lower left corner."""
    from bilayer.geometry import PlateDomain, Rectangle, Segment

    return PlateDomain(
        Rectangle(-5.0, 5.0, -2.0, 2.0),
        Rectangle(-13 / 3, 13 / 3, -4 / 3, 4 / 3),
        clamp=(
            Segment((-5.0, -2.0), (-5.0, -4 / 3)),
            Segment((-5.0, -2.0), (-13 / 3, -2.0)),
        ),
    )
