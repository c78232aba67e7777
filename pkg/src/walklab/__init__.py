"""walklab: random walks, isoperimetry, and spectral profiles on groups."""

from .groups import (
    CayleyBall,
    GroupSpec,
    canonical_key,
    enumerate_ball,
    free_group,
    grigorchuk,
    growth_table,
    heisenberg,
    lamplighter,
    parse_group,
    z_lattice,
)
from .kernels import Kernel

__version__ = "0.1.0"

__all__ = [
    "CayleyBall",
    "GroupSpec",
    "Kernel",
    "canonical_key",
    "enumerate_ball",
    "free_group",
    "grigorchuk",
    "growth_table",
    "heisenberg",
    "lamplighter",
    "parse_group",
    "z_lattice",
    "__version__",
]
