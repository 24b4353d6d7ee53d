"""Periodic homogenization of bulk-surface reaction-diffusion systems with Wentzell interface conditions."""

from .errors import *  # noqa: F401,F403
from .geometry import UnitCellGeometry, build_cell_mesh, build_epsilon_tiling, unit_square_mesh
from .cell import effective_tensor

__version__ = "0.1.0"
