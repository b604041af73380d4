"""Discrete theta-conformal structure on immersed planar triangulations.

Submodules
----------
geom        meshes, vertex stars, immersion checks, Moebius maps
crossratio  edge cross ratios, logs, closing and deformation checks
confsym     lattice and spiral generators, conformally symmetric fields
trisolve    single-triangle deformation solves
varprin     variational principles: gradients, Hessians, Newton maximizer
layout      global layout of deformed meshes
cli         command line entry points
"""

__version__ = "0.1.0"

from .errors import ThetaconfError  # noqa: F401
from .geom import TriMesh, build_mesh  # noqa: F401
from .crossratio import CrossRatioField  # noqa: F401
