"""Numerical experiments on higher divergence of products of model spaces."""

from .geometry import GeometryError, ModelSpace, StructureError
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "GeometryError", "ModelSpace", "StructureError", "__version__"]
