"""Boundary integral solver for flexural wave scattering in thin plates."""

from .geometry import build_panelization, curve_circle, curve_droplet, curve_starfish
from .kernels import BCKind, MaterialParams, Side
from .potential import eval_field, far_field, plane_wave_data, point_source_data
from .system import BVProblem, SolverFailure, solve

__all__ = [
    "BCKind",
    "BVProblem",
    "MaterialParams",
    "Side",
    "SolverFailure",
    "build_panelization",
    "curve_circle",
    "curve_droplet",
    "curve_starfish",
    "eval_field",
    "far_field",
    "plane_wave_data",
    "point_source_data",
    "solve",
]
