"""Rigid body with circulation moving in a bounded planar ideal fluid.

Boundary-integral solvers for the fluid problems, the body ODE and its
shrinking-body limits.
"""

from .asymptotics import (
    SweepResult,
    added_mass_sweep,
    capacity_sweep,
    convergence_case_i,
    convergence_case_ii,
    expansion_reference,
    force_sweep,
)
from .dynamics import BodyState, MassRegime, SimParams, Trajectory, integrate
from .errors import (
    GeometryError,
    InputError,
    InvalidShapeError,
    ShrinkflowError,
    SolverError,
    VerificationError,
)
from .fluid_quantities import DiskRouth, evaluate, exterior_constants
from .geometry import Placement, Shape, circle, ellipse, parse_shape, star
from .layer_potential import BoundaryModel

__version__ = "0.1.0"

__all__ = [
    "BodyState",
    "BoundaryModel",
    "DiskRouth",
    "GeometryError",
    "InputError",
    "InvalidShapeError",
    "MassRegime",
    "Placement",
    "Shape",
    "ShrinkflowError",
    "SimParams",
    "SolverError",
    "SweepResult",
    "Trajectory",
    "VerificationError",
    "added_mass_sweep",
    "capacity_sweep",
    "circle",
    "convergence_case_i",
    "convergence_case_ii",
    "ellipse",
    "evaluate",
    "expansion_reference",
    "exterior_constants",
    "force_sweep",
    "integrate",
    "parse_shape",
    "star",
]
