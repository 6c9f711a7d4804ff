"""Planar cable-driven parallel robot toolkit.

Kinematics, statics and workspace analysis, trajectory planning, a fixed-step
plant simulator, a networked control loop with delay injection, and post-run
delay/error analysis.
"""
from .errors import (CDPRError, DegenerateGeometry, NoConvergence, NoSolution,
                     NumericalBlowup, Unsupported, ValidationError)
from .kinematics import (forward_kinematics_closed, forward_kinematics_numeric,
                         inverse_kinematics, structure_matrix)
from .model import Pose, RobotDescription, Vec2, load_robot, reference_robot, validate
from .statics import is_feasible, solve_tensions, workspace_scan

__version__ = "0.1.0"

__all__ = [
    "CDPRError", "DegenerateGeometry", "NoConvergence", "NoSolution", "NumericalBlowup",
    "Unsupported", "ValidationError", "Pose", "RobotDescription", "Vec2", "load_robot",
    "reference_robot", "validate", "inverse_kinematics", "forward_kinematics_closed",
    "forward_kinematics_numeric", "structure_matrix", "solve_tensions", "is_feasible",
    "workspace_scan",
]
