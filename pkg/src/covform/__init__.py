"""covform: observability-aware multi-robot formation design and evaluation.

Finds formations over SE(2)^{N-1} that trade off range-based relative
localization accuracy against user-specified shapes (straight lines, V
shapes, camera overlap), then validates them in a coverage path planning
simulation with an EKF-SLAM estimator.
"""

from covform.se2 import FormationState, Pose2, compose, exp, inverse, log, oplus, relative_position
from covform.team import FormationSpec, RangeGraph, RobotSpec, SortedIds, TeamConfig, default_full_graph, mask_edges

__version__ = "0.1.0"

__all__ = [
    "FormationState",
    "Pose2",
    "compose",
    "exp",
    "inverse",
    "log",
    "oplus",
    "relative_position",
    "RobotSpec",
    "TeamConfig",
    "RangeGraph",
    "FormationSpec",
    "SortedIds",
    "default_full_graph",
    "mask_edges",
]
