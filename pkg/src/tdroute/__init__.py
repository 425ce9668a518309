"""Time-dependent routing: path ranking invariance, LP-based bounds and an exact TDTSP solver."""
from .assignment import solve_assignment, solve_atsp
from .bnb import SolveReport, solve_tdtsp
from .bounds import BoundPair, LowerApproxGraph, bound_pair, generate_invariant, igp_travel_time, lower_graph
from .ctcp import CtcpResult, GridPolicy, check
from .instgen import GenSpec, generate, read_instance, write_instance
from .pwl import PwlFunction, StepFunction, cost_function, travel_cost
from .tdgraph import TdGraph, path_duration, tour_duration

__version__ = "0.1.0"

__all__ = [
    "BoundPair",
    "CtcpResult",
    "GenSpec",
    "GridPolicy",
    "LowerApproxGraph",
    "PwlFunction",
    "SolveReport",
    "StepFunction",
    "TdGraph",
    "bound_pair",
    "check",
    "cost_function",
    "generate",
    "generate_invariant",
    "igp_travel_time",
    "lower_graph",
    "path_duration",
    "read_instance",
    "solve_assignment",
    "solve_atsp",
    "solve_tdtsp",
    "tour_duration",
    "travel_cost",
    "write_instance",
]
