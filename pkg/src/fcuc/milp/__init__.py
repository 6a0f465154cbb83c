from .lpformat import to_lp_string, write_lp
from .model import MilpModel, ModelError, Sense, add_constraint, add_variable
from .solver import MilpSolution, SolverOptions, Status, solve_lp, solve_milp

__all__ = [
    "MilpModel", "ModelError", "Sense", "add_constraint", "add_variable",
    "MilpSolution", "SolverOptions", "Status", "solve_lp", "solve_milp",
    "to_lp_string", "write_lp",
]
