"""Two-dimensional eddy-current analysis of helically twisted power cables."""
from .geometry import MU0, RHO_COPPER, HelixParams, MaterialSpec
from .pipeline import PipelineError, reference_currents, reference_plan, prepare, solve_frequency, solve_problem
from .post import SolveResult
from .section import CablePlan, LayerSpec

__version__ = "0.1.0"

__all__ = [
    "MU0", "RHO_COPPER", "HelixParams", "MaterialSpec", "CablePlan", "LayerSpec",
    "SolveResult", "PipelineError", "reference_plan", "reference_currents", "prepare",
    "solve_frequency", "solve_problem",
]
