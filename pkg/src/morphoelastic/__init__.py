"""Time-discrete morphoelastic growth: polyconvex equilibrium plus exponential growth updates."""

from .control import ControlFamily, ObjectiveJ, evaluate_J, optimize_control, solve_given_control
from .fem import Load, MinimizeOptions, minimize_energy, total_energy, energy_gradient
from .growth import (ConvolutionKernel, GrowthRate, InvariantViolation, MorphoProblem, StepFailure,
                     TimeGrid, Trajectory, run_morpho)
from .hyperelastic import DegenerateStrainError, EnergyDensity, GrowthField
from .mesh import Mesh, single_tet, unit_cube
from .nutrient import CoupledProblem, NutrientProblem, run_coupled

__version__ = "0.1.0"
