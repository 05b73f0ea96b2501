"""Numerical engines: grids, Bellman solvers, 1D junction and 2D semi-Lagrangian schemes."""

from .ergodic import DEFAULT_SCHEDULE, ErgodicResult, neville_at_zero
from .grid import Grid, ValueField
from .junction1d import Junction, Piece, build_junction_model, ergodic_constant_1d, junction_solve_1d
from .mdp import DecisionModel, solve_howard, solve_jacobi
from .semilagrangian import DPProblem, build_sl_model, ergodic_constant, value_iteration
