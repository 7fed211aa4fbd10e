"""Shallow-water finite-volume solver with an embedded permeable barrier.

A zero-width barrier of crest height beta crosses a uniform Cartesian grid
on the unit square.  Cells the barrier cuts carry one state per side; flow
over the crest is handled by wave redistribution, and small sub-cells are
merged with a neighbor so the time step never collapses.  A barrier-fitted
mapped-grid solver provides an independent reference for convergence
studies.
"""

from .core import CellField, SolverParams
from .driver import CartesianSolver, RunResult, ScenarioConfig, run
from .geometry import BarrierGeometry, CutCellTable, intersect_barrier
from .mapped import MappedGrid, MappedSolver, build_mapped_grid, run_mapped

__all__ = [
    "BarrierGeometry",
    "CartesianSolver",
    "CellField",
    "CutCellTable",
    "MappedGrid",
    "MappedSolver",
    "RunResult",
    "ScenarioConfig",
    "SolverParams",
    "build_mapped_grid",
    "intersect_barrier",
    "run",
    "run_mapped",
]

__version__ = "0.1.0"
