"""Ball embeddings that learn Euler diagrams from tables of topological relations."""

from eulerball.geometry import Ball, Rel, center_distance, classify, holds
from eulerball.optimizer import RelationTable, SolveReport, SolverConfig, solve

__all__ = [
    "Ball",
    "Rel",
    "RelationTable",
    "SolveReport",
    "SolverConfig",
    "center_distance",
    "classify",
    "holds",
    "solve",
]

__version__ = "0.1.0"
