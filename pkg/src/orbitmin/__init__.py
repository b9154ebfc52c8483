"""Action minimizers for the planar three-body problem with masses [1, m, m].

Submodules: :mod:`~orbitmin.geometry` (configurations, Jacobi vectors,
boundary families, quadrant tests), :mod:`~orbitmin.action` (kinetic and
potential energies, discrete actions), :mod:`~orbitmin.minimize` (the
free-boundary minimization problems), :mod:`~orbitmin.levels` (action
levels and test paths), :mod:`~orbitmin.dynamics` (Newtonian integration,
residuals, symmetric extension) and :mod:`~orbitmin.cli`.
"""
from .errors import (
    CollisionApproach,
    CollisionEncountered,
    CollisionSingularity,
    DomainError,
    NonConvergence,
    NotAdjacent,
    NotVerified,
    OrbitError,
)
from .geometry import MassSet, from_jacobi, to_jacobi
from .minimize import ProblemSpec, minimize, verify_minimizer

__version__ = "0.1.0"

__all__ = [
    "CollisionApproach", "CollisionEncountered", "CollisionSingularity", "DomainError",
    "MassSet", "NonConvergence", "NotAdjacent", "NotVerified", "OrbitError", "ProblemSpec",
    "from_jacobi", "minimize", "to_jacobi", "verify_minimizer",
]
