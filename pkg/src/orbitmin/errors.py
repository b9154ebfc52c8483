"""Exception hierarchy shared by all modules."""


class OrbitError(Exception):
    """Base class for every error raised by :mod:`orbitmin`."""


class DomainError(OrbitError, ValueError):
    """An argument is outside the domain where the quantity is defined."""


class NegativeParameter(DomainError):
    pass


class ZeroVector(DomainError):
    pass


class NotAdjacent(DomainError):
    pass


class CollisionSingularity(OrbitError, ArithmeticError):
    """A pairwise distance is (numerically) zero where a finite value is needed."""

    def __init__(self, message, pair=None, index=None):
        super().__init__(message)
        self.pair = pair
        self.index = index


class SegmentSingularity(CollisionSingularity):
    pass


class CollisionEncountered(OrbitError, RuntimeError):
    """The optimizer could not find a step that keeps every segment clear of collisions."""

    def __init__(self, message, pair=None, time=None, report=None):
        super().__init__(message)
        self.pair = pair
        self.time = time
        self.report = report


class NonConvergence(OrbitError, RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class CollisionApproach(OrbitError, RuntimeError):
    """Integration stopped because two bodies came closer than the collision floor."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class NotVerified(OrbitError):
    pass
