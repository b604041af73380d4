"""Exception hierarchy for thetaconf.

Everything raised on purpose by this package derives from ThetaconfError,
so callers can catch one base class. Subclasses split along the lines the
command line tool needs for exit codes: input validation, geometric
degeneracy, infeasible problem data, and solver non-convergence.
"""

from __future__ import annotations


class ThetaconfError(Exception):
    """Base class for all errors raised by thetaconf."""


class ValidationError(ThetaconfError):
    """Malformed input data (bad indices, schemas, shapes, parameters)."""


class NonManifoldEdge(ValidationError):
    """An undirected edge is shared by more than two triangles."""


class OrientationMismatch(ValidationError):
    """Two triangles traverse a shared edge in the same direction."""


class DegenerateTriangle(ValidationError):
    """A triangle has (numerically) collinear or coincident corners."""


class BoundaryVertex(ThetaconfError):
    """A closed fan was requested at a vertex whose star is open."""


class BrokenFan(ThetaconfError):
    """The triangles around a vertex do not form a single fan."""


class BoundaryEdge(ThetaconfError):
    """An interior-edge quantity was requested on a boundary edge."""


class CoincidentPoints(ThetaconfError):
    """A cross ratio of four points with a repeated point."""


class PointAtInfinity(ThetaconfError):
    """A Moebius image that is not representable as a finite complex number."""


class Infeasible(ThetaconfError):
    """Problem data admits no solution of the requested kind."""


class SumConstraintViolated(Infeasible):
    """Prescribed data fails a necessary linear sum constraint."""


class DegenerateImage(ThetaconfError):
    """A deformed triangle shape left the space of positive triangles."""


class NearDegenerate(ThetaconfError):
    """An image angle is too close to 0 or pi for a stable second derivative."""


class OutsideDomain(ThetaconfError):
    """Arguments left the domain on which a closed-form functional is defined."""


class InfeasibleStep(ThetaconfError):
    """Line search exhausted: every step hit the boundary of the feasible set."""


class InfeasibleTriangle(Infeasible):
    """A triangle's closing problem has no solution for the given edge data."""


class AnchorDegenerate(ThetaconfError):
    """The anchor prescription cannot pin down a similarity."""


class CombinatoricsMismatch(ValidationError):
    """Two meshes that should share combinatorics do not."""


class NotConverged(ThetaconfError):
    """An iterative solver exhausted its budget before reaching tolerance.

    A partial SolveReport, when one exists, is attached as ``report``.
    """

    def __init__(self, message: str, iterations: int = -1, residual: float = float("nan")):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual
        self.report = None
