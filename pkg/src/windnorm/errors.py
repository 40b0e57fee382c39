"""Exception types raised by the orientation pipeline."""


class WindnormError(Exception):
    """Base class for all library errors."""


class DegenerateCloud(WindnormError):
    """All points coincide, or the bounding box has no extent."""


class DuplicatePoints(WindnormError):
    """Merging coincident points left too few seeds for a 3D diagram."""


class NumericalFailure(WindnormError):
    """A geometric construction failed its correctness audit."""


class SingularPair(WindnormError):
    """Query and source point are closer than the singularity guard."""


class EmptyCell(WindnormError):
    """A Voronoi cell has no usable candidate vertices."""


class DegenerateNeighborhood(WindnormError):
    """k-nearest neighbors are collinear; no tangent plane exists."""


class StaleCache(WindnormError):
    """Energy caches do not match the current normal field."""


class LengthMismatch(WindnormError):
    """Two per-point sequences have different lengths."""


class BadSpec(WindnormError):
    """Invalid analytic shape specification."""


class NonFiniteEnergy(WindnormError):
    """The objective or its gradient became NaN/Inf."""


class ParseError(WindnormError):
    """A point-cloud file could not be parsed."""

    def __init__(self, path, line, message):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")
