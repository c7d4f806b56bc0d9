"""Exception hierarchy shared across the package."""


class GraspViewError(Exception):
    pass


class FrameMismatch(GraspViewError):
    """Transforms or clouds were combined across incompatible frames."""


class InvalidRotation(GraspViewError):
    pass


class DegenerateGeometry(GraspViewError):
    pass


class DimensionMismatch(GraspViewError):
    pass


class RangeError(GraspViewError, ValueError):
    pass


class NoFeasibleCandidate(GraspViewError):
    pass


class InsufficientViews(GraspViewError):
    pass


class DegenerateScale(GraspViewError):
    pass


class AllNoise(GraspViewError):
    """Density clustering labelled every point as noise."""


class PlacementFailure(GraspViewError):
    pass


class ScorerUnavailable(GraspViewError):
    """Remote scorer failed and falling back to the heuristic is disabled."""


class NeedsReperception(GraspViewError):
    """Every ranked grasp was infeasible; the caller should re-enter NBV."""

    def __init__(self, reasons=None):
        self.reasons = list(reasons or [])
        super().__init__(f"no feasible grasp ({len(self.reasons)} tried)")
