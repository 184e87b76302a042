"""Exception hierarchy.

Each class carries the CLI exit code it maps to, so the command layer
never needs a lookup table.
"""


class CTHRVError(Exception):
    exit_code = 1


class ValidationError(CTHRVError, ValueError):
    """Bad argument or configuration value."""

    exit_code = 2


class DataError(CTHRVError, ValueError):
    """Malformed or inconsistent input data."""

    exit_code = 3


class TooFewSamplesError(DataError):
    pass


class EstimationError(CTHRVError):
    exit_code = 4


class DegenerateDynamicsError(EstimationError):
    """The identified a[1,2] entry is (numerically) zero, so tau is undefined."""


class RankDeficiencyError(EstimationError):
    def __init__(self, msg, singular_values=None):
        super().__init__(msg)
        self.singular_values = singular_values


class WeightCollapseError(EstimationError):
    def __init__(self, step):
        super().__init__(f"all particle likelihoods underflowed to zero at step {step}")
        self.step = step


class TrajectoryCollapseError(CTHRVError):
    """Space gap reached zero or below during simulation.

    ``step`` is the index of the first non-positive gap sample; ``vehicle``
    is set by platoon simulation to the offending follower index.
    """

    exit_code = 3

    def __init__(self, step, vehicle=None):
        where = f" (follower {vehicle})" if vehicle is not None else ""
        super().__init__(f"space gap became non-positive at step {step}{where}")
        self.step = step
        self.vehicle = vehicle
