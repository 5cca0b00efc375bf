"""Exception hierarchy shared by every module.

Each class carries a stable CLI exit code so the command-line front end can
map library failures to process status without string matching.
"""


class SpectralError(Exception):
    exit_code = 3


class InvalidInputError(SpectralError, ValueError):
    """Non-finite entries, wrong shapes, non-Hermitian input, bad parameters."""
    exit_code = 2


class ShapeMismatchError(InvalidInputError):
    pass


class PrecisionFloorError(SpectralError):
    """Requested accuracy is finer than 64-bit arithmetic can certify."""
    exit_code = 4


class SeparationError(SpectralError):
    """A kernel target coincides with a source closer than the allowed separation."""


class DesiderataError(SpectralError):
    """Arrowhead core does not meet the gap / shaft-size lower bounds."""


class ReconstructionError(SpectralError):
    """Interlacing fails, so no arrowhead with the given spectrum exists."""


class IterationCapError(SpectralError):
    """A squaring or sweep loop hit its iteration cap."""


class RankDeficiencyError(SpectralError):
    """The smallest singular value cannot be separated from zero."""


class ConvergenceError(SpectralError):
    pass


class StructureError(SpectralError):
    """Band-reduction state does not have the required zero pattern."""
