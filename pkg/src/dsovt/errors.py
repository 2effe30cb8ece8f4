"""Exception hierarchy.

Every error carries a short machine-readable ``code``; the CLI maps the two
families below onto exit codes (validation -> 3, runtime -> 1).
"""


class DsovtError(Exception):
    code = "error"


class ValidationError(DsovtError, ValueError):
    """Bad input: shapes, ranges, file formats, contracts."""

    code = "validation"


class ShapeError(ValidationError):
    code = "shape"


class FormatError(ValidationError):
    code = "format"


class LengthError(FormatError):
    code = "length"


class BoundsError(ValidationError, IndexError):
    code = "bounds"


class CapacityError(ValidationError):
    code = "capacity"


class ParameterRangeError(ValidationError):
    code = "parameter-range"


class PlacementError(ParameterRangeError):
    code = "placement"


class ContractError(ValidationError):
    code = "contract"


class CompatibilityError(ValidationError):
    code = "compatibility"


class ConditioningError(ValidationError):
    code = "conditioning"


class ManifestError(ValidationError):
    code = "manifest"


class NumericalError(DsovtError, RuntimeError):
    """Numerical failure during stepping or training; ``step`` locates it."""

    code = "numerical"

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class PositivityError(NumericalError):
    code = "positivity"


class DivergenceError(NumericalError):
    code = "divergence"
