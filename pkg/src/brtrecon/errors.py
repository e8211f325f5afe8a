"""Exception types raised across the package."""


class BrtError(Exception):
    """Base class for all package errors."""


class AlignmentError(BrtError):
    """Source direction is not aligned with the horizontal sampling axis."""


class DegenerateAngleError(BrtError):
    """Source and detector directions are (numerically) orthogonal."""


class UnsupportedPairError(BrtError):
    """Pair geometry outside what the requested operator supports."""


class GridMismatch(BrtError):
    """Operands are defined on different sampling grids."""


class NegativeImage(BrtError):
    """Image values violate the nonnegativity / range constraint."""


class ModelZeroWithData(BrtError):
    """Model mean is zero at a bin with positive counts."""


class ZeroDenominator(BrtError):
    """Scatter-fidelity denominator vanished where counts are positive."""


class ZeroModel(BrtError):
    """Exponential-family components sum to zero where counts are positive."""


class RootSolveFailure(BrtError):
    """Pixel update root solve did not reach the residual tolerance."""


class MonotonicityViolation(BrtError):
    """Objective increased between half steps; indicates an implementation bug."""


class DegenerateOperator(BrtError):
    """Operator has no mass (zero row sums); updates are undefined."""


class UnsupportedShape(BrtError):
    """Phantom shape kind not supported by the analytic transform."""


class OutOfBounds(BrtError):
    """Requested geometry does not fit inside the grid extent."""


class NegativeInput(BrtError):
    """Input array contains negative values where none are allowed."""


class ConfigError(BrtError):
    """Experiment configuration failed to parse or validate."""


class DataFormatError(BrtError):
    """Binary image/measurement file is malformed or has an unknown version."""
