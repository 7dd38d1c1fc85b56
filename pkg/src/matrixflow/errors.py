"""Exception hierarchy shared by all matrixflow modules."""


class MatrixFlowError(Exception):
    """Base class for every error raised by this package."""


class NonDivisiblePage(MatrixFlowError):
    """Page size is not divisible by the requested row geometry."""


class EmptyMatrix(MatrixFlowError):
    """A matrix operand has a zero dimension."""


class IndexOutOfRange(MatrixFlowError, IndexError):
    """Block index outside the block grid."""


class BlockSizeMismatch(MatrixFlowError):
    """A block write does not match the page size."""


class ShapeMismatch(MatrixFlowError):
    """GEMM operand shapes are incompatible."""


class LayoutMismatch(MatrixFlowError):
    """Operand block layouts do not match the multiply contract."""


class DTypeMismatch(MatrixFlowError):
    """GEMM operands have different element types."""


class GeometryMismatch(MatrixFlowError):
    """Block geometry does not match the array configuration."""


class InvalidConfig(MatrixFlowError):
    """A configuration value is out of range or inconsistent."""


class UnknownModel(MatrixFlowError, KeyError):
    """Requested transformer model name is not in the builtin table."""


class ConfigError(MatrixFlowError):
    """A config file could not be parsed; message carries file/field context."""
