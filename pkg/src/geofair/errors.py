"""Error types shared across the package."""


class ShapeError(ValueError):
    """Operands have incompatible shapes or dimensions."""


class NumericError(ArithmeticError):
    """A computation produced NaN or Inf; the message names the operation."""


class DomainError(ValueError):
    """An input lies outside the documented domain of a generator."""


class FormatError(ValueError):
    """A file has an unknown format version or a malformed layout."""


class UsageError(ValueError):
    """Bad command-line arguments or a missing input file (exit code 2)."""


class TrainingDiverged(RuntimeError):
    """Training hit a non-finite loss; the last finite state is retained."""
