"""Exception types shared across the toolkit.

All of them derive from ValueError so generic callers can treat any of
them as an invalid-input condition, while the CLI maps each class to a
distinct exit code.
"""


class ShapeMismatchError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class SymmetryViolationError(ValueError):
    """An inverse transform produced a non-negligible imaginary part.

    Raised when a spectrum fed to the inverse transform is not
    conjugate-symmetric, i.e. it does not correspond to a real signal.
    """


class DegenerateSpectrumError(ValueError):
    """Amplitude normalization hit a group with (near-)zero spread."""


class TensorFileError(ValueError):
    """A tensor file is malformed or truncated."""
