# src/algebra/errors.py

"""
Exception hierarchy shared by every layer.

The CLI maps these classes to exit codes:
  InputError        → 2   (schema / validation / precondition failures)
  CapTooSmallError  → 3   (result would depend on degrees above the cap)
  KLMismatchError   → 4   (external cross-check disagrees)
"""


class MomentSheafError(Exception):
    """Base class for all engine errors."""

    exit_code = 1


class InputError(MomentSheafError):
    """Malformed or inconsistent input."""

    exit_code = 2


class DegreeError(InputError):
    """A homogeneity or degree-cap precondition is violated."""


class NotGKMError(InputError):
    """The moment graph violates the GKM condition."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NotInCategoryError(InputError):
    """An object falls outside the category an operation is defined on."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class CapTooSmallError(MomentSheafError):
    """A generator appeared too close to the degree cap to trust the result."""

    exit_code = 3

    def __init__(self, message, vertex=None, degree=None, cap=None):
        super().__init__(message)
        self.vertex = vertex
        self.degree = degree
        self.cap = cap


class KLMismatchError(MomentSheafError):
    """BMP stalk characters disagree with Kazhdan–Lusztig polynomials."""

    exit_code = 4
