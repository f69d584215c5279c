"""Semantic exceptions shared across the package.

Plain ``ValueError`` is reserved for mathematical domain violations
(probabilities outside (0,1), |rho| >= 1, and the like). The two classes
below separate problems with the data being modeled from numerical
failures inside an otherwise valid computation, because the command line
maps them to different exit codes.
"""


class ZicopulaError(Exception):
    """Base class for package-specific failures."""


class DataError(ZicopulaError):
    """The supplied dataset violates a precondition (shape, sign, degeneracy)."""


class NumericError(ZicopulaError):
    """A numerical routine failed: factorization, optimization, normalization."""
