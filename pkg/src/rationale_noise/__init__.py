"""Measurement-noise analysis of spurious features, in closed form and on text."""

from rationale_noise.errors import DataError, SingularityError, ValidationError

__version__ = "0.1.0"

__all__ = ["DataError", "SingularityError", "ValidationError", "__version__"]
