"""Entanglement detection with decomposed positive maps and majorization."""

from .linalg import ContractViolation
from .states import BipartiteState

__version__ = "0.1.0"

__all__ = ["BipartiteState", "ContractViolation", "__version__"]
