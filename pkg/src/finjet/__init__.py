"""
finjet: Finsler geometry on truncated Taylor jets.

Jets, coefficient expressions, Finsler models and their connections,
Schwarzian-type cocycles, and the conformally invariant quantization map
restricted along the Sasaki-type metric.
"""

__version__ = "0.1.0"

from .errors import (
    DimensionError,
    DomainError,
    FinjetError,
    ModelInvalidError,
    NumericDomainError,
    OrderExceededError,
    ParseError,
    PreconditionError,
    ResonantWeightError,
)
from .fields import ScalarField, SymbolField
from .finsler import (
    CustomModel,
    LocalGeometry,
    PointOnSlit,
    RandersModel,
    RiemannianModel,
    euclidean,
    model_from_dict,
)
from .jets import Jet

__all__ = [
    "CustomModel",
    "DimensionError",
    "DomainError",
    "FinjetError",
    "Jet",
    "LocalGeometry",
    "ModelInvalidError",
    "NumericDomainError",
    "OrderExceededError",
    "ParseError",
    "PointOnSlit",
    "PreconditionError",
    "RandersModel",
    "ResonantWeightError",
    "RiemannianModel",
    "ScalarField",
    "SymbolField",
    "euclidean",
    "model_from_dict",
]
