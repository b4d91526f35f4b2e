from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from app.models.coupling import Coupling


@dataclass(frozen=True)
class CostSpec:
    """Transport cost c(x, y) with declared constant C in c >= -C(1 + |x| + |y|).

    Either ``evaluator`` (called on support points) or ``table`` (one value per
    source/target atom pair) is set.
    """
    name: str
    lower_bound: float = 0.0
    evaluator: Callable[[np.ndarray, np.ndarray], float] | None = field(default=None, repr=False)
    table: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class TransportResult:
    value: float
    plan: Coupling
