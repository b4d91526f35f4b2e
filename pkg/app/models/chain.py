from dataclasses import dataclass, field

import numpy as np

from app.models.measure import DiscreteMeasure


@dataclass(frozen=True)
class PmChainSpec:
    """Finite pseudo-marginal setup: target pi, proposal q and a weight law per state."""
    states: tuple[str, ...]
    target: np.ndarray
    proposal: np.ndarray
    weight_kernels: dict[str, DiscreteMeasure]

    @property
    def size(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class ChainMatrix:
    """Explicit transition matrix over augmented states with its invariant law.

    Augmented states are (x, w) pairs for pseudo-marginal chains and (x, w, v)
    triples for the coupled embedding; bare chains use plain labels.
    """
    states: tuple[tuple, ...]
    matrix: np.ndarray
    law: np.ndarray

    @property
    def size(self) -> int:
        return len(self.states)

    def index(self) -> dict[tuple, int]:
        return {state: i for i, state in enumerate(self.states)}


@dataclass(frozen=True)
class BreveChains:
    breve: ChainMatrix
    breve_prime: ChainMatrix


@dataclass(frozen=True)
class BreveResiduals:
    reversibility: float
    reversibility_prime: float
    law_w: float
    law_v: float
    kernel_w: float
    kernel_v: float

    @property
    def worst(self) -> float:
        return max(self.reversibility, self.reversibility_prime, self.law_w, self.law_v,
                   self.kernel_w, self.kernel_v)


@dataclass(frozen=True)
class VarianceComparison:
    sigma2: float
    sigma2_prime: float
    ordered: bool
    gap: float
    residual: float
    residual_prime: float


@dataclass(frozen=True)
class SimulationResult:
    average: float
    batch_variance: float
    running_average: np.ndarray = field(repr=False)
    path: np.ndarray = field(repr=False)
