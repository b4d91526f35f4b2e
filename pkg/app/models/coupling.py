from dataclasses import dataclass

import numpy as np

from app.enum import OrderKind
from app.models.measure import DiscreteMeasure


@dataclass(frozen=True, eq=False)
class Coupling:
    """Joint law on source x target supports; plan[i, j] is the mass on (x_i, y_j)."""
    source: DiscreteMeasure
    target: DiscreteMeasure
    plan: np.ndarray

    def __post_init__(self):
        self.plan.flags.writeable = False

    def __eq__(self, other) -> bool:
        if not isinstance(other, Coupling):
            return NotImplemented
        return (self.source == other.source and self.target == other.target
                and np.array_equal(self.plan, other.plan))

    def __hash__(self) -> int:
        return hash((self.source, self.target, self.plan.tobytes()))


@dataclass(frozen=True)
class ConditionalKernel:
    """Row i is the law of the second coordinate given the first equals x_i."""
    source_points: np.ndarray
    target_points: np.ndarray
    rows: np.ndarray


@dataclass(frozen=True)
class PathMeasure:
    """Markov path law stored as an initial law plus one kernel per step."""
    steps: tuple[DiscreteMeasure, ...]
    kernels: tuple[ConditionalKernel, ...]
    kind: OrderKind

    @property
    def initial(self) -> DiscreteMeasure:
        return self.steps[0]

    @property
    def length(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class VerificationReport:
    kind: OrderKind
    tol: float
    passes: bool
    marginal_residual: float
    drift_residual: float   # max |E[Y - X | X = x_i]| for martingales
    min_drift: float        # min over atoms/coordinates of sum_j plan[i,j](y_j - x_i)


@dataclass(frozen=True)
class IcxDecomposition:
    intermediate: DiscreteMeasure
    images: np.ndarray        # w_i for each source atom, shape (n, d)
    dominance: tuple[bool, ...]
    coupling: Coupling

    @property
    def dominated(self) -> bool:
        return all(self.dominance)


@dataclass(frozen=True)
class PathResiduals:
    """Per-step residuals of a composed path: marginal fidelity and drift."""
    marginal: tuple[float, ...]
    drift: tuple[float, ...]

    @property
    def max_marginal(self) -> float:
        return max(self.marginal)

    @property
    def max_drift(self) -> float:
        return max(self.drift) if self.drift else 0.0
