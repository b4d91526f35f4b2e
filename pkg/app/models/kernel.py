from dataclasses import dataclass

from app.enum import OrderKind
from app.models.coupling import Coupling
from app.models.measure import DiscreteMeasure
from app.models.orders import OrderVerdict


@dataclass(frozen=True)
class FiniteKernel:
    """A measure per parameter label; labels are opaque strings."""
    params: tuple[str, ...]
    measures: dict[str, DiscreteMeasure]

    @property
    def dim(self) -> int:
        return self.measures[self.params[0]].dim

    def __getitem__(self, label: str) -> DiscreteMeasure:
        return self.measures[label]


@dataclass(frozen=True)
class CouplingKernel:
    params: tuple[str, ...]
    couplings: dict[str, Coupling]
    kind: OrderKind | None = None

    def __getitem__(self, label: str) -> Coupling:
        return self.couplings[label]


@dataclass(frozen=True)
class ConditionalCoupling:
    """Joint law of (X, Y, theta): theta_law(theta) * R_theta(dx, dy)."""
    theta_law: dict[str, float]
    kernel: CouplingKernel
    vacuous: tuple[str, ...] = ()

    @property
    def params(self) -> tuple[str, ...]:
        return tuple(label for label in self.kernel.params if label in self.theta_law)


@dataclass(frozen=True)
class PointwiseReport:
    verdicts: dict[str, OrderVerdict]
    vacuous: tuple[str, ...] = ()

    @property
    def holds(self) -> bool:
        return all(v.holds for v in self.verdicts.values())

    @property
    def failing(self) -> tuple[str, ...]:
        return tuple(label for label, v in self.verdicts.items() if not v.holds)


@dataclass(frozen=True)
class ConditionalOrderReport:
    pointwise: PointwiseReport
    mixture: OrderVerdict

    @property
    def holds(self) -> bool:
        return self.pointwise.holds


@dataclass(frozen=True)
class ConditionalResiduals:
    x_theta: float
    y_theta: float
    drift: float
    passes: bool
