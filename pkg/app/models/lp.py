from dataclasses import dataclass

import numpy as np

from app.enum import LpStatus, RowSense


@dataclass(frozen=True)
class LinearProgram:
    """min c^T x subject to A x (sense) b, x >= 0."""
    objective: np.ndarray
    matrix: np.ndarray
    rhs: np.ndarray
    senses: tuple[RowSense, ...]

    @property
    def num_vars(self) -> int:
        return int(self.matrix.shape[1])

    @property
    def num_rows(self) -> int:
        return int(self.matrix.shape[0])


@dataclass(frozen=True)
class LpOutcome:
    status: LpStatus
    solution: np.ndarray | None = None
    value: float | None = None
    infeasibility_gap: float = 0.0
    duals: np.ndarray | None = None
    pivots: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status == LpStatus.OPTIMAL
