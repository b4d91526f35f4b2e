from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finitely supported probability measure on R^d.

    Built through ``app.services.measures.new_measure``, which enforces the
    canonical form: positive weights summing to one, distinct points, points
    sorted lexicographically. Arrays are frozen after construction.
    """
    points: np.ndarray   # shape (n, d), float64
    weights: np.ndarray  # shape (n,), float64

    def __post_init__(self):
        self.points.flags.writeable = False
        self.weights.flags.writeable = False

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return (self.points.shape == other.points.shape
                and np.array_equal(self.points, other.points)
                and np.array_equal(self.weights, other.weights))

    def __hash__(self) -> int:
        return hash((self.points.shape, self.points.tobytes(), self.weights.tobytes()))

    def __repr__(self) -> str:
        atoms = ", ".join(
            f"{w:.6g}@{tuple(float(c) for c in p)}" for p, w in zip(self.points, self.weights)
        )
        return f"DiscreteMeasure(d={self.dim}, [{atoms}])"
