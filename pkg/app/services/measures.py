import logging
from collections.abc import Callable, Sequence

import numpy as np

from app.core.config import config
from app.core.exceptions import EmptySupport, WeightSumError, NonFiniteInput, NonFiniteValue, DimensionError
from app.models.measure import DiscreteMeasure

logger = logging.getLogger(__name__)


def as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[1] < 1:
        raise DimensionError(f"points must be a list of d-vectors, got shape {arr.shape}")
    return arr


def new_measure(points: Sequence, weights: Sequence[float], tol: float | None = None) -> DiscreteMeasure:
    """Build a canonical measure: drop zero atoms, merge duplicates, sort points.

    Weights must already sum to one within ``tol`` (default WEIGHT_SUM_TOL);
    nothing is silently renormalized beyond that rounding.
    """
    tol = config.WEIGHT_SUM_TOL if tol is None else tol
    pts = as_points(points)
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if pts.shape[0] == 0 or w.size == 0:
        raise EmptySupport("measure needs at least one atom")
    if pts.shape[0] != w.size:
        raise DimensionError(f"{pts.shape[0]} points but {w.size} weights")
    if not np.all(np.isfinite(pts)):
        raise NonFiniteInput("support points must be finite")
    if not np.all(np.isfinite(w)):
        raise NonFiniteInput("weights must be finite")
    if np.any(w < 0):
        raise WeightSumError("weights must be nonnegative")

    keep = w > 0
    if not np.any(keep):
        raise EmptySupport("all weights are zero")
    total = float(np.sum(w))
    if abs(total - 1.0) > tol:
        raise WeightSumError(f"weights sum to {total!r}, not 1")
    pts, w = pts[keep] + 0.0, w[keep]

    # lexsort treats its last key as primary
    order = np.lexsort(pts.T[::-1])
    pts, w = pts[order], w[order]
    if pts.shape[0] > 1:
        new_group = np.any(pts[1:] != pts[:-1], axis=1)
        starts = np.concatenate(([0], np.flatnonzero(new_group) + 1))
        pts = pts[starts]
        w = np.add.reduceat(w, starts)

    s = float(np.sum(w))
    if abs(s - 1.0) > config.CANONICAL_SUM_TOL:
        w = w / s
    return DiscreteMeasure(points=np.ascontiguousarray(pts), weights=np.ascontiguousarray(w))


def dirac(point: Sequence[float] | float) -> DiscreteMeasure:
    return new_measure([np.atleast_1d(np.asarray(point, dtype=np.float64))], [1.0])


def mean(m: DiscreteMeasure) -> np.ndarray:
    return np.sum(m.weights[:, None] * m.points, axis=0)


def second_moment(m: DiscreteMeasure) -> float:
    return float(np.dot(m.weights, np.sum(m.points ** 2, axis=1)))


def evaluate(m: DiscreteMeasure, f: Callable) -> np.ndarray:
    """Values of ``f`` on the support; univariate measures pass scalars to ``f``."""
    if m.dim == 1:
        values = [f(float(p[0])) for p in m.points]
    else:
        values = [f(p) for p in m.points]
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.size != m.size:
        raise NonFiniteValue("test function must return one real per support point")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue("test function is not finite on the support")
    return arr


def expect(m: DiscreteMeasure, f: Callable) -> float:
    return float(np.dot(m.weights, evaluate(m, f)))


def expect_values(m: DiscreteMeasure, values: np.ndarray) -> float:
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise NonFiniteValue("values must be finite")
    return float(np.dot(m.weights, values))


def require_same_dim(*measures: DiscreteMeasure) -> int:
    dims = {m.dim for m in measures}
    if len(dims) != 1:
        raise DimensionError(f"measures have different dimensions {sorted(dims)}")
    return dims.pop()


def require_univariate(*measures: DiscreteMeasure) -> None:
    for m in measures:
        if m.dim != 1:
            raise DimensionError(f"univariate measure required, got d={m.dim}")


def pushforward(points: np.ndarray, weights: np.ndarray) -> DiscreteMeasure:
    """Image law of atoms mapped to ``points``; coinciding images are merged."""
    return new_measure(points, weights)


def mixture(measures: Sequence[DiscreteMeasure], mix: Sequence[float]) -> DiscreteMeasure:
    require_same_dim(*measures)
    pts = np.vstack([m.points for m in measures])
    w = np.concatenate([p * m.weights for m, p in zip(measures, mix)])
    return new_measure(pts, w)
