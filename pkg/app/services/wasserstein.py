import logging

import numpy as np

from app.core.exceptions import KindMismatch
from app.enum import FamilyKind
from app.models.coupling import Coupling
from app.models.measure import DiscreteMeasure
from app.models.orders import TestFamily
from app.services import lp as lp_service
from app.services.couplings import coupling_lp, plan_from_solution
from app.services.measures import require_same_dim, require_univariate
from app.services.orders import family_gaps

logger = logging.getLogger(__name__)


def distance_matrix(mu: DiscreteMeasure, nu: DiscreteMeasure) -> np.ndarray:
    """Euclidean ground cost |x_i - y_j|."""
    return np.linalg.norm(mu.points[:, None, :] - nu.points[None, :, :], axis=2)


def w1_lp(mu: DiscreteMeasure, nu: DiscreteMeasure) -> tuple[float, Coupling]:
    require_same_dim(mu, nu)
    outcome = lp_service.solve(coupling_lp(mu, nu, None, cost=distance_matrix(mu, nu)))
    plan = plan_from_solution(mu, nu, outcome.solution)
    return max(0.0, outcome.value), plan


def _cdf(m: DiscreteMeasure, grid: np.ndarray) -> np.ndarray:
    """P(X <= t) for every t in ``grid``."""
    order = np.argsort(m.points[:, 0], kind="stable")
    cumulative = np.concatenate([[0.0], np.cumsum(m.weights[order])])
    return cumulative[np.searchsorted(m.points[order, 0], grid, side="right")]


def w1_univariate(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Area between the two distribution functions, summed over merged support intervals."""
    require_univariate(mu, nu)
    grid = np.union1d(mu.points[:, 0], nu.points[:, 0])
    F, G = _cdf(mu, grid), _cdf(nu, grid)
    return float(np.sum(np.abs(F[:-1] - G[:-1]) * np.diff(grid)))


def support_box(mu: DiscreteMeasure, nu: DiscreteMeasure, inflate: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Coordinate box holding both supports, widened by ``inflate`` on every side."""
    require_same_dim(mu, nu)
    pts = np.vstack([mu.points, nu.points])
    return np.floor(pts.min(axis=0) - inflate), np.ceil(pts.max(axis=0) + inflate)


def dual_lower_bound(mu: DiscreteMeasure, nu: DiscreteMeasure, family: TestFamily) -> float:
    """max over 1-Lipschitz members g of |E_mu g - E_nu g|; never exceeds W1."""
    if family.kind != FamilyKind.LIPSCHITZ_MIN:
        raise KindMismatch(f"dual bound needs a LipschitzMin family, got {family.kind.value}")
    return float(np.max(np.abs(family_gaps(mu, nu, family))))
