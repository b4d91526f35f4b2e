"""Classical and martingale optimal transport between discrete marginals.

Both problems are minimisations over the coupling polytope; the martingale
version adds the drift rows of ``couplings.coupling_lp``. The simplex
optimizer is deterministic, so parametric sweeps return one reproducible
minimizer per label.
"""
import logging

import numpy as np

from app.core.exceptions import CostBoundViolation, NotOrdered, NonFiniteValue, DimensionError, InputError
from app.enum import CostName, OrderKind
from app.models.kernel import FiniteKernel
from app.models.measure import DiscreteMeasure
from app.models.transport import CostSpec, TransportResult
from app.services import lp as lp_service
from app.services.couplings import coupling_lp, plan_from_solution
from app.services.kernels import common_labels, per_label, raise_failures, fan_out
from app.services.measures import require_same_dim

logger = logging.getLogger(__name__)

_BOUND_SLACK = 1e-9


def _abs_cost(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.linalg.norm(y - x))


def _square_cost(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.sum((y - x) ** 2))


def _forward_cost(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.sum(np.maximum(y - x, 0.0)))


BUILTIN_COSTS = {
    CostName.ABS: _abs_cost,
    CostName.SQUARE: _square_cost,
    CostName.FORWARD: _forward_cost,
}


def builtin_cost(name: CostName | str) -> CostSpec:
    name = CostName(name)
    return CostSpec(name=name.value, lower_bound=0.0, evaluator=BUILTIN_COSTS[name])


def table_cost(table, lower_bound: float = 0.0) -> CostSpec:
    arr = np.atleast_2d(np.asarray(table, dtype=np.float64))
    return CostSpec(name="table", lower_bound=lower_bound, table=arr)


def constant_cost(value: float) -> CostSpec:
    return CostSpec(name=f"constant {value!r}", lower_bound=max(0.0, -value),
                    evaluator=lambda x, y: value)


def cost_matrix(mu: DiscreteMeasure, nu: DiscreteMeasure, cost: CostSpec) -> np.ndarray:
    """Evaluate ``cost`` on every support pair and audit the declared lower bound."""
    require_same_dim(mu, nu)
    if cost.table is not None:
        C = cost.table
        if C.shape != (mu.size, nu.size):
            raise DimensionError(f"cost table is {C.shape}, plan is {(mu.size, nu.size)}")
    elif cost.evaluator is not None:
        C = np.array([[cost.evaluator(x, y) for y in nu.points] for x in mu.points], dtype=np.float64)
    else:
        raise InputError("cost needs an evaluator or a table")
    if not np.all(np.isfinite(C)):
        raise NonFiniteValue("infinite or undefined costs are not supported")
    norm_x = np.linalg.norm(mu.points, axis=1)[:, None]
    norm_y = np.linalg.norm(nu.points, axis=1)[None, :]
    floor = -cost.lower_bound * (1.0 + norm_x + norm_y) - _BOUND_SLACK
    if np.any(C < floor):
        i, j = np.unravel_index(int(np.argmin(C - floor)), C.shape)
        raise CostBoundViolation(
            f"cost {C[i, j]!r} at atom pair ({i}, {j}) is below the declared bound with C={cost.lower_bound!r}")
    return C


def _solve(mu: DiscreteMeasure, nu: DiscreteMeasure, cost: CostSpec, kind: OrderKind | None) -> TransportResult:
    C = cost_matrix(mu, nu, cost)
    outcome = lp_service.solve(coupling_lp(mu, nu, kind, cost=C))
    if not outcome.is_optimal:
        raise NotOrdered("marginals are not in convex order; no martingale coupling exists",
                         gap=outcome.infeasibility_gap)
    plan = plan_from_solution(mu, nu, outcome.solution)
    value = float(np.sum(plan.plan * C))
    logger.info("%s transport with cost %s: value %.12g",
                "martingale" if kind else "classical", cost.name, value)
    return TransportResult(value=value, plan=plan)


def mot_solve(mu: DiscreteMeasure, nu: DiscreteMeasure, cost: CostSpec) -> TransportResult:
    return _solve(mu, nu, cost, OrderKind.CX)


def ot_solve(mu: DiscreteMeasure, nu: DiscreteMeasure, cost: CostSpec) -> TransportResult:
    return _solve(mu, nu, cost, None)


def mot_parametric(P: FiniteKernel, Q: FiniteKernel, cost: CostSpec) -> dict[str, TransportResult]:
    labels = common_labels(P, Q)
    results = fan_out(labels, per_label(lambda label: mot_solve(P[label], Q[label], cost)))
    raise_failures(results)
    return results
