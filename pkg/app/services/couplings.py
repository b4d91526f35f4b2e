"""Martingale and submartingale couplings of discrete measures.

A (sub)martingale coupling of mu and nu is found as a basic feasible point of
the transportation polytope cut by one drift row per source atom and
coordinate: sum_j plan[i, j] (y_j[k] - x_i[k]) = 0 (or >= 0). On finite
supports the singleton events {X = x_i} generate every event, so these rows
are exactly the set-indicator martingale test.
"""
import logging
from collections.abc import Sequence

import numpy as np

from app.core.config import config
from app.core.exceptions import NotOrdered, InputError, IterationLimit
from app.enum import OrderKind, RowSense
from app.models.coupling import (
    Coupling, ConditionalKernel, PathMeasure, VerificationReport, IcxDecomposition, PathResiduals,
)
from app.models.lp import LinearProgram
from app.models.measure import DiscreteMeasure
from app.services import lp as lp_service
from app.services.measures import require_same_dim, pushforward

logger = logging.getLogger(__name__)


def product_coupling(mu: DiscreteMeasure, nu: DiscreteMeasure) -> Coupling:
    return Coupling(source=mu, target=nu, plan=np.outer(mu.weights, nu.weights))


def diagonal_coupling(mu: DiscreteMeasure) -> Coupling:
    return Coupling(source=mu, target=mu, plan=np.diag(mu.weights))


def transport_rows(mu: DiscreteMeasure, nu: DiscreteMeasure) -> tuple[np.ndarray, np.ndarray]:
    """Row-sum and column-sum equalities over the flattened plan (row-major)."""
    n, m = mu.size, nu.size
    rows = np.zeros((n + m, n * m))
    for i in range(n):
        rows[i, i * m:(i + 1) * m] = 1.0
    for j in range(m):
        rows[n + j, j::m] = 1.0
    return rows, np.concatenate([mu.weights, nu.weights])


def drift_rows(mu: DiscreteMeasure, nu: DiscreteMeasure) -> np.ndarray:
    """One row per (source atom i, coordinate k) with entries y_j[k] - x_i[k]."""
    n, m, d = mu.size, nu.size, mu.dim
    rows = np.zeros((n * d, n * m))
    for i in range(n):
        for k in range(d):
            rows[i * d + k, i * m:(i + 1) * m] = nu.points[:, k] - mu.points[i, k]
    return rows


def coupling_lp(mu: DiscreteMeasure, nu: DiscreteMeasure, kind: OrderKind | None,
                cost: np.ndarray | None = None) -> LinearProgram:
    """Transport LP over plans; ``kind`` adds martingale (cx) or submartingale (icx) rows."""
    require_same_dim(mu, nu)
    A, b = transport_rows(mu, nu)
    senses = [RowSense.EQ] * A.shape[0]
    if kind is not None:
        D = drift_rows(mu, nu)
        A = np.vstack([A, D])
        b = np.concatenate([b, np.zeros(D.shape[0])])
        sense = RowSense.EQ if OrderKind(kind) == OrderKind.CX else RowSense.GE
        senses += [sense] * D.shape[0]
    objective = np.zeros(mu.size * nu.size) if cost is None else np.asarray(cost, dtype=np.float64).reshape(-1)
    return lp_service.build(objective, A, b, senses)


def plan_from_solution(mu: DiscreteMeasure, nu: DiscreteMeasure, solution: np.ndarray) -> Coupling:
    plan = np.clip(solution.reshape(mu.size, nu.size), 0.0, None)
    return Coupling(source=mu, target=nu, plan=plan)


def coupling_for(kind: OrderKind, mu: DiscreteMeasure, nu: DiscreteMeasure) -> Coupling:
    kind = OrderKind(kind)
    outcome = lp_service.solve(coupling_lp(mu, nu, kind))
    if not outcome.is_optimal:
        word = "martingale" if kind == OrderKind.CX else "submartingale"
        raise NotOrdered(f"no {word} coupling exists", gap=outcome.infeasibility_gap)
    coupling = plan_from_solution(mu, nu, outcome.solution)
    report = verify(coupling, kind)
    if not report.passes:
        raise IterationLimit(f"LP plan fails verification (marginal {report.marginal_residual:.3e}, "
                             f"drift {report.drift_residual:.3e})")
    return coupling


def martingale_coupling(mu: DiscreteMeasure, nu: DiscreteMeasure) -> Coupling:
    return coupling_for(OrderKind.CX, mu, nu)


def submartingale_coupling(mu: DiscreteMeasure, nu: DiscreteMeasure) -> Coupling:
    return coupling_for(OrderKind.ICX, mu, nu)


def marginal_residual(c: Coupling) -> float:
    rows = np.max(np.abs(c.plan.sum(axis=1) - c.source.weights))
    cols = np.max(np.abs(c.plan.sum(axis=0) - c.target.weights))
    return float(max(rows, cols))


def drift(c: Coupling) -> np.ndarray:
    """sum_j plan[i, j] (y_j - x_i), shape (n, d)."""
    return c.plan @ c.target.points - c.plan.sum(axis=1)[:, None] * c.source.points


def verify(c: Coupling, kind: OrderKind, tol: float | None = None) -> VerificationReport:
    tol = config.VERIFY_TOL if tol is None else tol
    kind = OrderKind(kind)
    D = drift(c)
    marginal = marginal_residual(c)
    drift_residual = float(np.max(np.abs(D)))
    min_drift = float(np.min(D))
    if kind == OrderKind.CX:
        passes = drift_residual <= tol and marginal <= tol
    else:
        passes = min_drift >= -tol and marginal <= tol
    return VerificationReport(kind=kind, tol=tol, passes=passes, marginal_residual=marginal,
                              drift_residual=drift_residual, min_drift=min_drift)


def verify_martingale(c: Coupling, tol: float | None = None) -> VerificationReport:
    return verify(c, OrderKind.CX, tol)


def verify_submartingale(c: Coupling, tol: float | None = None) -> VerificationReport:
    return verify(c, OrderKind.ICX, tol)


def conditional_kernel(c: Coupling) -> ConditionalKernel:
    row_mass = c.plan.sum(axis=1)
    row_mass = np.where(row_mass > 0, row_mass, c.source.weights)
    rows = c.plan / row_mass[:, None]
    return ConditionalKernel(source_points=c.source.points, target_points=c.target.points, rows=rows)


def conditional_means(kernel: ConditionalKernel) -> np.ndarray:
    return kernel.rows @ kernel.target_points


def compose_chain(measures: Sequence[DiscreteMeasure], kind: OrderKind) -> PathMeasure:
    """Chain consecutive (sub)martingale couplings into one Markov path law.

    Raises NotOrdered with ``step`` set to the 1-based index of the first
    measure that cannot be reached from its predecessor.
    """
    kind = OrderKind(kind)
    if len(measures) < 2:
        raise InputError("a chain needs at least two measures")
    require_same_dim(*measures)
    kernels = []
    for i in range(1, len(measures)):
        try:
            c = coupling_for(kind, measures[i - 1], measures[i])
        except NotOrdered as exc:
            raise NotOrdered(f"chain breaks at step {i + 1}: {exc.detail}",
                             gap=exc.gap, step=i + 1) from exc
        kernels.append(conditional_kernel(c))
        logger.debug("chain step %d coupled (%d x %d atoms)", i + 1, measures[i - 1].size, measures[i].size)
    return PathMeasure(steps=tuple(measures), kernels=tuple(kernels), kind=kind)


def path_marginals(path: PathMeasure) -> list[np.ndarray]:
    law = path.initial.weights.copy()
    laws = [law]
    for kernel in path.kernels:
        law = law @ kernel.rows
        laws.append(law)
    return laws


def path_residuals(path: PathMeasure) -> PathResiduals:
    laws = path_marginals(path)
    marginal = tuple(float(np.max(np.abs(law - step.weights))) for law, step in zip(laws, path.steps))
    drifts = []
    for law, kernel in zip(laws, path.kernels):
        excess = conditional_means(kernel) - kernel.source_points
        excess = excess[law > 0]
        if path.kind == OrderKind.CX:
            drifts.append(float(np.max(np.abs(excess))))
        else:
            drifts.append(float(max(0.0, -np.min(excess))))
    return PathResiduals(marginal=marginal, drift=tuple(drifts))


def icx_decompose(mu: DiscreteMeasure, nu: DiscreteMeasure) -> IcxDecomposition:
    """Split mu <=icx nu as mu <= W pointwise and W <=cx nu, with W = E[Y | X]."""
    c = submartingale_coupling(mu, nu)
    images = conditional_means(conditional_kernel(c))
    dominance = tuple(bool(np.all(x <= w + config.ORDER_TOL)) for x, w in zip(mu.points, images))
    return IcxDecomposition(intermediate=pushforward(images, mu.weights), images=images,
                            dominance=dominance, coupling=c)
