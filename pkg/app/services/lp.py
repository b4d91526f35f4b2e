"""Dense two-phase primal simplex with Bland's rule.

Every LP in the package (couplings, order checks, Wasserstein, MOT) goes
through ``solve``. Pivoting is fully deterministic: the entering column is the
lowest-index column with negative reduced cost, the leaving row is the
minimum-ratio row whose basic variable has the lowest index among ties. The
same problem therefore always yields the same basic solution, which is what
makes per-parameter selections downstream pure functions of their inputs.

The basis is refactorized from the standardized constraint matrix at every
pivot, so the basic solution, the multipliers and the reduced costs never
carry rounding error from earlier pivots. Degenerate basic values are snapped
to exact zero, which keeps ratio ties exact for the anti-cycling rule.
"""
import logging
from collections.abc import Sequence

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from app.core.config import config
from app.core.exceptions import DimensionMismatch, IterationLimit, NonFiniteInput
from app.enum import LpStatus, RowSense
from app.models.lp import LinearProgram, LpOutcome

logger = logging.getLogger(__name__)

_REDUCED_COST_TOL = 1e-10
_RATIO_TIE_TOL = 1e-12
_ZERO_TOL = 1e-11


def build(objective, matrix, rhs, senses: Sequence[RowSense | str]) -> LinearProgram:
    A = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    b = np.asarray(rhs, dtype=np.float64).reshape(-1)
    c = np.asarray(objective, dtype=np.float64).reshape(-1)
    senses = tuple(RowSense(s) for s in senses)
    m, n = A.shape
    if m < 1 or n < 1:
        raise DimensionMismatch("LP needs at least one row and one variable")
    if b.size != m or len(senses) != m:
        raise DimensionMismatch(f"{m} rows but {b.size} rhs entries and {len(senses)} senses")
    if c.size != n:
        raise DimensionMismatch(f"{n} variables but objective has {c.size} entries")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
        raise NonFiniteInput("LP data must be finite")
    return LinearProgram(objective=c, matrix=A, rhs=b, senses=senses)


def _row_scale(lp: LinearProgram) -> np.ndarray:
    row_max = np.max(np.abs(lp.matrix), axis=1)
    row_max[row_max == 0.0] = 1.0
    return row_max


def _standardize(lp: LinearProgram):
    """Scale rows to unit max-norm, add slack/surplus columns, make b >= 0.

    Returns the equality system and the per-row factor mapping standardized
    multipliers back to the caller's rows.
    """
    m = lp.num_rows
    row_max = _row_scale(lp)
    A_s = lp.matrix / row_max[:, None]
    b_s = lp.rhs / row_max

    inequality_rows = [i for i, s in enumerate(lp.senses) if s != RowSense.EQ]
    slack = np.zeros((m, len(inequality_rows)))
    for k, i in enumerate(inequality_rows):
        slack[i, k] = 1.0 if lp.senses[i] == RowSense.LE else -1.0
    A_std = np.hstack([A_s, slack])

    flip = np.where(b_s < 0, -1.0, 1.0)
    A_std *= flip[:, None]
    b_std = b_s * flip
    b_std[np.abs(b_std) <= _ZERO_TOL] = 0.0
    return A_std, b_std, flip / row_max


class _Basis:
    """LU factors of the current basis columns of ``M = [A_std | I]``."""

    def __init__(self, M: np.ndarray, b: np.ndarray, columns: np.ndarray):
        self.M = M
        self.b = b
        self.columns = columns
        self.refactor()

    def refactor(self) -> None:
        self.lu = lu_factor(self.M[:, self.columns], check_finite=False)
        x = lu_solve(self.lu, self.b, check_finite=False)
        x[np.abs(x) <= _ZERO_TOL] = 0.0
        self.values = x

    def ftran(self, column: np.ndarray) -> np.ndarray:
        return lu_solve(self.lu, column, check_finite=False)

    def btran(self, row: np.ndarray) -> np.ndarray:
        return lu_solve(self.lu, row, trans=1, check_finite=False)

    def swap(self, row: int, col: int) -> None:
        self.columns[row] = col
        self.refactor()


def _pivot_floor(vector: np.ndarray) -> float:
    return config.PIVOT_TOL * max(1.0, float(np.max(np.abs(vector))))


def _iterate(basis: _Basis, cost: np.ndarray, allowed: np.ndarray, pivots: list[int], limit: int) -> LpStatus:
    cost_tol = _REDUCED_COST_TOL * max(1.0, float(np.max(np.abs(cost))))
    while True:
        y = basis.btran(cost[basis.columns])
        reduced = cost - basis.M.T @ y
        reduced[basis.columns] = 0.0
        entering = np.flatnonzero((reduced < -cost_tol) & allowed)
        if entering.size == 0:
            return LpStatus.OPTIMAL
        j = int(entering[0])
        direction = basis.ftran(basis.M[:, j])
        positive = direction > _pivot_floor(direction)
        if not np.any(positive):
            return LpStatus.UNBOUNDED
        if pivots[0] >= limit:
            raise IterationLimit("simplex pivot limit reached; instance is numerically pathological")
        ratios = np.full(direction.size, np.inf)
        ratios[positive] = np.maximum(basis.values[positive], 0.0) / direction[positive]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + _RATIO_TIE_TOL * (1.0 + best))
        i = int(ties[np.argmin(basis.columns[ties])])
        basis.swap(i, j)
        pivots[0] += 1


def _drive_out_artificials(basis: _Basis, n_std: int) -> None:
    """Replace zero-level artificials by structural columns; rows that allow none are redundant."""
    for i in range(basis.columns.size):
        if basis.columns[i] < n_std:
            continue
        unit = np.zeros(basis.columns.size)
        unit[i] = 1.0
        row = basis.btran(unit) @ basis.M[:, :n_std]
        row[basis.columns[basis.columns < n_std]] = 0.0
        candidates = np.flatnonzero(np.abs(row) > _pivot_floor(row))
        if candidates.size:
            basis.swap(i, int(candidates[0]))


def _scaled_violation(lp: LinearProgram, x: np.ndarray) -> float:
    """Max row violation at ``x`` after scaling rows to unit max-norm."""
    lhs = lp.matrix @ x
    gap = np.where(np.array([s == RowSense.EQ for s in lp.senses]), np.abs(lhs - lp.rhs), 0.0)
    ge = np.array([s == RowSense.GE for s in lp.senses])
    le = np.array([s == RowSense.LE for s in lp.senses])
    gap = np.where(ge, lp.rhs - lhs, gap)
    gap = np.where(le, lhs - lp.rhs, gap)
    return float(np.max(np.maximum(gap, 0.0) / _row_scale(lp)))


def _tableau(basis: _Basis, cost: np.ndarray) -> np.ndarray:
    body = basis.ftran(np.hstack([basis.M, basis.b[:, None]]))
    y = basis.btran(cost[basis.columns])
    reduced = np.append(cost - basis.M.T @ y, -float(y @ basis.b))
    return np.vstack([body, reduced])


def solve(lp: LinearProgram, max_pivots: int | None = None) -> LpOutcome:
    m, n = lp.num_rows, lp.num_vars
    limit = config.ITERATION_FACTOR * (n + m) if max_pivots is None else max_pivots
    pivots = [0]

    A_std, b_std, row_factor = _standardize(lp)
    n_std = A_std.shape[1]
    width = n_std + m
    M = np.hstack([A_std, np.eye(m)])

    # Phase one: artificial identity basis, minimise the artificial sum
    basis = _Basis(M, b_std, np.arange(n_std, width))
    phase_one = np.zeros(width)
    phase_one[n_std:] = 1.0
    allowed = np.arange(width) < n_std
    _iterate(basis, phase_one, allowed, pivots, limit)
    gap = float(phase_one[basis.columns] @ basis.values)
    if gap > config.FEAS_TOL:
        logger.info("LP infeasible: phase-one gap %.3e after %d pivots", gap, pivots[0])
        return LpOutcome(status=LpStatus.INFEASIBLE, infeasibility_gap=gap, pivots=pivots[0])

    _drive_out_artificials(basis, n_std)

    # Phase two
    cost = np.zeros(width)
    cost[:n] = lp.objective
    status = _iterate(basis, cost, allowed, pivots, limit)
    if status == LpStatus.UNBOUNDED:
        logger.info("LP unbounded after %d pivots", pivots[0])
        return LpOutcome(status=LpStatus.UNBOUNDED, pivots=pivots[0])

    x = np.zeros(width)
    x[basis.columns] = basis.values
    solution = x[:n].copy()
    solution[(solution < 0) & (solution > -config.FEAS_TOL)] = 0.0
    violation = _scaled_violation(lp, solution)
    if violation > config.FEAS_TOL or np.any(solution < 0):
        raise IterationLimit(f"basic solution violates its rows by {violation:.3e}; "
                             "instance is numerically pathological")
    duals = basis.btran(cost[basis.columns]) * row_factor
    value = float(lp.objective @ solution)
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug("final tableau (%d pivots):\n%s", pivots[0],
                     np.array2string(_tableau(basis, cost), precision=6, suppress_small=True,
                                     max_line_width=200))
    logger.info("LP optimal: value %.12g after %d pivots", value, pivots[0])
    return LpOutcome(status=LpStatus.OPTIMAL, solution=solution, value=value,
                     duals=duals, pivots=pivots[0])


def feasibility(matrix, rhs, senses: Sequence[RowSense | str]) -> LpOutcome:
    """Phase one only: any basic feasible point, or Infeasible with its gap."""
    A = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    return solve(build(np.zeros(A.shape[1]), A, rhs, senses))


def residual(lp: LinearProgram, x: np.ndarray) -> float:
    """Max violation of the rows of ``lp`` at ``x`` (unscaled)."""
    lhs = lp.matrix @ x
    worst = 0.0
    for value, b, sense in zip(lhs, lp.rhs, lp.senses):
        if sense == RowSense.EQ:
            worst = max(worst, abs(value - b))
        elif sense == RowSense.GE:
            worst = max(worst, b - value)
        else:
            worst = max(worst, value - b)
    return worst
