"""Finite-state pseudo-marginal Metropolis-Hastings chains.

A move from (x, w) proposes y ~ q(x, .) and a fresh weight u ~ Q_y, and is
accepted with probability min{1, r(x, y) u / w}. Weights take finitely many
strictly positive values, so the chain on (x, w) pairs is an explicit matrix and
its asymptotic variances can be computed exactly from the fundamental matrix.
"""
import logging
from collections.abc import Callable, Mapping, Sequence

import numpy as np
from scipy import linalg
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from app.core.config import config
from app.core.exceptions import (
    InvalidSpec, SpecMismatch, CouplingInvalid, Reducible, NotOrderedWeights, NotOrdered,
)
from app.enum import OrderKind
from app.models.chain import (
    PmChainSpec, ChainMatrix, BreveChains, BreveResiduals, VarianceComparison, SimulationResult,
)
from app.models.coupling import Coupling
from app.models.measure import DiscreteMeasure
from app.services import couplings, orders
from app.services.kernels import fan_out
from app.services.measures import mean

logger = logging.getLogger(__name__)

_MEAN_TOL = 1e-9
_ORDERING_SLACK = 1e-8
_VARIANCE_FLOOR = 1e-9


def _probability_vector(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise InvalidSpec(f"{what} must be finite and nonnegative")
    total = float(arr.sum())
    if abs(total - 1.0) > config.WEIGHT_SUM_TOL:
        raise InvalidSpec(f"{what} sums to {total!r}, not 1")
    if abs(total - 1.0) > config.CANONICAL_SUM_TOL:
        arr = arr / total
    return arr


def new_spec(states: Sequence[str], target, proposal,
             weight_kernels: Mapping[str, DiscreteMeasure]) -> PmChainSpec:
    """Validate and normalize a pseudo-marginal setup.

    pi must be positive and q row-stochastic; each Q_x must be univariate with
    strictly positive support and mean one.
    """
    states = tuple(str(s) for s in states)
    n = len(states)
    if n == 0 or len(set(states)) != n:
        raise InvalidSpec("states must be a nonempty list of unique labels")
    pi = _probability_vector(target, "target")
    if pi.shape != (n,):
        raise InvalidSpec(f"target has shape {pi.shape}, expected ({n},)")
    if np.any(pi <= 0):
        raise InvalidSpec("target must be strictly positive on every state")
    q = np.asarray(proposal, dtype=np.float64)
    if q.shape != (n, n):
        raise InvalidSpec(f"proposal has shape {q.shape}, expected ({n}, {n})")
    q = np.vstack([_probability_vector(row, f"proposal row {states[i]!r}") for i, row in enumerate(q)])
    if set(weight_kernels) != set(states):
        raise InvalidSpec("weight kernels must be keyed by exactly the states")
    for x in states:
        Q = weight_kernels[x]
        if Q.dim != 1:
            raise InvalidSpec(f"weight law of {x!r} must be univariate")
        if np.any(Q.points[:, 0] <= 0):
            raise InvalidSpec(f"weight law of {x!r} must have strictly positive support")
        m = float(mean(Q)[0])
        if abs(m - 1.0) > _MEAN_TOL:
            raise InvalidSpec(f"weight law of {x!r} has mean {m!r}, not 1")
    return PmChainSpec(states=states, target=pi, proposal=q,
                       weight_kernels={x: weight_kernels[x] for x in states})


def acceptance_ratio(spec: PmChainSpec) -> np.ndarray:
    """r(x, y) = pi(y) q(y, x) / (pi(x) q(x, y)); zero where q(x, y) = 0."""
    pi, q = spec.target, spec.proposal
    num = pi[None, :] * q.T
    den = pi[:, None] * q
    r = np.zeros_like(q)
    np.divide(num, den, out=r, where=den > 0)
    return r


def _finish(states: list[tuple], T: np.ndarray, law: np.ndarray) -> ChainMatrix:
    # rejection mass is whatever the moves leave behind
    np.fill_diagonal(T, T.diagonal() + (1.0 - T.sum(axis=1)))
    law = law / law.sum()
    return ChainMatrix(states=tuple(states), matrix=T, law=law)


def build_pm_kernel(spec: PmChainSpec) -> ChainMatrix:
    """Pseudo-marginal kernel K on (x, w) pairs with invariant law pi(x) Q_x(w) w."""
    r = acceptance_ratio(spec)
    states, law, blocks = [], [], []
    for i, x in enumerate(spec.states):
        Q = spec.weight_kernels[x]
        w = Q.points[:, 0]
        blocks.append((i, w, Q.weights))
        states.extend((x, float(v)) for v in w)
        law.append(spec.target[i] * Q.weights * w)
    offsets = np.cumsum([0] + [b[1].size for b in blocks])
    T = np.zeros((offsets[-1], offsets[-1]))
    for i, w, _ in blocks:
        rows = slice(offsets[i], offsets[i + 1])
        for j, u, pu in blocks:
            if spec.proposal[i, j] == 0:
                continue
            accept = np.minimum(1.0, r[i, j] * u[None, :] / w[:, None])
            T[rows, offsets[j]:offsets[j + 1]] += spec.proposal[i, j] * pu[None, :] * accept
    cm = _finish(states, T, np.concatenate(law))
    logger.debug("pseudo-marginal kernel over %d augmented states", cm.size)
    return cm


def stationary_check(cm: ChainMatrix) -> float:
    """Largest detailed-balance violation |law[a] T[a, b] - law[b] T[b, a]|."""
    flow = cm.law[:, None] * cm.matrix
    return float(np.max(np.abs(flow - flow.T)))


def chain_from_matrix(T, law=None, states: Sequence | None = None) -> ChainMatrix:
    T = np.asarray(T, dtype=np.float64)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise InvalidSpec(f"transition matrix must be square, got shape {T.shape}")
    if not np.all(np.isfinite(T)) or np.any(T < 0):
        raise InvalidSpec("transition probabilities must be finite and nonnegative")
    worst = float(np.max(np.abs(T.sum(axis=1) - 1.0)))
    if worst > config.KERNEL_ROW_TOL:
        raise InvalidSpec(f"transition rows deviate from 1 by {worst!r}")
    law = stationary_distribution(T) if law is None else _probability_vector(law, "invariant law")
    if law.shape != (T.shape[0],):
        raise InvalidSpec("invariant law does not match the matrix size")
    states = tuple(range(T.shape[0])) if states is None else tuple(states)
    return ChainMatrix(states=states, matrix=T, law=law)


def closed_classes(T: np.ndarray) -> int:
    """Number of communicating classes that no transition leaves."""
    count, labels = connected_components(csr_matrix(T > 0), directed=True, connection="strong")
    rows, cols = np.nonzero(T > 0)
    leaking = np.unique(labels[rows][labels[rows] != labels[cols]])
    return count - leaking.size


def stationary_distribution(T) -> np.ndarray:
    """Solve law (I - T + 11') = 1' for a chain with a single closed class."""
    T = np.asarray(T, dtype=np.float64)
    n = T.shape[0]
    classes = closed_classes(T)
    if classes > 1:
        raise Reducible(f"chain has {classes} closed classes, so its invariant law is not unique")
    law = linalg.solve((np.eye(n) - T + np.ones((n, n))).T, np.ones(n))
    law = np.clip(law, 0.0, None)
    return law / law.sum()


def _support(cm: ChainMatrix) -> np.ndarray:
    """Indices carrying invariant mass, after checking they form one communicating class."""
    live = np.flatnonzero(cm.law > 0)
    graph = csr_matrix(cm.matrix[np.ix_(live, live)] > 0)
    count, _ = connected_components(graph, directed=True, connection="strong")
    if count > 1:
        raise Reducible(f"chain splits into {count} communicating classes on its invariant support")
    return live


def lift(cm: ChainMatrix, f) -> np.ndarray:
    """Values on augmented states from an array, a mapping or a callable."""
    if callable(f):
        values = [f(state) for state in cm.states]
    elif isinstance(f, Mapping):
        values = [f[state] for state in cm.states]
    else:
        values = f
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if values.size != cm.size:
        raise InvalidSpec(f"function has {values.size} values for {cm.size} states")
    if not np.all(np.isfinite(values)):
        raise InvalidSpec("function values must be finite")
    return values


def asymptotic_variance(cm: ChainMatrix, f) -> float:
    """sigma^2 = <fbar, (2Z - I) fbar> under the invariant law, Z = (I - T + 1 law')^-1."""
    live = _support(cm)
    T = cm.matrix[np.ix_(live, live)]
    law = cm.law[live] / cm.law[live].sum()
    values = lift(cm, f)[live]
    centred = values - law @ values
    n = live.size
    g = linalg.solve(np.eye(n) - T + np.outer(np.ones(n), law), centred)
    sigma2 = float(2.0 * law @ (centred * g) - law @ centred ** 2)
    if -_VARIANCE_FLOOR < sigma2 < 0:
        sigma2 = 0.0
    return sigma2


# Coupled embedding

def _require_shared(spec: PmChainSpec, spec_prime: PmChainSpec) -> None:
    if spec.states != spec_prime.states:
        raise SpecMismatch("specs have different state lists")
    if not np.array_equal(spec.target, spec_prime.target):
        raise SpecMismatch("specs have different targets")
    if not np.array_equal(spec.proposal, spec_prime.proposal):
        raise SpecMismatch("specs have different proposals")


def weight_couplings(spec: PmChainSpec, spec_prime: PmChainSpec) -> dict[str, Coupling]:
    """Martingale coupling of Q_x and Q'_x per state; all unordered states are reported."""
    _require_shared(spec, spec_prime)

    def couple(x):
        try:
            return couplings.martingale_coupling(spec.weight_kernels[x], spec_prime.weight_kernels[x])
        except NotOrdered:
            return None

    results = fan_out(list(spec.states), couple)
    failing = [x for x, c in results.items() if c is None]
    if failing:
        raise NotOrderedWeights(failing)
    return results


def _check_couplings(spec, spec_prime, R: Mapping[str, Coupling]) -> None:
    if set(R) != set(spec.states):
        raise CouplingInvalid("weight couplings must be keyed by exactly the states")
    for x in spec.states:
        c = R[x]
        if c.source != spec.weight_kernels[x] or c.target != spec_prime.weight_kernels[x]:
            raise CouplingInvalid(f"coupling of {x!r} does not have the weight laws as marginals")
        report = couplings.verify_martingale(c)
        if not report.passes:
            raise CouplingInvalid(f"coupling of {x!r} is not a martingale coupling "
                                  f"(drift {report.drift_residual:.3g}, marginals {report.marginal_residual:.3g})")


def build_breve_kernels(spec: PmChainSpec, spec_prime: PmChainSpec,
                        R: Mapping[str, Coupling] | None = None) -> BreveChains:
    """Kernels on (x, w, v) triples sharing the law pi(x) R_x(w, v) v.

    Without ``R`` the deterministic martingale coupling of each pair of weight
    laws is used.
    """
    _require_shared(spec, spec_prime)
    if R is None:
        R = weight_couplings(spec, spec_prime)
    _check_couplings(spec, spec_prime, R)
    r = acceptance_ratio(spec)

    states, law, blocks = [], [], []
    for i, x in enumerate(spec.states):
        c = R[x]
        rows, cols = np.nonzero(c.plan > 0)
        w = c.source.points[rows, 0]
        v = c.target.points[cols, 0]
        mass = c.plan[rows, cols]
        blocks.append((i, w, v, mass))
        states.extend((x, float(a), float(b)) for a, b in zip(w, v))
        law.append(spec.target[i] * mass * v)
    offsets = np.cumsum([0] + [b[1].size for b in blocks])
    size = offsets[-1]
    T, T_prime = np.zeros((size, size)), np.zeros((size, size))
    for i, w, v, _ in blocks:
        rows = slice(offsets[i], offsets[i + 1])
        for j, u, t, mass in blocks:
            if spec.proposal[i, j] == 0:
                continue
            cols = slice(offsets[j], offsets[j + 1])
            move = spec.proposal[i, j] * mass[None, :]
            T[rows, cols] += move * (t / u)[None, :] * np.minimum(1.0, r[i, j] * u[None, :] / w[:, None])
            T_prime[rows, cols] += move * np.minimum(1.0, r[i, j] * t[None, :] / v[:, None])
    law = np.concatenate(law)
    breve = BreveChains(breve=_finish(states, T, law), breve_prime=_finish(states, T_prime, law))
    logger.debug("breve kernels over %d triples", size)
    return breve


def breve_marginal_residuals(spec: PmChainSpec, spec_prime: PmChainSpec, breve: BreveChains) -> BreveResiduals:
    """How far the coupled kernels are from projecting onto K and K'."""
    K, K_prime = build_pm_kernel(spec), build_pm_kernel(spec_prime)
    pair, pair_prime = K.index(), K_prime.index()
    triples = breve.breve.states
    to_w = np.zeros((len(triples), K.size))
    to_v = np.zeros((len(triples), K_prime.size))
    for a, (x, w, v) in enumerate(triples):
        to_w[a, pair[(x, w)]] = 1.0
        to_v[a, pair_prime[(x, v)]] = 1.0

    law = breve.breve.law
    law_w = float(np.max(np.abs(law @ to_w - K.law)))
    law_v = float(np.max(np.abs(law @ to_v - K_prime.law)))
    kernel_w = float(np.max(np.abs(breve.breve.matrix @ to_w - to_w @ K.matrix)))
    kernel_v = float(np.max(np.abs(breve.breve_prime.matrix @ to_v - to_v @ K_prime.matrix)))
    return BreveResiduals(
        reversibility=stationary_check(breve.breve),
        reversibility_prime=stationary_check(breve.breve_prime),
        law_w=law_w, law_v=law_v, kernel_w=kernel_w, kernel_v=kernel_v,
    )


def state_function(spec: PmChainSpec, f) -> Callable[[tuple], float]:
    if callable(f):
        return lambda state: f(state[0])
    if isinstance(f, Mapping):
        return lambda state: f[state[0]]
    values = np.asarray(f, dtype=np.float64).reshape(-1)
    if values.size != spec.size:
        raise InvalidSpec(f"function has {values.size} values for {spec.size} states")
    position = {x: k for k, x in enumerate(spec.states)}
    return lambda state: values[position[state[0]]]


def compare_variances(spec: PmChainSpec, spec_prime: PmChainSpec, f) -> VarianceComparison:
    """Exact sigma^2 of f(x, w) = f(x) under K and K'.

    Requires Q_x <=cx Q'_x at every state; then sigma^2 <= sigma'^2 is expected.
    """
    _require_shared(spec, spec_prime)
    failing = [x for x in spec.states
               if not orders.check_order(spec.weight_kernels[x], spec_prime.weight_kernels[x],
                                         OrderKind.CX).holds]
    if failing:
        raise NotOrderedWeights(failing)
    g = state_function(spec, f)
    K, K_prime = build_pm_kernel(spec), build_pm_kernel(spec_prime)
    sigma2 = asymptotic_variance(K, g)
    sigma2_prime = asymptotic_variance(K_prime, g)
    ordered = sigma2 <= sigma2_prime + _ORDERING_SLACK
    logger.info("asymptotic variances %.12g vs %.12g (%s)", sigma2, sigma2_prime,
                "ordered" if ordered else "NOT ordered")
    return VarianceComparison(sigma2=sigma2, sigma2_prime=sigma2_prime, ordered=ordered,
                              gap=sigma2_prime - sigma2, residual=stationary_check(K),
                              residual_prime=stationary_check(K_prime))


def simulate(cm: ChainMatrix, f, n: int, seed: int | None = None) -> SimulationResult:
    """Run the chain from its invariant law and average f along the path.

    The batch-means estimate of sigma^2 uses floor(sqrt(n)) steps per batch.
    """
    if n < 1:
        raise InvalidSpec("number of steps must be positive")
    _support(cm)
    values = lift(cm, f)
    seed = config.DEFAULT_SEED if seed is None else seed
    rng = np.random.default_rng(seed)
    cumulative = np.cumsum(cm.matrix, axis=1)
    cumulative[:, -1] = 1.0
    start = np.cumsum(cm.law)
    start[-1] = 1.0

    draws = rng.random(n)
    path = np.empty(n, dtype=np.int64)
    state = int(np.searchsorted(start, rng.random(), side="right"))
    for k in range(n):
        path[k] = state
        state = int(np.searchsorted(cumulative[state], draws[k], side="right"))

    fx = values[path]
    running = np.cumsum(fx) / np.arange(1, n + 1)
    batch = max(1, int(np.sqrt(n)))
    batches = n // batch
    if batches >= 2:
        means = fx[:batches * batch].reshape(batches, batch).mean(axis=1)
        batch_variance = float(batch * np.var(means, ddof=1))
    else:
        batch_variance = 0.0
    logger.debug("simulated %d steps (seed %d)", n, seed)
    return SimulationResult(average=float(fx.mean()), batch_variance=batch_variance,
                            running_average=running, path=path)
