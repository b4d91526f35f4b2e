"""Seeded random instances for tests and the ``gen`` command.

Points live on the half-integer grid and weights are ratios of small integers,
so ordered instances sit well away from every tolerance. Each ordered instance
is re-checked before it is returned; a draw that fails the check is discarded
and redrawn from the same generator.
"""
import logging

import numpy as np

from app.core.config import config
from app.core.exceptions import InputError
from app.enum import OrderKind
from app.models.chain import PmChainSpec
from app.models.kernel import FiniteKernel
from app.models.measure import DiscreteMeasure
from app.services import orders, pm_mcmc
from app.services.kernels import new_kernel, fan_out
from app.services.measures import new_measure

logger = logging.getLogger(__name__)

_MAX_REDRAWS = 50
_GRID = 2


def _rng(seed: int | None) -> np.random.Generator:
    return np.random.default_rng(config.DEFAULT_SEED if seed is None else seed)


def _integer_weights(rng: np.random.Generator, size: int) -> np.ndarray:
    w = rng.integers(1, 9, size=size).astype(np.float64)
    return w / w.sum()


def random_measure(rng: np.random.Generator, atoms: int, dim: int = 1, radius: int = 5) -> DiscreteMeasure:
    """``atoms`` distinct half-integer points in [-radius, radius]^dim."""
    side = 2 * radius * _GRID + 1
    if atoms < 1 or dim < 1:
        raise InputError("atoms and dim must be positive")
    if atoms > side ** dim:
        raise InputError(f"only {side ** dim} grid points for {atoms} atoms")
    cells = rng.choice(side ** dim, size=atoms, replace=False)
    pts = np.stack(np.unravel_index(cells, (side,) * dim), axis=1) / _GRID - radius
    return new_measure(pts, _integer_weights(rng, atoms))


def _spread(rng: np.random.Generator, m: DiscreteMeasure, kind: OrderKind) -> DiscreteMeasure:
    """Split atoms symmetrically around themselves; icx also pushes new atoms upward.

    Each atom stays put with probability 1/4, but at least one atom is split.
    """
    keep = rng.random(m.size) < 0.25
    if keep.all():
        keep[rng.integers(m.size)] = False
    pts, w = [], []
    for x, p, stay in zip(m.points, m.weights, keep):
        if stay:
            pts.append(x)
            w.append(p)
            continue
        delta = rng.integers(-2 * _GRID, 2 * _GRID + 1, size=m.dim) / _GRID
        if not np.any(delta):
            delta[0] = 1.0
        for side in (x - delta, x + delta):
            shift = rng.integers(0, _GRID + 1, size=m.dim) / _GRID if kind == OrderKind.ICX else 0.0
            pts.append(side + shift)
            w.append(p / 2)
    return new_measure(np.array(pts), np.array(w))


def spread_pair(kind: OrderKind, atoms: int = 4, dim: int = 1,
                seed: int | None = None) -> tuple[DiscreteMeasure, DiscreteMeasure]:
    """(mu, nu) with mu <= nu in the given order."""
    kind = OrderKind(kind)
    rng = _rng(seed)
    for attempt in range(_MAX_REDRAWS):
        mu = random_measure(rng, atoms, dim)
        nu = _spread(rng, mu, kind)
        if orders.check_order(mu, nu, kind).holds:
            return mu, nu
        logger.debug("spread pair redrawn (attempt %d)", attempt + 1)
    raise InputError("could not draw an ordered pair")


def broken_pair(kind: OrderKind, atoms: int = 4, dim: int = 1,
                seed: int | None = None) -> tuple[DiscreteMeasure, DiscreteMeasure]:
    """(mu, nu) with mu <= nu failing: either mu is shifted up or the spread is reversed."""
    kind = OrderKind(kind)
    rng = _rng(seed)
    for attempt in range(_MAX_REDRAWS):
        mu = random_measure(rng, atoms, dim)
        nu = _spread(rng, mu, kind)
        if rng.random() < 0.5:
            shift = rng.integers(1, 2 * _GRID + 1, size=dim) / _GRID
            pair = (new_measure(mu.points + shift, mu.weights), nu)
        else:
            pair = (nu, mu)
        if not orders.check_order(*pair, kind).holds:
            return pair
        logger.debug("broken pair redrawn (attempt %d)", attempt + 1)
    raise InputError("could not draw an unordered pair")


def spread_chain(kind: OrderKind, length: int = 3, atoms: int = 3, dim: int = 1,
                 seed: int | None = None) -> list[DiscreteMeasure]:
    """Successive spreads m_1 <= m_2 <= ... <= m_length."""
    kind = OrderKind(kind)
    if length < 2:
        raise InputError("a chain needs at least two measures")
    rng = _rng(seed)
    chain = [random_measure(rng, atoms, dim)]
    for _ in range(_MAX_REDRAWS * length):
        nxt = _spread(rng, chain[-1], kind)
        if orders.check_order(chain[-1], nxt, kind).holds:
            chain.append(nxt)
        if len(chain) == length:
            return chain
    raise InputError("could not draw an ordered chain")


def kernel_pair(kind: OrderKind, labels: int = 3, atoms: int = 3, dim: int = 1,
                seed: int | None = None) -> tuple[FiniteKernel, FiniteKernel, dict[str, float]]:
    """Label-wise ordered kernels plus a rational theta law."""
    kind = OrderKind(kind)
    rng = _rng(seed)
    names = [f"t{k:02d}" for k in range(labels)]
    seeds = rng.integers(0, 2 ** 31, size=labels)
    pairs = {name: spread_pair(kind, atoms, dim, int(s)) for name, s in zip(names, seeds)}
    law = _integer_weights(rng, labels)
    P = new_kernel(names, {name: pairs[name][0] for name in names})
    Q = new_kernel(names, {name: pairs[name][1] for name in names})
    return P, Q, {name: float(p) for name, p in zip(names, law)}


def _weight_law(rng: np.random.Generator, atoms: int) -> DiscreteMeasure:
    pts = rng.integers(1, 9, size=atoms).astype(np.float64)
    w = _integer_weights(rng, atoms)
    return new_measure(pts / float(pts @ w), w)


def _positive_spread(rng: np.random.Generator, Q: DiscreteMeasure) -> DiscreteMeasure:
    """Split each weight w into w(1 - e) and w(1 + e), keeping the support positive."""
    pts, w = [], []
    for x, p in zip(Q.points[:, 0], Q.weights):
        e = rng.integers(1, 8) / 8
        pts += [x * (1 - e), x * (1 + e)]
        w += [p / 2, p / 2]
    return new_measure(pts, w)


def pm_spec_pair(states: int = 3, weight_atoms: int = 2,
                 seed: int | None = None) -> tuple[PmChainSpec, PmChainSpec]:
    """Pseudo-marginal setups sharing pi and q, with Q'_x a spread of Q_x at every state."""
    rng = _rng(seed)
    names = [f"x{k}" for k in range(states)]
    pi = _integer_weights(rng, states)
    q = np.vstack([_integer_weights(rng, states) for _ in range(states)])
    Q = {x: _weight_law(rng, int(rng.integers(1, weight_atoms + 1))) for x in names}
    Q_prime = {x: _positive_spread(rng, Q[x]) for x in names}
    for x in names:
        if not orders.check_order(Q[x], Q_prime[x], OrderKind.CX).holds:
            raise InputError(f"weight spread at {x} is not a convex-order spread")
    return pm_mcmc.new_spec(names, pi, q, Q), pm_mcmc.new_spec(names, pi, q, Q_prime)


def variance_trials(trials: int, functions: int = 5, states: int = 3,
                    seed: int | None = None) -> list:
    """Compare exact variances on random spec pairs and random functions of the state."""
    rng = _rng(seed)
    seeds = [int(s) for s in rng.integers(0, 2 ** 31, size=trials)]

    def trial(label: str):
        local = np.random.default_rng(seeds[int(label)])
        spec, spec_prime = pm_spec_pair(states, seed=seeds[int(label)])
        fs = local.integers(-4, 5, size=(functions, states)).astype(np.float64)
        return [pm_mcmc.compare_variances(spec, spec_prime, f) for f in fs]

    labels = [f"{k:04d}" for k in range(trials)]
    results = fan_out(labels, trial)
    return [c for label in labels for c in results[label]]
