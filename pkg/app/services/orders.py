"""Convex and increasing convex order decisions.

Univariate pairs have an exact finite test: t -> E|X - t| and t -> E(X - t)+
are piecewise linear with kinks only at support points, so comparing them on
the union of both supports (plus the mean, which fixes the tails) decides the
order. In higher dimension no such parametrisation exists and the order is
decided by feasibility of the (sub)martingale coupling LP. Test families are
falsifiers only: a finite sample of convex functions can refute an order but
never prove it.
"""
import logging
from fractions import Fraction

import numpy as np

from app.core.config import config
from app.core.exceptions import NotOrdered, KindMismatch, InputError
from app.enum import OrderKind, VerdictMethod, FamilyKind
from app.models.measure import DiscreteMeasure
from app.models.orders import OrderVerdict, Witness, TestFamily, MaxAffineMember, LipschitzMember
from app.services import couplings
from app.services.measures import expect, mean, require_same_dim, require_univariate

logger = logging.getLogger(__name__)

FAMILY_ORDER = {
    FamilyKind.MAX_AFFINE: OrderKind.CX,
    FamilyKind.MAX_AFFINE_INCREASING: OrderKind.ICX,
}


def _breakpoints(mu: DiscreteMeasure, nu: DiscreteMeasure) -> np.ndarray:
    return np.union1d(mu.points[:, 0], nu.points[:, 0])


def _breakpoint_table(m: DiscreteMeasure, t: np.ndarray, test: str) -> np.ndarray:
    shifted = m.points[:, 0][:, None] - t[None, :]
    values = np.abs(shifted) if test == "abs" else np.maximum(shifted, 0.0)
    return m.weights @ values


def _univariate(mu: DiscreteMeasure, nu: DiscreteMeasure, kind: OrderKind, tol: float | None) -> OrderVerdict:
    require_univariate(mu, nu)
    tol = config.ORDER_TOL if tol is None else tol
    method = VerdictMethod.UNIVARIATE_BREAKPOINT
    mean_gap = float(mean(mu)[0] - mean(nu)[0])
    if kind == OrderKind.CX and abs(mean_gap) > tol:
        sign = 1 if mean_gap > 0 else -1
        return OrderVerdict(holds=False, method=method,
                            witness=Witness(test="mean", gap=abs(mean_gap), coordinate=0, sign=sign))
    if kind == OrderKind.ICX and mean_gap > tol:
        return OrderVerdict(holds=False, method=method,
                            witness=Witness(test="mean", gap=mean_gap, coordinate=0, sign=1))

    test = "abs" if kind == OrderKind.CX else "plus"
    t = _breakpoints(mu, nu)
    gaps = _breakpoint_table(mu, t, test) - _breakpoint_table(nu, t, test)
    worst = int(np.argmax(gaps))
    if gaps[worst] > tol:
        return OrderVerdict(holds=False, method=method,
                            witness=Witness(test=test, gap=float(gaps[worst]), t=float(t[worst])))
    return OrderVerdict(holds=True, method=method)


def check_cx_univariate(mu: DiscreteMeasure, nu: DiscreteMeasure, tol: float | None = None) -> OrderVerdict:
    return _univariate(mu, nu, OrderKind.CX, tol)


def check_icx_univariate(mu: DiscreteMeasure, nu: DiscreteMeasure, tol: float | None = None) -> OrderVerdict:
    return _univariate(mu, nu, OrderKind.ICX, tol)


def _by_coupling(mu: DiscreteMeasure, nu: DiscreteMeasure, kind: OrderKind) -> OrderVerdict:
    require_same_dim(mu, nu)
    method = VerdictMethod.LP_FEASIBILITY
    try:
        c = couplings.coupling_for(kind, mu, nu)
    except NotOrdered as exc:
        return OrderVerdict(holds=False, method=method, witness=Witness(test="lp_gap", gap=exc.gap))
    return OrderVerdict(holds=True, method=method, coupling=c)


def check_cx(mu: DiscreteMeasure, nu: DiscreteMeasure) -> OrderVerdict:
    return _by_coupling(mu, nu, OrderKind.CX)


def check_icx(mu: DiscreteMeasure, nu: DiscreteMeasure) -> OrderVerdict:
    return _by_coupling(mu, nu, OrderKind.ICX)


def check_order(mu: DiscreteMeasure, nu: DiscreteMeasure, kind: OrderKind, method: str = "auto") -> OrderVerdict:
    """Dispatch on kind; ``method="auto"`` uses the breakpoint test when d = 1."""
    kind = OrderKind(kind)
    if method == "auto" and mu.dim == 1 and nu.dim == 1:
        return _univariate(mu, nu, kind, None)
    return _by_coupling(mu, nu, kind)


# Test families

def _rational(rng: np.random.Generator, low: float, high: float) -> Fraction:
    den = config.RATIONAL_DENOMINATOR
    lo, hi = int(np.ceil(low * den)), int(np.floor(high * den))
    return Fraction(int(rng.integers(lo, hi + 1)), den)


def _snap(value: float) -> Fraction:
    den = config.RATIONAL_DENOMINATOR
    return Fraction(int(round(value * den)), den)


def _max_affine_member(rng, dim, pieces, coeff_range, lo, hi, increasing) -> MaxAffineMember:
    slopes, intercepts = [], []
    slope_low = 0.0 if increasing else -coeff_range
    for _ in range(pieces):
        anchor = [_rational(rng, lo[k], hi[k]) for k in range(dim)]
        alpha = tuple(_rational(rng, slope_low, coeff_range) for _ in range(dim))
        level = _rational(rng, -1.0, 1.0)
        # kink placed near the anchor, intercept kept on the rational grid
        beta = _snap(float(level - sum(a * x for a, x in zip(alpha, anchor))))
        slopes.append(alpha)
        intercepts.append(beta)
    return MaxAffineMember(slopes=tuple(slopes), intercepts=tuple(intercepts))


def _lipschitz_member(rng, dim, pieces, coeff_range, lo, hi) -> LipschitzMember:
    offsets, anchors = [], []
    for _ in range(pieces):
        offsets.append(_rational(rng, 0.0, coeff_range))
        anchors.append(tuple(_rational(rng, lo[k], hi[k]) for k in range(dim)))
    return LipschitzMember(offsets=tuple(offsets), anchors=tuple(anchors))


def generate_family(kind: FamilyKind, count: int | None = None, max_pieces: int | None = None,
                    coeff_range: float | None = None, seed: int | None = None, dim: int = 1,
                    box: tuple[np.ndarray, np.ndarray] | None = None) -> TestFamily:
    """Seeded family of rational test functions (denominators <= RATIONAL_DENOMINATOR).

    Members are drawn one after another from a single generator, so the family
    for ``count`` is a prefix of the family for any larger count.
    """
    kind = FamilyKind(kind)
    count = config.FAMILY_COUNT if count is None else count
    max_pieces = config.FAMILY_MAX_PIECES if max_pieces is None else max_pieces
    coeff_range = config.COEFF_RANGE if coeff_range is None else coeff_range
    seed = config.DEFAULT_SEED if seed is None else seed
    if count < 1 or max_pieces < 1:
        raise InputError("count and max_pieces must be positive")
    if box is None:
        lo, hi = np.full(dim, -float(coeff_range)), np.full(dim, float(coeff_range))
    else:
        lo, hi = np.asarray(box[0], dtype=np.float64), np.asarray(box[1], dtype=np.float64)

    rng = np.random.default_rng(seed)
    members = []
    for _ in range(count):
        pieces = int(rng.integers(1, max_pieces + 1))
        if kind == FamilyKind.LIPSCHITZ_MIN:
            members.append(_lipschitz_member(rng, dim, pieces, coeff_range, lo, hi))
        else:
            members.append(_max_affine_member(rng, dim, pieces, coeff_range, lo, hi,
                                              increasing=kind == FamilyKind.MAX_AFFINE_INCREASING))
    logger.debug("generated %d %s members (seed %d)", count, kind.value, seed)
    return TestFamily(kind=kind, dim=dim, seed=seed, members=tuple(members))


def expectation_gap(mu: DiscreteMeasure, nu: DiscreteMeasure, phi) -> float:
    return expect(mu, phi) - expect(nu, phi)


def family_gaps(mu: DiscreteMeasure, nu: DiscreteMeasure, family: TestFamily) -> np.ndarray:
    """E_mu(g) - E_nu(g) for every member g."""
    require_same_dim(mu, nu)
    return family.values(mu.points) @ mu.weights - family.values(nu.points) @ nu.weights


def screen_order(mu: DiscreteMeasure, nu: DiscreteMeasure, family: TestFamily,
                 kind: OrderKind | None = None, tol: float | None = None) -> OrderVerdict:
    """Look for a member phi with E_mu(phi) > E_nu(phi); holds=True only means none was found."""
    tol = config.ORDER_TOL if tol is None else tol
    if family.kind not in FAMILY_ORDER:
        raise KindMismatch(f"{family.kind.value} family cannot screen an order")
    if kind is not None and FAMILY_ORDER[family.kind] != OrderKind(kind):
        raise KindMismatch(f"{family.kind.value} family does not screen {OrderKind(kind).value}")
    gaps = family_gaps(mu, nu, family)
    worst = int(np.argmax(gaps))
    if gaps[worst] > tol:
        return OrderVerdict(holds=False, method=VerdictMethod.FAMILY_SCREEN,
                            witness=Witness(test="member", gap=float(gaps[worst]), member=worst))
    return OrderVerdict(holds=True, method=VerdictMethod.FAMILY_SCREEN)
