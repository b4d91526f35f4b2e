"""Parameter-indexed measures on finite label sets.

The parameter set is a finite list of labels, so measurability of a selection
reduces to determinism: every per-label result is a pure function of that
label's canonical measures, and results are merged in sorted label order.
Identical inputs therefore produce identical outputs regardless of the order
in which labels were supplied or of how the per-label work was scheduled.
"""
import logging
from collections.abc import Callable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from app.core.config import config
from app.core.exceptions import ParamMismatch, PerLabelFailure, NotOrdered, WeightSumError
from app.enum import OrderKind
from app.models.coupling import PathMeasure, IcxDecomposition
from app.models.kernel import (
    FiniteKernel, CouplingKernel, ConditionalCoupling, PointwiseReport, ConditionalOrderReport,
    ConditionalResiduals,
)
from app.models.measure import DiscreteMeasure
from app.services import couplings, orders
from app.services.measures import require_same_dim, mixture as mix_measures

logger = logging.getLogger(__name__)


def new_kernel(params: Sequence[str], measures: Mapping[str, DiscreteMeasure]) -> FiniteKernel:
    params = tuple(str(p) for p in params)
    if not params:
        raise ParamMismatch("kernel needs at least one label")
    if len(set(params)) != len(params):
        raise ParamMismatch("parameter labels must be unique")
    if set(params) != set(measures):
        raise ParamMismatch("measures must be keyed by exactly the parameter labels")
    require_same_dim(*(measures[p] for p in params))
    return FiniteKernel(params=params, measures={p: measures[p] for p in params})


def common_labels(*kernels: FiniteKernel) -> tuple[str, ...]:
    labels = set(kernels[0].params)
    for kernel in kernels[1:]:
        if set(kernel.params) != labels:
            raise ParamMismatch("kernels are indexed by different parameter labels")
    require_same_dim(*(k.measures[k.params[0]] for k in kernels))
    return tuple(sorted(labels))


def fan_out(labels: Sequence[str], work: Callable[[str], object]) -> dict[str, object]:
    """Run ``work`` per label, possibly on a thread pool; merge in label order."""
    if config.MAX_WORKERS > 1 and len(labels) > 1:
        with ThreadPoolExecutor(max_workers=config.MAX_WORKERS) as pool:
            results = dict(zip(labels, pool.map(work, labels)))
    else:
        results = {label: work(label) for label in labels}
    return {label: results[label] for label in labels}


def _positive_labels(labels, theta_law):
    if theta_law is None:
        return list(labels), ()
    _validate_theta_law(theta_law, labels)
    live = [label for label in labels if theta_law[label] > 0]
    return live, tuple(label for label in labels if theta_law[label] == 0)


def _validate_theta_law(theta_law: Mapping[str, float], labels: Sequence[str]) -> None:
    if set(theta_law) != set(labels):
        missing = sorted(set(labels) - set(theta_law))
        extra = sorted(set(theta_law) - set(labels))
        raise ParamMismatch(f"theta law does not match labels (missing {missing}, extra {extra})")
    weights = np.array([theta_law[label] for label in labels], dtype=np.float64)
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise WeightSumError("theta law weights must be finite and nonnegative")
    if abs(weights.sum() - 1.0) > config.WEIGHT_SUM_TOL:
        raise WeightSumError(f"theta law sums to {weights.sum()!r}, not 1")


def check_pointwise(P: FiniteKernel, Q: FiniteKernel, kind: OrderKind,
                    theta_law: Mapping[str, float] | None = None) -> PointwiseReport:
    """Order check per label; labels with zero theta weight are skipped as vacuous."""
    kind = OrderKind(kind)
    labels, vacuous = _positive_labels(common_labels(P, Q), theta_law)
    check = orders.check_cx if kind == OrderKind.CX else orders.check_icx
    verdicts = fan_out(labels, lambda label: check(P[label], Q[label]))
    report = PointwiseReport(verdicts=verdicts, vacuous=vacuous)
    logger.info("pointwise %s check over %d labels: %s", kind.value, len(labels),
                "holds" if report.holds else f"fails at {', '.join(report.failing)}")
    return report


def per_label(work: Callable[[str], object]) -> Callable[[str], object]:
    def run(label: str):
        try:
            return work(label)
        except NotOrdered as exc:
            exc.label = label
            return exc
    return run


def raise_failures(results: dict[str, object]) -> None:
    failures = {label: r for label, r in results.items() if isinstance(r, NotOrdered)}
    if failures:
        raise PerLabelFailure(failures)


def pointwise_coupling(P: FiniteKernel, Q: FiniteKernel, kind: OrderKind,
                       theta_law: Mapping[str, float] | None = None) -> CouplingKernel:
    """Per-label deterministic (sub)martingale couplings; all failing labels reported together.

    With ``theta_law``, labels of zero weight are left uncoupled.
    """
    kind = OrderKind(kind)
    labels, _ = _positive_labels(common_labels(P, Q), theta_law)
    results = fan_out(labels, per_label(lambda label: couplings.coupling_for(kind, P[label], Q[label])))
    raise_failures(results)
    return CouplingKernel(params=tuple(labels), couplings=results, kind=kind)


def assemble_conditional(theta_law: Mapping[str, float], R: CouplingKernel) -> ConditionalCoupling:
    """Joint law of (X, Y, theta); labels of ``theta_law`` that ``R`` does not couple must carry zero weight."""
    labels = sorted(theta_law)
    missing = sorted(set(R.params) - set(theta_law))
    if missing:
        raise ParamMismatch(f"theta law has no weight for coupled label(s): {', '.join(missing)}")
    _validate_theta_law(theta_law, labels)
    uncoupled = [label for label in labels if label not in R.couplings and theta_law[label] > 0]
    if uncoupled:
        raise ParamMismatch(f"no coupling for label(s) with positive weight: {', '.join(uncoupled)}")
    law = {label: float(theta_law[label]) for label in R.params if theta_law[label] > 0}
    vacuous = tuple(label for label in labels if theta_law[label] == 0)
    return ConditionalCoupling(theta_law=law, kernel=R, vacuous=vacuous)


def x_theta_marginal(cc: ConditionalCoupling) -> dict[str, np.ndarray]:
    """Mass of {X = x_i, theta} per label, from the joint law."""
    return {label: cc.theta_law[label] * cc.kernel[label].plan.sum(axis=1) for label in cc.params}


def y_theta_marginal(cc: ConditionalCoupling) -> dict[str, np.ndarray]:
    return {label: cc.theta_law[label] * cc.kernel[label].plan.sum(axis=0) for label in cc.params}


def x_marginal(cc: ConditionalCoupling) -> DiscreteMeasure:
    return mix_measures([cc.kernel[label].source for label in cc.params],
                        [cc.theta_law[label] for label in cc.params])


def y_marginal(cc: ConditionalCoupling) -> DiscreteMeasure:
    return mix_measures([cc.kernel[label].target for label in cc.params],
                        [cc.theta_law[label] for label in cc.params])


def conditional_drift(cc: ConditionalCoupling) -> dict[str, np.ndarray]:
    """E[Y | X = x_i, theta] - x_i for every atom and label."""
    out = {}
    for label in cc.params:
        c = cc.kernel[label]
        out[label] = couplings.conditional_means(couplings.conditional_kernel(c)) - c.source.points
    return out


def conditional_residuals(cc: ConditionalCoupling, tol: float | None = None) -> ConditionalResiduals:
    tol = config.ORDER_TOL if tol is None else tol
    x_res = max(float(np.max(np.abs(mass - cc.theta_law[label] * cc.kernel[label].source.weights)))
                for label, mass in x_theta_marginal(cc).items())
    y_res = max(float(np.max(np.abs(mass - cc.theta_law[label] * cc.kernel[label].target.weights)))
                for label, mass in y_theta_marginal(cc).items())
    drifts = conditional_drift(cc).values()
    if cc.kernel.kind == OrderKind.ICX:
        drift = max(float(max(0.0, -np.min(d))) for d in drifts)
    elif cc.kernel.kind == OrderKind.CX:
        drift = max(float(np.max(np.abs(d))) for d in drifts)
    else:
        drift = 0.0
    return ConditionalResiduals(x_theta=x_res, y_theta=y_res, drift=drift,
                                passes=max(x_res, y_res, drift) <= tol)


def sequence_pointwise_coupling(kernels: Sequence[FiniteKernel], kind: OrderKind) -> dict[str, PathMeasure]:
    kind = OrderKind(kind)
    labels = common_labels(*kernels)
    results = fan_out(labels, per_label(
        lambda label: couplings.compose_chain([k[label] for k in kernels], kind)))
    raise_failures(results)
    return results


def mixture(P: FiniteKernel, theta_law: Mapping[str, float]) -> DiscreteMeasure:
    """Unconditional law of X when Z ~ theta_law and X | Z = theta ~ P_theta."""
    _validate_theta_law(theta_law, P.params)
    labels = [label for label in sorted(P.params) if theta_law[label] > 0]
    return mix_measures([P[label] for label in labels], [theta_law[label] for label in labels])


def check_conditional(P: FiniteKernel, Q: FiniteKernel, theta_law: Mapping[str, float],
                      kind: OrderKind) -> ConditionalOrderReport:
    """Conditional order given the label, and the unconditional order it implies."""
    pointwise = check_pointwise(P, Q, kind, theta_law)
    return ConditionalOrderReport(
        pointwise=pointwise,
        mixture=orders.check_order(mixture(P, theta_law), mixture(Q, theta_law), kind, method="lp"),
    )


def pointwise_icx_decompose(P: FiniteKernel, Q: FiniteKernel) -> dict[str, IcxDecomposition]:
    labels = common_labels(P, Q)
    results = fan_out(labels, per_label(lambda label: couplings.icx_decompose(P[label], Q[label])))
    raise_failures(results)
    return results
