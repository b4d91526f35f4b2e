"""Command router: one handler per subcommand, JSON report on stdout.

Handlers return ``(report, exit_code)``. Domain errors are caught once in
``run`` and written as an ErrorReport carrying the error's exit code.
"""
import argparse
import logging
import sys

import numpy as np

from app.core.config import config, overridden
from app.core.exceptions import AppException, InputError, EXIT_OK, EXIT_PREDICATE_FALSE, EXIT_ERROR
from app.core.logging import setup_logging
from app.enum import OrderKind, FamilyKind, CostName
from app.models.coupling import PathMeasure
from app.schemas.chains import ChainSpecSchema, ChainMatrixSchema, PmInputSchema, SimulateInputSchema
from app.schemas.kernels import KernelSchema, CouplingKernelSchema, ConditionalInputSchema, ComposeInputSchema
from app.schemas.measures import (
    MeasureSchema, MeasurePairSchema, CouplingSchema, FamilyMemberSchema, TestFamilySchema,
)
from app.schemas.reports import (
    REPORTS, OrderVerdictReport, VerificationReport, CouplingReport, PathReport, PointwisePathReport,
    ConditionalReport, ConditionalResidualsSchema, W1Report, TransportReport, ParametricTransportReport,
    ChainReport, BreveResidualsSchema, VarianceReport, SimulationReport, ScreenReport, GenReport, ErrorReport,
    WitnessSchema,
)
from app.schemas.transport import TransportInputSchema
from app.services import (
    couplings, generators, kernels, mot, orders, pm_mcmc, wasserstein,
)
from app.utils import load_document, write_report

logger = logging.getLogger(__name__)


def _verdict_code(holds: bool) -> int:
    return EXIT_OK if holds else EXIT_PREDICATE_FALSE


def _load_pair(args):
    """Either one {"mu", "nu"} document or two measure documents."""
    if args.target is not None:
        return (load_document(args.input, MeasureSchema).to_model(),
                load_document(args.target, MeasureSchema).to_model())
    pair = load_document(args.input, MeasurePairSchema)
    return pair.mu.to_model(), pair.nu.to_model()


# Measures and couplings

def check_order_command(args):
    mu, nu = _load_pair(args)
    kind = OrderKind(args.kind)
    verdict = orders.check_order(mu, nu, kind, method=args.method)
    return OrderVerdictReport.from_model(kind, verdict), _verdict_code(verdict.holds)


def couple_command(args):
    mu, nu = _load_pair(args)
    kind = OrderKind(args.kind)
    intermediate = None
    if kind == OrderKind.ICX:
        decomposition = couplings.icx_decompose(mu, nu)
        c = decomposition.coupling
        intermediate = MeasureSchema.from_model(decomposition.intermediate)
    else:
        c = couplings.martingale_coupling(mu, nu)
    check = couplings.verify(c, kind)
    report = CouplingReport(kind=kind, coupling=CouplingSchema.from_model(c),
                            verification=VerificationReport.from_model(check), intermediate=intermediate)
    return report, _verdict_code(check.passes)


def verify_command(args):
    c = load_document(args.input, CouplingSchema).to_model()
    check = couplings.verify(c, OrderKind(args.kind), args.tol)
    return VerificationReport.from_model(check), _verdict_code(check.passes)


def _path_report(path: PathMeasure) -> PathReport:
    residuals = couplings.path_residuals(path)
    return PathReport(kind=path.kind, steps=[MeasureSchema.from_model(m) for m in path.steps],
                      kernels=[k.rows.tolist() for k in path.kernels],
                      marginal_residuals=list(residuals.marginal), drift_residuals=list(residuals.drift))


def compose_command(args):
    doc = load_document(args.input, ComposeInputSchema)
    kind = OrderKind(args.kind)
    if doc.kernels is not None:
        paths = kernels.sequence_pointwise_coupling([k.to_model() for k in doc.kernels], kind)
        return PointwisePathReport(kind=kind, paths={label: _path_report(p) for label, p in paths.items()}), EXIT_OK
    if doc.measures is None:
        raise InputError(f"{args.input}: expected 'measures' or 'kernels'")
    path = couplings.compose_chain([m.to_model() for m in doc.measures], kind)
    return _path_report(path), EXIT_OK


def conditional_command(args):
    doc = load_document(args.input, ConditionalInputSchema)
    kind = OrderKind(args.kind)
    P, Q, law = doc.P.to_model(), doc.Q.to_model(), doc.law()
    result = kernels.check_conditional(P, Q, law, kind)
    report = ConditionalReport(
        kind=kind, holds=result.holds,
        pointwise={label: OrderVerdictReport.from_model(kind, v) for label, v in result.pointwise.verdicts.items()},
        vacuous=list(result.pointwise.vacuous),
        mixture=OrderVerdictReport.from_model(kind, result.mixture),
    )
    if result.holds:
        R = kernels.pointwise_coupling(P, Q, kind, law)
        joint = kernels.assemble_conditional(law, R)
        report.couplings = CouplingKernelSchema.from_model(R)
        report.residuals = ConditionalResidualsSchema.from_model(kernels.conditional_residuals(joint))
    return report, _verdict_code(result.holds)


# Distances and transport

def w1_command(args):
    mu, nu = _load_pair(args)
    value, plan = wasserstein.w1_lp(mu, nu)
    report = W1Report(value=value, coupling=CouplingSchema.from_model(plan))
    if mu.dim == 1:
        report.univariate_value = wasserstein.w1_univariate(mu, nu)
    if args.family_count:
        family = orders.generate_family(FamilyKind.LIPSCHITZ_MIN, count=args.family_count, seed=args.seed,
                                        dim=mu.dim, box=wasserstein.support_box(mu, nu))
        report.dual_lower_bound = wasserstein.dual_lower_bound(mu, nu, family)
    return report, EXIT_OK


def _transport(args, martingale: bool):
    doc = load_document(args.input, TransportInputSchema)
    cost = doc.cost(args.cost)
    if doc.P is not None and doc.Q is not None:
        if not martingale:
            raise InputError("parametric transport is only offered for the martingale problem")
        results = mot.mot_parametric(doc.P.to_model(), doc.Q.to_model(), cost)
        entries = {label: TransportReport(martingale=True, cost=cost.name, value=r.value,
                                          plan=CouplingSchema.from_model(r.plan))
                   for label, r in results.items()}
        return ParametricTransportReport(martingale=True, cost=cost.name, results=entries), EXIT_OK
    if doc.mu is None or doc.nu is None:
        raise InputError(f"{args.input}: expected 'mu' and 'nu', or 'P' and 'Q'")
    solve = mot.mot_solve if martingale else mot.ot_solve
    result = solve(doc.mu.to_model(), doc.nu.to_model(), cost)
    return TransportReport(martingale=martingale, cost=cost.name, value=result.value,
                           plan=CouplingSchema.from_model(result.plan)), EXIT_OK


def mot_command(args):
    return _transport(args, martingale=True)


def ot_command(args):
    return _transport(args, martingale=False)


# Pseudo-marginal chains

def pm_build_command(args):
    doc = load_document(args.input, PmInputSchema)
    spec = doc.spec.to_model()
    K = pm_mcmc.build_pm_kernel(spec)
    report = ChainReport(kernel=ChainMatrixSchema.from_model(K), reversibility=pm_mcmc.stationary_check(K))
    if doc.spec_prime is not None:
        spec_prime = doc.spec_prime.to_model()
        R = None if doc.couplings is None else {x: c.to_model() for x, c in doc.couplings.items()}
        breve = pm_mcmc.build_breve_kernels(spec, spec_prime, R)
        report.breve = ChainMatrixSchema.from_model(breve.breve)
        report.breve_prime = ChainMatrixSchema.from_model(breve.breve_prime)
        report.breve_residuals = BreveResidualsSchema.from_model(
            pm_mcmc.breve_marginal_residuals(spec, spec_prime, breve))
    return report, EXIT_OK


def pm_compare_command(args):
    doc = load_document(args.input, PmInputSchema)
    if doc.spec_prime is None or doc.f is None:
        raise InputError(f"{args.input}: pm-compare needs 'spec_prime' and 'f'")
    comparison = pm_mcmc.compare_variances(doc.spec.to_model(), doc.spec_prime.to_model(), doc.f)
    return VarianceReport.from_model(comparison), _verdict_code(comparison.ordered)


def simulate_command(args):
    doc = load_document(args.input, SimulateInputSchema)
    if doc.spec is not None:
        spec = doc.spec.to_model()
        cm = pm_mcmc.build_pm_kernel(spec)
        f = pm_mcmc.state_function(spec, doc.f)
    elif doc.matrix is not None:
        cm = pm_mcmc.chain_from_matrix(doc.matrix, doc.law)
        if isinstance(doc.f, dict):
            raise InputError(f"{args.input}: f must be a list for a bare matrix")
        f = doc.f
    else:
        raise InputError(f"{args.input}: expected 'spec' or 'matrix'")
    seed = config.DEFAULT_SEED
    result = pm_mcmc.simulate(cm, f, args.steps, seed)
    values = pm_mcmc.lift(cm, f)
    report = SimulationReport.from_model(result, seed, float(cm.law @ values), pm_mcmc.asymptotic_variance(cm, f))
    return report, EXIT_OK


# Instances and screens

def gen_command(args):
    kind = OrderKind(args.kind)
    seed = config.DEFAULT_SEED
    ordered = not args.broken
    if args.broken and args.what != "pair":
        raise InputError("--broken only applies to --what pair")
    if args.what == "pair":
        draw = generators.broken_pair if args.broken else generators.spread_pair
        mu, nu = draw(kind, args.atoms, args.dim, seed)
        instance = MeasurePairSchema(mu=MeasureSchema.from_model(mu), nu=MeasureSchema.from_model(nu))
    elif args.what == "chain":
        chain = generators.spread_chain(kind, args.length, args.atoms, args.dim, seed)
        instance = ComposeInputSchema(measures=[MeasureSchema.from_model(m) for m in chain])
    elif args.what == "kernel":
        P, Q, law = generators.kernel_pair(kind, args.labels, args.atoms, args.dim, seed)
        instance = ConditionalInputSchema(P=KernelSchema.from_model(P), Q=KernelSchema.from_model(Q), theta_law=law)
    else:
        spec, spec_prime = generators.pm_spec_pair(args.states, seed=seed)
        f = np.random.default_rng(seed).integers(-4, 5, size=spec.size).astype(float).tolist()
        instance = PmInputSchema(spec=ChainSpecSchema.from_model(spec),
                                 spec_prime=ChainSpecSchema.from_model(spec_prime), f=f)
        kind = None
    report = GenReport(what=args.what, seed=seed, kind=kind, ordered=ordered,
                       instance=instance.model_dump(mode="json", exclude_none=True))
    return report, EXIT_OK


def screen_command(args):
    mu, nu = _load_pair(args)
    if args.family_file:
        family = load_document(args.family_file, TestFamilySchema).to_model()
        if family.dim != mu.dim:
            raise InputError(f"family has dimension {family.dim} but the measures have dimension {mu.dim}")
    else:
        family_kind = FamilyKind(args.family) if args.family else (
            FamilyKind.MAX_AFFINE if OrderKind(args.kind) == OrderKind.CX else FamilyKind.MAX_AFFINE_INCREASING)
        family = orders.generate_family(family_kind, count=args.count, max_pieces=args.pieces,
                                        seed=config.DEFAULT_SEED, dim=mu.dim, box=wasserstein.support_box(mu, nu))
    verdict = orders.screen_order(mu, nu, family)
    report = ScreenReport(family=family.kind, count=len(family), seed=family.seed, holds=verdict.holds)
    if args.show_family:
        report.family_document = TestFamilySchema.from_model(family)
    if verdict.witness is not None:
        report.witness = WitnessSchema.from_model(verdict.witness)
        report.member = FamilyMemberSchema.from_model(family.members[verdict.witness.member])
    return report, _verdict_code(verdict.holds)


def schema_command(args):
    return REPORTS[args.name].model_json_schema(), EXIT_OK


# Parser

def positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=positive_float, help="tolerance override for order decisions and the LP")
    common.add_argument("--seed", type=int, help="seed for every random procedure")
    common.add_argument("--workers", type=positive_int, help="threads for per-label work")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")

    kind = argparse.ArgumentParser(add_help=False)
    kind.add_argument("--kind", choices=[k.value for k in OrderKind], default=OrderKind.CX.value)

    parser = argparse.ArgumentParser(prog="convex-order",
                                     description="Convex orders, martingale couplings and transport on discrete measures")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, handler, help_text, *parents, input_file=True, pair=False):
        p = sub.add_parser(name, parents=[common, *parents], help=help_text)
        if input_file:
            p.add_argument("input", help="JSON input document ('-' for stdin)")
        if pair:
            p.add_argument("target", nargs="?", help="second measure document; INPUT then holds mu alone")
        p.set_defaults(handler=handler)
        return p

    p = add("check-order", check_order_command, "decide mu <= nu", kind, pair=True)
    p.add_argument("--method", choices=["auto", "lp"], default="auto")
    add("couple", couple_command, "build a (sub)martingale coupling", kind, pair=True)
    add("verify", verify_command, "re-verify a coupling document", kind)
    add("compose", compose_command, "chain couplings along a sequence of measures or kernels", kind)
    add("conditional", conditional_command, "conditional order given a parameter, with coupling", kind)
    p = add("w1", w1_command, "Wasserstein-1 distance", pair=True)
    p.add_argument("--family-count", type=positive_int, help="also report a Lipschitz-family lower bound")
    for name, handler in (("mot", mot_command), ("ot", ot_command)):
        p = add(name, handler, f"{'martingale' if name == 'mot' else 'classical'} optimal transport")
        p.add_argument("--cost", choices=[c.value for c in CostName], default=CostName.SQUARE.value)
    add("pm-build", pm_build_command, "pseudo-marginal kernel (and coupled kernels for a spec pair)")
    add("pm-compare", pm_compare_command, "exact asymptotic variances of a spec pair")
    p = add("simulate", simulate_command, "ergodic average along a simulated path")
    p.add_argument("--steps", type=positive_int, default=10_000)
    p = add("gen", gen_command, "generate a seeded instance", kind, input_file=False)
    p.add_argument("--what", choices=["pair", "kernel", "chain", "pm"], default="pair")
    p.add_argument("--atoms", type=positive_int, default=4)
    p.add_argument("--dim", type=positive_int, default=1)
    p.add_argument("--labels", type=positive_int, default=3)
    p.add_argument("--length", type=int, default=3)
    p.add_argument("--states", type=positive_int, default=3)
    p.add_argument("--broken", action="store_true", help="draw a pair that is NOT ordered")
    p = add("screen", screen_command, "look for a separating member of a test family", kind, pair=True)
    p.add_argument("--family", choices=[FamilyKind.MAX_AFFINE.value, FamilyKind.MAX_AFFINE_INCREASING.value])
    p.add_argument("--count", type=positive_int)
    p.add_argument("--pieces", type=positive_int)
    p.add_argument("--family-file", help="screen with the members of this family document")
    p.add_argument("--show-family", action="store_true", help="include the family document in the report")
    p = add("schema", schema_command, "print the JSON Schema of a report", input_file=False)
    p.add_argument("name", choices=sorted(REPORTS))
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = {0: None, 1: "INFO"}.get(args.verbose, "DEBUG")
    with overridden(tol=args.tol, seed=args.seed, workers=args.workers, log_level=level):
        setup_logging()
        try:
            report, code = args.handler(args)
        except AppException as exc:
            logger.info("%s: %s", type(exc).__name__, exc.detail)
            report, code = ErrorReport.from_exception(exc), exc.exit_code
        except Exception as exc:
            logger.exception("unexpected failure in %s", args.command)
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ERROR
        write_report(report, args.out)
        return code
