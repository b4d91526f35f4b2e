"""Documents written to standard output by the command line."""
from typing import Dict, List, Optional, Any

from pydantic import BaseModel, Field

from app.core.exceptions import AppException
from app.enum import OrderKind, VerdictMethod, FamilyKind
from app.models import coupling as coupling_models
from app.models.chain import BreveResiduals, VarianceComparison, SimulationResult
from app.models.kernel import ConditionalResiduals
from app.models.orders import OrderVerdict, Witness
from app.schemas.chains import ChainMatrixSchema
from app.schemas.kernels import CouplingKernelSchema
from app.schemas.measures import CouplingSchema, MeasureSchema, FamilyMemberSchema, TestFamilySchema


class WitnessSchema(BaseModel):
    test: str = Field(..., description="mean, abs, plus, lp_gap or member")
    gap: float = Field(..., description="E_mu(phi) - E_nu(phi), or the phase-one infeasibility for lp_gap")
    t: Optional[float] = Field(None, description="Kink location of |x - t| or (x - t)+")
    member: Optional[int] = Field(None, description="Index of the separating family member")
    coordinate: Optional[int] = None
    sign: Optional[int] = None
    function: str = Field(..., description="Readable form of the separating function")

    @classmethod
    def from_model(cls, w: Witness) -> "WitnessSchema":
        return cls(test=w.test, gap=w.gap, t=w.t, member=w.member, coordinate=w.coordinate,
                   sign=w.sign, function=w.describe())


class OrderVerdictReport(BaseModel):
    kind: OrderKind
    holds: bool
    method: VerdictMethod
    witness: Optional[WitnessSchema] = None
    coupling: Optional[CouplingSchema] = Field(None, description="Certificate when decided by the coupling LP")

    @classmethod
    def from_model(cls, kind: OrderKind, v: OrderVerdict) -> "OrderVerdictReport":
        return cls(kind=kind, holds=v.holds, method=v.method,
                   witness=None if v.witness is None else WitnessSchema.from_model(v.witness),
                   coupling=None if v.coupling is None else CouplingSchema.from_model(v.coupling))


class VerificationReport(BaseModel):
    kind: OrderKind
    tol: float
    passes: bool
    marginal_residual: float
    drift_residual: float
    min_drift: float

    @classmethod
    def from_model(cls, r: coupling_models.VerificationReport) -> "VerificationReport":
        return cls(kind=r.kind, tol=r.tol, passes=r.passes, marginal_residual=r.marginal_residual,
                   drift_residual=r.drift_residual, min_drift=r.min_drift)


class CouplingReport(BaseModel):
    kind: OrderKind
    coupling: CouplingSchema
    verification: VerificationReport
    intermediate: Optional[MeasureSchema] = Field(
        None, description="Law of E[Y | X] for submartingale couplings")


class PathReport(BaseModel):
    kind: OrderKind
    steps: List[MeasureSchema] = Field(..., description="Marginals of the path")
    kernels: List[List[List[float]]] = Field(..., description="Transition rows between consecutive steps")
    marginal_residuals: List[float]
    drift_residuals: List[float]


class PointwisePathReport(BaseModel):
    kind: OrderKind
    paths: Dict[str, PathReport] = Field(..., description="One path law per parameter label")


class ConditionalResidualsSchema(BaseModel):
    x_theta: float
    y_theta: float
    drift: float
    passes: bool

    @classmethod
    def from_model(cls, r: ConditionalResiduals) -> "ConditionalResidualsSchema":
        return cls(x_theta=r.x_theta, y_theta=r.y_theta, drift=r.drift, passes=r.passes)


class ConditionalReport(BaseModel):
    kind: OrderKind
    holds: bool
    pointwise: Dict[str, OrderVerdictReport]
    vacuous: List[str] = Field(default_factory=list, description="Labels with zero parameter weight")
    mixture: OrderVerdictReport = Field(..., description="Unconditional order of the mixed laws")
    couplings: Optional[CouplingKernelSchema] = None
    residuals: Optional[ConditionalResidualsSchema] = None


class W1Report(BaseModel):
    value: float
    coupling: CouplingSchema = Field(..., description="Optimal plan for the Euclidean cost")
    univariate_value: Optional[float] = Field(None, description="CDF-area value, d = 1 only")
    dual_lower_bound: Optional[float] = Field(None, description="Best value over a Lipschitz family")


class TransportReport(BaseModel):
    martingale: bool
    cost: str
    value: float
    plan: CouplingSchema


class ParametricTransportReport(BaseModel):
    martingale: bool
    cost: str
    results: Dict[str, TransportReport]


class BreveResidualsSchema(BaseModel):
    reversibility: float
    reversibility_prime: float
    law_w: float
    law_v: float
    kernel_w: float
    kernel_v: float

    @classmethod
    def from_model(cls, r: BreveResiduals) -> "BreveResidualsSchema":
        return cls(reversibility=r.reversibility, reversibility_prime=r.reversibility_prime,
                   law_w=r.law_w, law_v=r.law_v, kernel_w=r.kernel_w, kernel_v=r.kernel_v)


class ChainReport(BaseModel):
    kernel: ChainMatrixSchema
    reversibility: float = Field(..., description="Largest detailed-balance violation")
    breve: Optional[ChainMatrixSchema] = None
    breve_prime: Optional[ChainMatrixSchema] = None
    breve_residuals: Optional[BreveResidualsSchema] = None


class VarianceReport(BaseModel):
    sigma2: float
    sigma2_prime: float
    ordered: bool
    gap: float = Field(..., description="sigma2_prime - sigma2")
    residual: float
    residual_prime: float

    @classmethod
    def from_model(cls, c: VarianceComparison) -> "VarianceReport":
        return cls(sigma2=c.sigma2, sigma2_prime=c.sigma2_prime, ordered=c.ordered, gap=c.gap,
                   residual=c.residual, residual_prime=c.residual_prime)


class SimulationReport(BaseModel):
    steps: int
    seed: int
    average: float
    batch_variance: float
    exact_mean: float
    exact_variance: float
    standard_error: float = Field(..., description="sqrt(exact_variance / steps)")

    @classmethod
    def from_model(cls, r: SimulationResult, seed: int, exact_mean: float, exact_variance: float):
        steps = int(r.path.size)
        return cls(steps=steps, seed=seed, average=r.average, batch_variance=r.batch_variance,
                   exact_mean=exact_mean, exact_variance=exact_variance,
                   standard_error=(exact_variance / steps) ** 0.5)


class ScreenReport(BaseModel):
    family: FamilyKind
    count: int
    seed: int
    holds: bool = Field(..., description="True only means no member separated the pair")
    witness: Optional[WitnessSchema] = None
    member: Optional[FamilyMemberSchema] = None
    family_document: Optional[TestFamilySchema] = Field(None, description="Members screened, when requested")


class GenReport(BaseModel):
    what: str
    seed: int
    kind: Optional[OrderKind] = None
    ordered: bool = Field(..., description="Whether the instance was drawn ordered")
    instance: Dict[str, Any] = Field(..., description="Input document for the matching subcommand")


class ErrorReport(BaseModel):
    error: str
    detail: str
    gap: Optional[float] = None
    step: Optional[int] = None
    label: Optional[str] = None
    states: Optional[List[str]] = None
    failures: Optional[Dict[str, "ErrorReport"]] = None

    @classmethod
    def from_exception(cls, exc: AppException) -> "ErrorReport":
        return cls.model_validate(exc.to_dict())


REPORTS = {
    model.__name__: model
    for model in (OrderVerdictReport, VerificationReport, CouplingReport, PathReport, PointwisePathReport,
                  ConditionalReport, W1Report, TransportReport, ParametricTransportReport, ChainReport,
                  VarianceReport, SimulationReport, ScreenReport, GenReport, ErrorReport)
}
