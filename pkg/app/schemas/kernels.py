from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from app.enum import OrderKind
from app.models.kernel import FiniteKernel, CouplingKernel
from app.schemas.measures import MeasureSchema, CouplingSchema
from app.services.kernels import new_kernel


class KernelSchema(BaseModel):
    measures: Dict[str, MeasureSchema] = Field(..., description="One measure per parameter label")

    def to_model(self) -> FiniteKernel:
        return new_kernel(list(self.measures), {label: m.to_model() for label, m in self.measures.items()})

    @classmethod
    def from_model(cls, P: FiniteKernel) -> "KernelSchema":
        return cls(measures={label: MeasureSchema.from_model(P[label]) for label in P.params})


class CouplingKernelSchema(BaseModel):
    kind: Optional[OrderKind] = Field(None, description="Order the per-label couplings witness")
    couplings: Dict[str, CouplingSchema] = Field(..., description="One coupling per parameter label")

    @classmethod
    def from_model(cls, R: CouplingKernel) -> "CouplingKernelSchema":
        return cls(kind=R.kind, couplings={label: CouplingSchema.from_model(R[label]) for label in R.params})


class ConditionalInputSchema(BaseModel):
    P: KernelSchema = Field(..., description="Kernel of the smaller side")
    Q: KernelSchema = Field(..., description="Kernel of the larger side")
    theta_law: Optional[Dict[str, float]] = Field(None, description="Law of the parameter; uniform when omitted")

    def law(self) -> Dict[str, float]:
        if self.theta_law is not None:
            return dict(self.theta_law)
        labels = sorted(self.P.measures)
        return {label: 1.0 / len(labels) for label in labels}


class ComposeInputSchema(BaseModel):
    measures: Optional[List[MeasureSchema]] = Field(None, min_length=2, description="Measures to chain, in order")
    kernels: Optional[List[KernelSchema]] = Field(None, min_length=2, description="Kernels to chain label by label")
