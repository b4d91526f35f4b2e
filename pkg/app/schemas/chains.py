from typing import Dict, List, Optional, Union

from pydantic import BaseModel, Field

from app.models.chain import PmChainSpec, ChainMatrix
from app.schemas.measures import MeasureSchema, CouplingSchema
from app.services import pm_mcmc


class ChainSpecSchema(BaseModel):
    states: List[str] = Field(..., min_length=1, description="State labels")
    target: List[float] = Field(..., description="Target probability of each state")
    proposal: List[List[float]] = Field(..., description="Row-stochastic proposal matrix")
    weights: Dict[str, MeasureSchema] = Field(..., description="Weight law per state: positive support, mean 1")

    def to_model(self) -> PmChainSpec:
        return pm_mcmc.new_spec(self.states, self.target, self.proposal,
                                {x: m.to_model() for x, m in self.weights.items()})

    @classmethod
    def from_model(cls, spec: PmChainSpec) -> "ChainSpecSchema":
        return cls(states=list(spec.states), target=spec.target.tolist(), proposal=spec.proposal.tolist(),
                   weights={x: MeasureSchema.from_model(spec.weight_kernels[x]) for x in spec.states})


StateFunction = Union[List[float], Dict[str, float]]


class PmInputSchema(BaseModel):
    spec: ChainSpecSchema = Field(..., description="Pseudo-marginal setup")
    spec_prime: Optional[ChainSpecSchema] = Field(None, description="Same setup with more dispersed weights")
    couplings: Optional[Dict[str, CouplingSchema]] = Field(
        None, description="Martingale coupling of the two weight laws at each state")
    f: Optional[StateFunction] = Field(None, description="Function of the state, by position or by label")


class ChainMatrixSchema(BaseModel):
    states: List[List[Union[str, float]]] = Field(..., description="Augmented states: [x, w] or [x, w, v]")
    matrix: List[List[float]] = Field(..., description="Row-stochastic transition matrix")
    law: List[float] = Field(..., description="Invariant law")

    @classmethod
    def from_model(cls, cm: ChainMatrix) -> "ChainMatrixSchema":
        states = [list(s) if isinstance(s, tuple) else [s] for s in cm.states]
        return cls(states=states, matrix=cm.matrix.tolist(), law=cm.law.tolist())


class SimulateInputSchema(BaseModel):
    spec: Optional[ChainSpecSchema] = Field(None, description="Pseudo-marginal setup to simulate")
    matrix: Optional[List[List[float]]] = Field(None, description="Bare transition matrix to simulate instead")
    law: Optional[List[float]] = Field(None, description="Invariant law of the bare matrix")
    f: StateFunction = Field(..., description="Function of the state (of the matrix row for a bare matrix)")
