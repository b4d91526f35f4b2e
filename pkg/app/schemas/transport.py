from typing import List, Optional

from pydantic import BaseModel, Field

from app.models.transport import CostSpec
from app.schemas.kernels import KernelSchema
from app.schemas.measures import MeasureSchema
from app.services import mot


class TransportInputSchema(BaseModel):
    mu: Optional[MeasureSchema] = Field(None, description="Source marginal")
    nu: Optional[MeasureSchema] = Field(None, description="Target marginal")
    P: Optional[KernelSchema] = Field(None, description="Source marginals per label")
    Q: Optional[KernelSchema] = Field(None, description="Target marginals per label")
    cost_table: Optional[List[List[float]]] = Field(None, description="Explicit cost per atom pair, atoms in sorted order")
    lower_bound: float = Field(0.0, ge=0, description="C in c(x, y) >= -C(1 + |x| + |y|)")

    def cost(self, name: str) -> CostSpec:
        if self.cost_table is not None:
            return mot.table_cost(self.cost_table, self.lower_bound)
        return mot.builtin_cost(name)
