from fractions import Fraction
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator

from app.core.config import config
from app.core.exceptions import CouplingInvalid, DimensionError, InputError
from app.enum import FamilyKind
from app.models.coupling import Coupling
from app.models.measure import DiscreteMeasure
from app.models.orders import TestFamily, MaxAffineMember, LipschitzMember
from app.services.measures import new_measure, as_points
from app.services.orders import generate_family


class MeasureSchema(BaseModel):
    points: List[List[float]] = Field(..., description="Support points, one d-vector per atom (bare numbers for d = 1)")
    weights: List[float] = Field(..., description="Atom probabilities, summing to 1")

    @field_validator("points", mode="before")
    @classmethod
    def wrap_scalars(cls, value):
        if isinstance(value, list):
            return [p if isinstance(p, list) else [p] for p in value]
        return value

    def to_model(self) -> DiscreteMeasure:
        return new_measure(self.points, self.weights)

    @classmethod
    def from_model(cls, m: DiscreteMeasure) -> "MeasureSchema":
        return cls(points=m.points.tolist(), weights=m.weights.tolist())


class MeasurePairSchema(BaseModel):
    mu: MeasureSchema = Field(..., description="Left measure")
    nu: MeasureSchema = Field(..., description="Right measure")


def _atom_index(m: DiscreteMeasure, points) -> np.ndarray:
    lookup = {tuple(p): k for k, p in enumerate(m.points.tolist())}
    return np.array([lookup.get(tuple(p), -1) for p in as_points(points).tolist()], dtype=np.int64)


class CouplingSchema(BaseModel):
    source: MeasureSchema = Field(..., description="First marginal")
    target: MeasureSchema = Field(..., description="Second marginal")
    plan: List[List[float]] = Field(..., description="plan[i][j] is the mass on (source atom i, target atom j)")

    def to_model(self) -> Coupling:
        """Realign the plan to the canonical atom order of both marginals."""
        mu, nu = self.source.to_model(), self.target.to_model()
        plan = np.asarray(self.plan, dtype=np.float64)
        shape = (len(self.source.points), len(self.target.points))
        if plan.shape != shape:
            raise DimensionError(f"plan has shape {plan.shape}, marginals need {shape}")
        if not np.all(np.isfinite(plan)) or np.any(plan < 0):
            raise CouplingInvalid("plan entries must be finite and nonnegative")
        rows, cols = _atom_index(mu, self.source.points), _atom_index(nu, self.target.points)
        if np.any(plan[rows < 0]) or np.any(plan[:, cols < 0]):
            raise CouplingInvalid("plan puts mass on a zero-weight atom")
        aligned = np.zeros((mu.size, nu.size))
        keep_r, keep_c = np.flatnonzero(rows >= 0), np.flatnonzero(cols >= 0)
        np.add.at(aligned, (rows[keep_r][:, None], cols[keep_c][None, :]), plan[np.ix_(keep_r, keep_c)])
        return Coupling(source=mu, target=nu, plan=aligned)

    @classmethod
    def from_model(cls, c: Coupling) -> "CouplingSchema":
        return cls(source=MeasureSchema.from_model(c.source), target=MeasureSchema.from_model(c.target),
                   plan=c.plan.tolist())


class FamilyMemberSchema(BaseModel):
    slopes: Optional[List[List[str]]] = Field(None, description="Affine slopes as exact fractions")
    intercepts: Optional[List[str]] = Field(None, description="Affine intercepts as exact fractions")
    offsets: Optional[List[str]] = Field(None, description="Cone offsets as exact fractions")
    anchors: Optional[List[List[str]]] = Field(None, description="Cone apexes as exact fractions")

    def to_model(self) -> MaxAffineMember | LipschitzMember:
        if self.slopes is not None and self.intercepts is not None:
            return MaxAffineMember(slopes=tuple(tuple(Fraction(a) for a in s) for s in self.slopes),
                                   intercepts=tuple(Fraction(b) for b in self.intercepts))
        if self.offsets is not None and self.anchors is not None:
            return LipschitzMember(offsets=tuple(Fraction(q) for q in self.offsets),
                                   anchors=tuple(tuple(Fraction(c) for c in y) for y in self.anchors))
        raise InputError("family member needs slopes and intercepts, or offsets and anchors")

    @classmethod
    def from_model(cls, member) -> "FamilyMemberSchema":
        if isinstance(member, MaxAffineMember):
            return cls(slopes=[[str(a) for a in s] for s in member.slopes],
                       intercepts=[str(b) for b in member.intercepts])
        return cls(offsets=[str(q) for q in member.offsets],
                   anchors=[[str(c) for c in y] for y in member.anchors])


class TestFamilySchema(BaseModel):
    """Either generator settings or the explicit members of a family."""
    __test__ = False

    kind: FamilyKind = Field(..., description="MaxAffine, MaxAffineIncreasing or LipschitzMin")
    dim: int = Field(1, ge=1, description="Dimension of the test functions")
    count: Optional[int] = Field(None, ge=1, description="Number of members (default FAMILY_COUNT)")
    max_pieces: Optional[int] = Field(None, ge=1, description="Pieces per member (default FAMILY_MAX_PIECES)")
    coeff_range: Optional[float] = Field(None, gt=0, description="Coefficient range (default COEFF_RANGE)")
    seed: Optional[int] = Field(None, description="Generator seed (default DEFAULT_SEED)")
    box: Optional[List[List[float]]] = Field(None, description="[lower corner, upper corner] for anchors")
    members: Optional[List[FamilyMemberSchema]] = Field(
        None, description="Explicit members; when present they are used instead of the generator")

    def to_model(self) -> TestFamily:
        if self.members is not None:
            members = tuple(m.to_model() for m in self.members)
            if not members:
                raise InputError("family has no members")
            widths = {len(s) for m in members for s in getattr(m, "slopes", getattr(m, "anchors", ()))}
            if widths - {self.dim}:
                raise DimensionError(f"family members have width(s) {sorted(widths)}, expected {self.dim}")
            seed = config.DEFAULT_SEED if self.seed is None else self.seed
            return TestFamily(kind=self.kind, dim=self.dim, seed=seed, members=members)
        box = None if self.box is None else (np.asarray(self.box[0]), np.asarray(self.box[1]))
        return generate_family(self.kind, self.count, self.max_pieces, self.coeff_range, self.seed,
                               dim=self.dim, box=box)

    @classmethod
    def from_model(cls, family: TestFamily) -> "TestFamilySchema":
        return cls(kind=family.kind, dim=family.dim, count=len(family), seed=family.seed,
                   members=[FamilyMemberSchema.from_model(m) for m in family.members])
