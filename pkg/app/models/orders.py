from dataclasses import dataclass, field
from functools import cached_property
from fractions import Fraction
from typing import TYPE_CHECKING

import numpy as np

from app.enum import FamilyKind, VerdictMethod

if TYPE_CHECKING:
    from app.models.coupling import Coupling


@dataclass(frozen=True)
class Witness:
    """Evidence that an order fails.

    ``test`` is one of "mean", "abs" (|x - t|), "plus" ((x - t)+), "lp_gap" or
    "member"; ``gap`` is E_mu(phi) - E_nu(phi) for test functions and the
    phase-one objective for "lp_gap".
    """
    test: str
    gap: float
    t: float | None = None
    member: int | None = None
    coordinate: int | None = None
    sign: int | None = None

    def describe(self) -> str:
        if self.test == "abs":
            return f"|x - {self.t!r}|"
        if self.test == "plus":
            return f"(x - {self.t!r})+"
        if self.test == "mean":
            prefix = "-" if self.sign == -1 else ""
            return f"{prefix}x[{self.coordinate or 0}]"
        if self.test == "member":
            return f"family member {self.member}"
        return "coupling LP infeasible"


@dataclass(frozen=True)
class OrderVerdict:
    holds: bool
    method: VerdictMethod
    witness: Witness | None = None
    coupling: "Coupling | None" = field(default=None, repr=False)


@dataclass(frozen=True)
class MaxAffineMember:
    """x -> max_k (alpha_k . x + beta_k)."""
    slopes: tuple[tuple[Fraction, ...], ...]
    intercepts: tuple[Fraction, ...]

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        alpha = np.array([[float(a) for a in s] for s in self.slopes])
        beta = np.array([float(b) for b in self.intercepts])
        return np.max(points @ alpha.T + beta, axis=1)


@dataclass(frozen=True)
class LipschitzMember:
    """x -> min_k (q_k + |x - y_k|), 1-Lipschitz for the Euclidean norm."""
    offsets: tuple[Fraction, ...]
    anchors: tuple[tuple[Fraction, ...], ...]

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        q = np.array([float(v) for v in self.offsets])
        y = np.array([[float(c) for c in a] for a in self.anchors])
        dist = np.linalg.norm(points[:, None, :] - y[None, :, :], axis=2)
        return np.min(q + dist, axis=1)


@dataclass(frozen=True)
class TestFamily:
    __test__ = False

    kind: FamilyKind
    dim: int
    seed: int
    members: tuple[MaxAffineMember | LipschitzMember, ...]

    def __len__(self) -> int:
        return len(self.members)

    @cached_property
    def _tables(self) -> tuple[np.ndarray, np.ndarray] | None:
        """Members padded to a common piece count; None for mixed families."""
        if all(isinstance(m, MaxAffineMember) for m in self.members):
            pieces = [(m.slopes, m.intercepts) for m in self.members]
            pad = -np.inf
        elif all(isinstance(m, LipschitzMember) for m in self.members):
            pieces = [(m.anchors, m.offsets) for m in self.members]
            pad = np.inf
        else:
            return None
        width = max(len(constants) for _, constants in pieces)
        vectors = np.zeros((len(pieces), width, self.dim))
        constants = np.full((len(pieces), width), pad)
        for k, (rows, values) in enumerate(pieces):
            vectors[k, :len(rows)] = [[float(c) for c in row] for row in rows]
            constants[k, :len(values)] = [float(v) for v in values]
        return vectors, constants

    def values(self, points: np.ndarray) -> np.ndarray:
        """Matrix of member values, shape (len(members), len(points))."""
        points = np.asarray(points, dtype=np.float64)
        if self._tables is None:
            return np.vstack([member.evaluate(points) for member in self.members])
        vectors, constants = self._tables
        if isinstance(self.members[0], MaxAffineMember):
            return np.max(np.einsum("mkd,pd->mkp", vectors, points) + constants[:, :, None], axis=1)
        dist = np.linalg.norm(points[None, None, :, :] - vectors[:, :, None, :], axis=3)
        return np.min(constants[:, :, None] + dist, axis=1)
