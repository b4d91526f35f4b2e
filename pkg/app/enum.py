from enum import Enum


class OrderKind(str, Enum):
    CX = "cx"
    ICX = "icx"


class LpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


class RowSense(str, Enum):
    EQ = "="
    GE = ">="
    LE = "<="


class VerdictMethod(str, Enum):
    UNIVARIATE_BREAKPOINT = "UnivariateBreakpoint"
    LP_FEASIBILITY = "LpFeasibility"
    FAMILY_SCREEN = "FamilyScreen"


class FamilyKind(str, Enum):
    MAX_AFFINE = "MaxAffine"
    MAX_AFFINE_INCREASING = "MaxAffineIncreasing"
    LIPSCHITZ_MIN = "LipschitzMin"


class CostName(str, Enum):
    ABS = "abs"
    SQUARE = "square"
    FORWARD = "forward"
