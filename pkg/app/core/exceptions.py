"""Error hierarchy. Every error carries the process exit code the CLI reports."""

EXIT_OK = 0
EXIT_PREDICATE_FALSE = 1
EXIT_ERROR = 2


class AppException(Exception):
    exit_code: int = EXIT_ERROR

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail

    def to_dict(self) -> dict:
        return {"error": type(self).__name__, "detail": self.detail}


# Validation and usage errors

class EmptySupport(AppException):
    pass


class WeightSumError(AppException):
    pass


class NonFiniteInput(AppException):
    pass


class NonFiniteValue(AppException):
    pass


class DimensionError(AppException):
    pass


DimensionMismatch = DimensionError


class IterationLimit(AppException):
    pass


class KindMismatch(AppException):
    pass


class ParamMismatch(AppException):
    pass


class CostBoundViolation(AppException):
    pass


class InvalidSpec(AppException):
    pass


class SpecMismatch(AppException):
    pass


class CouplingInvalid(AppException):
    pass


class Reducible(AppException):
    pass


class InputError(AppException):
    """Malformed input document; detail names the line or field."""


# Predicate failures

class NotOrdered(AppException):
    exit_code = EXIT_PREDICATE_FALSE

    def __init__(self, detail: str, gap: float = 0.0, step: int | None = None,
                 label: str | None = None):
        super().__init__(detail)
        self.gap = gap
        self.step = step
        self.label = label

    def to_dict(self) -> dict:
        payload = super().to_dict()
        payload["gap"] = self.gap
        if self.step is not None:
            payload["step"] = self.step
        if self.label is not None:
            payload["label"] = self.label
        return payload


class PerLabelFailure(AppException):
    exit_code = EXIT_PREDICATE_FALSE

    def __init__(self, failures: dict[str, NotOrdered]):
        labels = sorted(failures)
        super().__init__(f"{len(labels)} label(s) failed: {', '.join(labels)}")
        self.failures = {label: failures[label] for label in labels}

    @property
    def first(self) -> tuple[str, NotOrdered]:
        label = next(iter(self.failures))
        return label, self.failures[label]

    def to_dict(self) -> dict:
        payload = super().to_dict()
        payload["failures"] = {label: err.to_dict() for label, err in self.failures.items()}
        return payload


class NotOrderedWeights(AppException):
    exit_code = EXIT_PREDICATE_FALSE

    def __init__(self, states: list[str]):
        super().__init__(f"weight laws not in convex order at state(s): {', '.join(states)}")
        self.states = states

    def to_dict(self) -> dict:
        payload = super().to_dict()
        payload["states"] = self.states
        return payload
