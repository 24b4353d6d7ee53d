"""Exception and warning types shared across the package."""


class WhomogError(Exception):
    """Base class for all package errors."""


class MeshGenerationFailure(WhomogError):
    pass


class TopologyError(WhomogError):
    pass


class GeometryError(WhomogError):
    pass


class EvaluationError(WhomogError):
    pass


class ConsistencyError(WhomogError):
    pass


class SolverDivergence(WhomogError):
    pass


class SingularSystem(WhomogError):
    pass


class CertificateFailure(WhomogError):
    pass


class DomainMismatch(WhomogError):
    pass


class NonMonotoneConvergence(WhomogError):
    pass


class ParseError(WhomogError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(WhomogError):
    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class StabilityWarning(UserWarning):
    """Time step exceeds the explicit-reaction stability budget."""
