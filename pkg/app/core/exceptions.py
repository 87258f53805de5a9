"""Custom exceptions for the invariant manifold toolkit"""
from typing import Any, Optional, Dict, List, Sequence


class ToolkitException(Exception):
    """Base exception for the toolkit"""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        self.message = message
        self.details = details or {}
        super().__init__(self.message)


class NotFoundError(ToolkitException):
    """Resource not found"""
    pass


class ConfigurationError(ToolkitException):
    """Configuration file or preset error"""
    pass


class NumericError(ToolkitException):
    """Numerical computation error"""
    pass


class InvalidArgumentError(NumericError):
    """A numerical routine was called with arguments it cannot work with"""
    pass


class DomainException(ToolkitException):
    """Base class for domain-specific exceptions"""
    domain: str = "unknown"

    def __init__(self, message: str, details: dict = None):
        super().__init__(message=message, details=details)


# Problem exceptions
class ProblemException(DomainException):
    domain = "problem"


class DimensionMismatchError(ProblemException):
    def __init__(self, what: str, expected: Any, actual: Any):
        super().__init__(
            message=f"Dimension mismatch for {what}: expected {expected}, got {actual}",
            details={"what": what, "expected": expected, "actual": actual}
        )


class InvalidProblemError(ProblemException):
    def __init__(self, reason: str, **details: Any):
        super().__init__(
            message=f"Invalid problem: {reason}",
            details={"reason": reason, **details}
        )


class PresetNotFoundException(ProblemException):
    def __init__(self, name: str, available: List[str]):
        super().__init__(
            message=f"Preset {name} not found",
            details={"requested": name, "available": available}
        )


# Flow exceptions
class FlowException(DomainException):
    domain = "flow"


class NonFiniteStateError(FlowException):
    def __init__(self, stage: str, bad_coordinates: Sequence[int]):
        super().__init__(
            message=f"Non-finite state encountered in {stage}",
            details={"stage": stage, "coordinates": list(bad_coordinates)[:16]}
        )


# Manifold exceptions
class ManifoldException(DomainException):
    domain = "manifold"


class GridCoverageError(ManifoldException):
    def __init__(self, bounds: Sequence[Sequence[float]], support_radius: float):
        super().__init__(
            message=f"Grid bounds do not cover the support ball of radius {support_radius}",
            details={"bounds": [list(b) for b in bounds], "support_radius": support_radius}
        )


class UnsupportedDimensionError(ManifoldException):
    def __init__(self, split_index: int, max_supported: int):
        super().__init__(
            message=f"Grid sampling supports N <= {max_supported}, got N = {split_index}",
            details={"split_index": split_index, "max_supported": max_supported}
        )


# Shooting exceptions
class ShootingException(DomainException):
    domain = "shooting"


class ShootingDomainError(ShootingException):
    def __init__(self, horizon: int, p_norm: float):
        super().__init__(
            message=f"Shooting map overflow at horizon {horizon} (|p| = {p_norm:.3e})",
            details={"horizon": horizon, "p_norm": p_norm}
        )


# Estimates exceptions
class EstimateException(DomainException):
    domain = "estimates"


class InvalidRateInputError(EstimateException):
    def __init__(self, lambda1: float, lambda_n1: float, k1: float):
        super().__init__(
            message=(
                f"Rate constants need 0 < lambda1 < lambdaN1 and k1 >= 0 "
                f"(got lambda1={lambda1}, lambdaN1={lambda_n1}, k1={k1})"
            ),
            details={"lambda1": lambda1, "lambdaN1": lambda_n1, "k1": k1}
        )


# Analysis exceptions
class AnalysisException(DomainException):
    domain = "analysis"


class EmptyPointSetError(AnalysisException):
    def __init__(self, which: str):
        super().__init__(
            message=f"Point set {which} is empty",
            details={"which": which}
        )


class ProblemHashMismatchError(AnalysisException):
    def __init__(self, left: str, right: str):
        super().__init__(
            message=f"Manifolds belong to different problems ({left} vs {right})",
            details={"left": left, "right": right}
        )


# Experiment exceptions
class ExperimentException(DomainException):
    domain = "experiment"


class ConfigFileError(ExperimentException):
    def __init__(self, path: str, reason: str):
        super().__init__(
            message=f"Cannot load config {path}: {reason}",
            details={"path": path, "reason": reason}
        )
