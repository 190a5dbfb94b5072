"""
Custom Exceptions for cql-switch

Error codes grouped by stage: CQ1xx parameters, CQ2xx expulsion,
CQ3xx transfer, CQ4xx attraction, CQ5xx integration and pipeline.
"""

from typing import Any, Dict, Optional


class CqlSwitchException(Exception):
    """Base exception for all cql-switch errors."""

    def __init__(self, message: str, error_code: str = None, details: dict = None):
        self.message = message
        self.error_code = error_code
        self.details = details or {}
        super().__init__(self.message)

    def __str__(self):
        if self.error_code:
            return f"[{self.error_code}] {self.message}"
        return self.message


class ParameterValidationError(CqlSwitchException):
    """Material or derived parameters violate an ordering or range constraint."""
    pass


class PoleError(CqlSwitchException):
    """Latitudinal control evaluated at a pole of the sphere (v1 = v2 = 0)."""
    pass


class TargetUnreachableError(CqlSwitchException):
    """Target latitude cannot be reached by the expulsion (sqrt(2) K > 1)."""
    pass


class InvalidStartError(CqlSwitchException):
    """Transfer start point is not in the u1-negative half plane."""
    pass


class TargetOvershootError(CqlSwitchException):
    """Transfer time equation has no solution (arccos argument outside [-1, 1])."""
    pass


class IntegrationError(CqlSwitchException):
    """ODE integration failed; carries the last good state."""

    def __init__(
        self,
        message: str,
        error_code: str = None,
        details: dict = None,
        last_time: Optional[float] = None,
        last_state: Any = None,
    ):
        super().__init__(message, error_code, details)
        self.last_time = last_time
        self.last_state = last_state


class LyapunovViolationError(CqlSwitchException):
    """Lyapunov function increased beyond integrator noise."""
    pass


class RecipeInconsistencyError(CqlSwitchException):
    """Parameter recipe compatibility condition does not hold."""
    pass


class DeltaRangeError(CqlSwitchException):
    """Energy offset delta_a outside the admissible range."""
    pass


class PlanningError(CqlSwitchException):
    """A stage planner failed; `stage` names the failing stage."""

    def __init__(self, message: str, stage: str, error_code: str = None, details: dict = None):
        super().__init__(message, error_code, details)
        self.stage = stage

    def __str__(self):
        return f"{super().__str__()} (stage={self.stage})"


ERROR_CODES = {
    "CQ101": "Demagnetizing factors must satisfy 0 < D1 < D2 < D3.",
    "CQ102": "'lambda' must be positive.",
    "CQ103": "'alpha_t' must be positive.",
    "CQ104": "'K' must satisfy 0 <= sqrt(2) K <= 1.",
    "CQ105": "Exactly one of 'Omega' and 'h2_t' must be given.",
    "CQ106": "|Omega| must be smaller than 1.",
    "CQ107": "Unknown configuration key.",
    "CQ108": "Configuration value is not a number.",
    "CQ109": "Unknown preset.",
    "CQ201": "'beta_e' must be positive.",
    "CQ202": "Target latitude is unreachable by the expulsion.",
    "CQ203": "'rho_e' must be positive.",
    "CQ301": "Latitudinal control is undefined at the poles.",
    "CQ302": "Transfer requires K > 0 (omega = 0).",
    "CQ303": "Transfer start must satisfy w1 < 0.",
    "CQ304": "Transfer target overshoots the reachable latitude.",
    "CQ401": "'delta_a' outside the admissible range.",
    "CQ402": "Lyapunov function increased along the flow.",
    "CQ403": "Parameter recipe is inconsistent.",
    "CQ501": "Integration step size underflow.",
    "CQ502": "Integration interval is empty.",
    "CQ503": "Stage planning failed.",
    "CQ504": "Unsupported export format.",
}


def get_error_message(error_code: str) -> str:
    """Get human-readable error message for an error code."""
    return ERROR_CODES.get(error_code, f"Unknown error: {error_code}")


def raise_from_code(error_code: str, message: str = None, details: Dict[str, Any] = None):
    """
    Raise the exception matching an error code.

    Args:
        error_code: Code from ERROR_CODES
        message: Optional message overriding the catalogue text
        details: Optional context attached to the exception

    Raises:
        CqlSwitchException or subclass based on the code
    """
    message = message or get_error_message(error_code)

    if error_code == "CQ202":
        raise TargetUnreachableError(message, error_code, details)
    elif error_code == "CQ301":
        raise PoleError(message, error_code, details)
    elif error_code == "CQ303":
        raise InvalidStartError(message, error_code, details)
    elif error_code == "CQ304":
        raise TargetOvershootError(message, error_code, details)
    elif error_code == "CQ401":
        raise DeltaRangeError(message, error_code, details)
    elif error_code == "CQ402":
        raise LyapunovViolationError(message, error_code, details)
    elif error_code == "CQ403":
        raise RecipeInconsistencyError(message, error_code, details)
    elif error_code == "CQ501":
        raise IntegrationError(message, error_code, details)
    elif error_code and error_code.startswith(("CQ1", "CQ2", "CQ3")):
        # remaining CQ1xx-CQ3xx codes are input checks
        raise ParameterValidationError(message, error_code, details)
    else:
        raise CqlSwitchException(message, error_code, details)
