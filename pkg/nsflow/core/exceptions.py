"""
Custom exceptions for the library and the command line
"""

from typing import Any, Dict, Optional


class NsflowError(Exception):
    """Base exception for nsflow errors"""

    exit_code: int = 1
    kind: str = "error"
    detail: str = "Internal error"

    def __init__(self, detail: Optional[str] = None, **kwargs: Any):
        self.detail = detail or self.detail
        super().__init__(self.detail)
        # Store any additional context
        self.context = kwargs

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready diagnostics"""
        return {"error": self.kind, "detail": self.detail, "context": self.context}


class InvalidArgumentError(NsflowError):
    """Argument outside the operation's domain"""

    exit_code = 2
    kind = "invalid-argument"
    detail = "Invalid argument"


class ProblemValidationError(InvalidArgumentError):
    """Problem file failed schema validation"""

    kind = "validation"
    detail = "Problem file is invalid"


class UnsupportedError(NsflowError):
    """Input representable but not supported by the operation"""

    exit_code = 2
    kind = "unsupported"
    detail = "Unsupported input"


class NumericalFailureError(NsflowError):
    """Numerical procedure did not converge"""

    exit_code = 3
    kind = "numerical-failure"
    detail = "Numerical failure"


class UnsupportedConfigurationError(NsflowError):
    """Configuration the solver cannot resolve"""

    exit_code = 3
    kind = "unsupported-configuration"
    detail = "Unsupported configuration"


class RefusedError(NsflowError):
    """Operation refused by a failed precondition"""

    exit_code = 3
    kind = "refused"
    detail = "Operation refused"
