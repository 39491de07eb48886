#!/usr/bin/env python3
"""
Hartogs Errors - exception hierarchy shared by every core module

Each exception carries the process exit code and the reason slug the engine
writes into its JSON error objects.

License: Apache-2.0
"""

from typing import Any, Dict, Optional


EXIT_OK = 0
EXIT_PARSE = 2
EXIT_NO_PROPER_MAP = 3
EXIT_DIMENSION = 4
EXIT_DOMAIN = 5
EXIT_VERIFICATION_FAILED = 6


class HartogsError(Exception):
    """Base class for all engine errors"""

    exit_code: int = EXIT_DOMAIN
    reason: str = "error"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        payload = {"status": "error", "reason": self.reason, "message": str(self)}
        if self.details:
            payload["details"] = self.details
        return payload


class ParseError(HartogsError, ValueError):
    exit_code = EXIT_PARSE
    reason = "parse_error"


class NoProperMap(HartogsError):
    exit_code = EXIT_NO_PROPER_MAP
    reason = "no_proper_map"


class DimensionMismatch(HartogsError, ValueError):
    exit_code = EXIT_DIMENSION
    reason = "dimension_mismatch"


class CenterTooCloseToSphere(HartogsError, ValueError):
    reason = "center_too_close_to_sphere"


class NotInDomain(HartogsError, ValueError):
    reason = "not_in_domain"


class BranchPole(HartogsError, ZeroDivisionError):
    reason = "branch_pole"


class NotOnK(HartogsError, ValueError):
    reason = "not_on_k"


class EmptyRegion(HartogsError, ValueError):
    reason = "empty_region"


class LeviSingular(HartogsError, ValueError):
    """Levi form weight |z_j|^{2(p_j-1)} diverges at z_j = 0 with p_j < 1"""

    reason = "levi_singular"


class InvalidMap(HartogsError, ValueError):
    """Map parameters violate the arithmetic conditions of their family"""

    reason = "invalid_map"

    def __init__(self, message: str, violations: Optional[list] = None):
        super().__init__(message, {"violations": list(violations or [])})
        self.violations = list(violations or [])
