"""
Centralized error handling with a proper exception hierarchy and the
JSON envelopes printed by the command line front end.
"""
import json
import inspect
import logging
import traceback
from typing import Dict, Any, Optional, Tuple
from functools import wraps
from datetime import datetime, timezone

logger = logging.getLogger(__name__)

# ============================================================================
# CUSTOM EXCEPTIONS
# ============================================================================

class SudokuCodeError(Exception):
    """Base exception for all library errors"""
    def __init__(self, message: str, details: Optional[Dict] = None):
        self.message = message
        self.details = details or {}
        self.timestamp = datetime.now(timezone.utc).isoformat()
        super().__init__(self.message)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'error_type': self.__class__.__name__,
            'message': self.message,
            'details': self.details,
            'timestamp': self.timestamp
        }

class ValidationError(SudokuCodeError):
    """Raised when parameters or preconditions are invalid"""
    pass

class ConfigurationError(SudokuCodeError):
    """Raised when configuration is invalid or missing"""
    pass

class AlphabetMismatchError(ValidationError):
    """Raised when two symbol sets live on different alphabets"""
    pass

class GraphConstructionError(SudokuCodeError):
    """Raised when a factor graph cannot be built"""
    pass

class SamplingBudgetError(SudokuCodeError):
    """Raised when no codeword was found within the search budget (not a proof of infeasibility)"""
    pass

class ContradictionError(SudokuCodeError):
    """Raised when beliefs or givens are mutually inconsistent"""
    pass

class InfeasibleConstraintError(SudokuCodeError):
    """Raised when a constraint node sees a zero permanent"""
    pass

class DensityEvolutionError(SudokuCodeError):
    """Raised when the density evolution recursion loses normalization"""
    pass

class OutputError(SudokuCodeError):
    """Raised when results cannot be written to their destination"""
    pass

# ============================================================================
# ERROR HANDLING DECORATORS
# ============================================================================

def handle_errors(error_type: type = SudokuCodeError, log_traceback: bool = True):
    """
    Decorator to log errors and wrap unexpected ones.

    Usage:
        @handle_errors()
        def cmd_threshold(args):
            ...
    """
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            try:
                return func(*args, **kwargs)
            except error_type as e:
                logger.error("Error in %s: %s", func.__name__, e)
                if log_traceback:
                    logger.debug(traceback.format_exc())
                raise
            except Exception as e:
                logger.error("Unexpected error in %s: %s", func.__name__, e)
                if log_traceback:
                    logger.error(traceback.format_exc())

                # Wrap in library error
                raise SudokuCodeError(
                    f"Unexpected error in {func.__name__}",
                    details={'original_error': str(e), 'type': type(e).__name__}
                ) from e
        return wrapper
    return decorator

def validate_input(**validators):
    """
    Decorator to validate function inputs.

    Usage:
        @validate_input(
            delta=lambda x: 0.0 <= x <= 1.0,
            n_vars=lambda x: x > 0
        )
        def erase(cw, delta, seed):
            ...
    """
    def decorator(func):
        sig = inspect.signature(func)

        @wraps(func)
        def wrapper(*args, **kwargs):
            bound_args = sig.bind(*args, **kwargs)
            bound_args.apply_defaults()

            # Validate each parameter
            for param_name, validator in validators.items():
                if param_name in bound_args.arguments:
                    value = bound_args.arguments[param_name]
                    try:
                        ok = validator(value)
                    except (TypeError, ValueError):
                        ok = False
                    if not ok:
                        raise ValidationError(
                            f"Validation failed for parameter '{param_name}'",
                            details={'value': str(value), 'function': func.__name__}
                        )

            return func(*args, **kwargs)
        return wrapper
    return decorator

# ============================================================================
# RESPONSE BUILDERS
# ============================================================================

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

def exit_code_for(error: Exception) -> int:
    """Usage errors exit 2, everything else 1"""
    return EXIT_USAGE if isinstance(error, ValidationError) else EXIT_RUNTIME

def build_error_response(error: Exception) -> Tuple[int, str]:
    """
    Build the standardized error envelope and exit code.

    Usage:
        code, body = build_error_response(e)
    """
    error_data = {
        'error': True,
        'error_type': type(error).__name__,
        'message': str(error),
        'timestamp': datetime.now(timezone.utc).isoformat()
    }

    # Add details if it's our custom exception
    if isinstance(error, SudokuCodeError):
        error_data.update(error.to_dict())

    return exit_code_for(error), json.dumps(error_data, default=str)

def build_success_response(data: Any, command: Optional[str] = None) -> str:
    """
    Build the standardized success envelope for JSON output.

    Usage:
        print(build_success_response({'theta': 0.98426}, command='threshold'))
    """
    response_data = {
        'success': True,
        'data': data,
        'timestamp': datetime.now(timezone.utc).isoformat()
    }

    if command:
        response_data['command'] = command

    return json.dumps(response_data, indent=2, default=str)
