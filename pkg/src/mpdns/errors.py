from typing import Optional


class ConfigError(ValueError):
    """Invalid grid, solver or command configuration."""
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class BlowUpError(RuntimeError):
    """Raised when the simulated state stops being finite or grows without bound.

    ``norm`` is the value of ``quantity`` for the offending state.
    """
    def __init__(self, t: float, norm: float, reason: str = "non-finite coefficients",
                 quantity: str = "|grad u|^2"):
        self.t = t
        self.norm = norm
        self.reason = reason
        self.quantity = quantity
        super().__init__(f"blow-up at t={t:.6g}: {reason} ({quantity}={norm:.6g})")
