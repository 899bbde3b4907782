"""Exception taxonomy shared across the package.

Three failure classes map onto the CLI exit codes: bad arguments or
malformed configs (exit 2), numerically unresolved setups (exit 2), and
diagnostics raised when a computed quantity is unusable (exit 3).
"""


class CombMemError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(CombMemError, ValueError):
    """An argument or config value violates a documented invariant."""


class ConfigurationError(CombMemError):
    """A run setup cannot be simulated as requested (grid too coarse,
    schedule gap, under-resolved intermediate frequency, ...)."""


class DiagnosticError(CombMemError):
    """A result exists but fails a numerical quality check (no plateau,
    echo below the numerical floor, ring-down not captured, ...).

    ``partial`` may carry the partial result for callers that want it.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
