"""Exception hierarchy shared by all modules."""


class OrbfblError(Exception):
    """Base class for every error raised by the package."""


class DomainError(OrbfblError, ValueError):
    """An argument lies outside the domain where an operation is defined."""


class DegenerateChannelError(OrbfblError, ValueError):
    """The channel carries no information (q_plus and q_minus coincide)."""


class QuadratureError(OrbfblError, RuntimeError):
    """Adaptive quadrature failed to reach its tolerance within budget."""


class SaddlepointError(OrbfblError, RuntimeError):
    """The saddlepoint equation could not be bracketed."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class SizeGuardError(OrbfblError, ValueError):
    """A problem size exceeds a memory/time guard."""


class InfeasibleError(OrbfblError, ValueError):
    """No code size satisfies the requested error-probability target."""


class SearchCapError(OrbfblError, RuntimeError):
    """A blocklength search ran past its cap."""
