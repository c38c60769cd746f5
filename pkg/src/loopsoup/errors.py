"""Exception and warning types shared by every module."""


class LoopSoupError(Exception):
    """Base class for errors raised by loopsoup."""


class DomainError(LoopSoupError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class ConvergenceError(LoopSoupError, ArithmeticError):
    """A numerical method failed to reach its configured tolerance."""


class RegimeError(DomainError):
    """An asymptotic formula was requested outside its separation regime."""


class InsufficientDataError(LoopSoupError, ValueError):
    """Too few recorded values to compute a diagnostic."""


class ClampWarning(RuntimeWarning):
    """Quadrature noise pushed a value outside [0, 1] and it was clamped."""


class RegimeWarning(RuntimeWarning):
    """An asymptotic formula was evaluated outside its separation regime."""
