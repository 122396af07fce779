"""Exception types shared across the package.

Two broad groups matter for the CLI exit codes: :class:`UsageError`
subclasses map to exit code 2 (bad flags, bad specs, bad input files),
:class:`NumericError` subclasses map to exit code 3 (a computation that
started but produced non-finite or infeasible results).
"""


class SymviError(Exception):
    """Base class for all symvi errors."""


class UsageError(SymviError):
    """The caller asked for something malformed or unsupported."""


class NumericError(SymviError):
    """A numerical computation failed in a detectable way."""


# -- linear algebra -----------------------------------------------------

class NotPositiveDefinite(NumericError):
    """Matrix is not symmetric positive definite (a pivot or eigenvalue
    fell below the relative tolerance)."""


class DimensionMismatch(UsageError):
    """Operands have incompatible dimensions."""


# -- families -----------------------------------------------------------

class ScaleFrozen(UsageError):
    """Attempted to update the scale of a location-only family handle."""


# -- divergences --------------------------------------------------------

class UnknownDivergence(UsageError):
    """Divergence name not in the builtin registry."""


class InvalidAlpha(UsageError):
    """Renyi order must be a positive real different from 0 and 1."""


class NonFiniteLogDensity(NumericError):
    """A log-density or log-ratio evaluated to NaN or +/-inf."""


class NonFiniteGradient(NumericError):
    """A gradient estimate evaluated to NaN or +/-inf.

    When raised by the stochastic optimizer, the partial objective trace
    is attached as the ``trace`` attribute.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []


class DimensionTooLarge(UsageError):
    """Deterministic quadrature is only available for dim <= 2."""


# -- targets ------------------------------------------------------------

class InvalidParameter(UsageError):
    """A target or family constructor received an out-of-range argument."""


class InvalidData(UsageError):
    """A data file parsed cleanly but the contents are unusable."""


class ParseError(UsageError):
    """A data file could not be parsed; the message names the line."""


class MissingBenchmark(UsageError):
    """The target carries no benchmark moments."""


class MissingSampler(UsageError):
    """The target carries no benchmark sampler."""


# -- optimize -----------------------------------------------------------

class GridTooLarge(UsageError):
    """A parameter grid exceeds the exhaustive-search budget."""


class NoBracket(NumericError):
    """The 1-D profile objective is not unimodal on the search interval."""


# -- diagnostics --------------------------------------------------------

class EmptyInput(UsageError):
    """An aggregate was requested over an empty collection."""


# -- cli ----------------------------------------------------------------

class UnknownFigure(UsageError):
    """Figure identifier not in {fig1, fig2, fig3, fig4, table2}."""
