"""Exception hierarchy shared by all stages.

The CLI maps these onto process exit codes: link validation failures
exit with 1, numerical failures with 2, configuration/parse/I-O
problems with 3.
"""


class NliCfmError(Exception):
    """Base class for all errors raised by this package."""


class LinkValidationError(NliCfmError):
    """The link description violates a hard constraint."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        lines = "; ".join(str(d) for d in self.diagnostics)
        super().__init__(f"invalid link: {lines}")


class NumericError(NliCfmError):
    """A numerical stage failed to produce a trustworthy result."""


class SolverDivergenceError(NumericError):
    """The coupled power-evolution integrator stalled or diverged."""


class DegenerateFitError(NumericError):
    """The profile-fit normal equations are singular or ill conditioned."""


class DispersionSingularityError(NumericError):
    """Effective dispersion too close to zero for the closed form."""


class QuadratureError(NumericError):
    """Island quadrature did not converge within the refinement budget."""


class ConfigError(NliCfmError):
    """The input document cannot be read or parsed into a link."""
