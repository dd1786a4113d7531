"""Exception hierarchy shared by the solver stages."""

from __future__ import annotations


class SolverError(Exception):
    """Base class for every error raised by the package.

    ``stage`` names the pipeline stage that failed and ``diagnostics`` carries
    whatever numbers were available at the time of failure, so that the CLI
    can always emit a structured error record.
    """

    stage = "solver"

    def __init__(self, message: str, *, stage: str | None = None, diagnostics: dict | None = None):
        super().__init__(message)
        if stage is not None:
            self.stage = stage
        self.diagnostics = dict(diagnostics or {})

    def to_record(self) -> dict:
        return {
            "error": type(self).__name__,
            "stage": self.stage,
            "message": str(self),
            "diagnostics": self.diagnostics,
        }


class SpecificationError(SolverError, ValueError):
    stage = "model-spec"


class DifferentiationError(SolverError):
    """Non-finite residual inside a finite-difference stencil."""

    stage = "model-spec"

    def __init__(self, message: str, *, argument: int, component: int, **kw):
        super().__init__(message, **kw)
        self.argument = argument
        self.component = component
        self.diagnostics.setdefault("argument", argument)
        self.diagnostics.setdefault("component", component)


class SteadyStateError(SolverError):
    stage = "steady-state"


class ConditioningError(SolverError):
    stage = "steady-state"


class PathError(SolverError):
    stage = "det-path"


class HorizonError(SolverError):
    stage = "det-path"


class IndeterminacyError(SolverError):
    """Unit root in the linearised system, or a singular initial-jump matrix."""

    stage = "schur-split"


class BlanchardKahnError(SolverError):
    stage = "schur-split"

    def __init__(self, message: str, *, n_unstable: int, n_jump: int, **kw):
        super().__init__(message, **kw)
        self.n_unstable = n_unstable
        self.n_jump = n_jump
        self.diagnostics.update(n_unstable=n_unstable, n_jump=n_jump)


class SingularSystemError(SolverError):
    stage = "tvlre"

    def __init__(self, message: str, *, t: int, **kw):
        super().__init__(message, **kw)
        self.t = t
        self.diagnostics.setdefault("t", t)


class SolvabilityPreconditionError(SolverError):
    """Norm bounds a >= 1 or b >= 1: the sufficient existence test is not applicable."""

    stage = "tvlre"


class ExistenceError(SolverError):
    stage = "tvlre"


class RecursionBreakdownError(SingularSystemError):
    pass


class DivergenceError(SolverError):
    stage = "burnside-ref"


class ConfigError(SolverError):
    stage = "config"
