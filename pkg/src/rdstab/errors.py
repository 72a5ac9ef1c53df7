"""Exception hierarchy for the package.

Errors fall into two families: parameter/usage errors (subclasses of
``InvalidParameterError``, which is a ``ValueError``) and runtime failures of
the numerical machinery (subclasses of ``SolverError``).  The CLI maps these
onto process exit codes; see ``rdstab.cli``.
"""

__all__ = [
    "RdstabError",
    "InvalidParameterError",
    "DimensionError",
    "DomainError",
    "ResolutionError",
    "InfeasibleRateError",
    "DegenerateSpectrumError",
    "InadmissiblePairError",
    "SolverError",
    "ConvergenceError",
    "NewtonDivergenceError",
    "FitError",
]


class RdstabError(Exception):
    """Base class for all package-specific errors."""


class InvalidParameterError(RdstabError, ValueError):
    """A scalar or configuration argument is outside its documented range."""


class DimensionError(InvalidParameterError):
    """Array arguments do not match the grid or each other in shape."""


class DomainError(InvalidParameterError):
    """A point lies outside the triangular kernel domain 0 <= y <= x <= L."""


class ResolutionError(InvalidParameterError):
    """The grid is too coarse for the requested number of modes."""


class InfeasibleRateError(InvalidParameterError):
    """No mode count / damping coefficient can meet the requested rate."""


class DegenerateSpectrumError(InvalidParameterError):
    """alpha/nu coincides with a Dirichlet eigenvalue; the minimal-mode
    design is not defined there."""


class InadmissiblePairError(RdstabError):
    """The damping/mode-count pair makes the transform non-invertible.

    Raised when a recursion scalar a_j comes within ``admissibility_floor``
    of -1.  Carries the offending index and value.
    """

    def __init__(self, index: int, value: float, floor: float):
        self.index = index
        self.value = value
        self.floor = floor
        super().__init__(
            f"inadmissible pair: |1 + a_{index}| = {abs(1.0 + value):.3e} "
            f"<= floor {floor:.1e} (a_{index} = {value!r})"
        )


class SolverError(RdstabError):
    """A linear or nonlinear solve failed at run time."""


class ConvergenceError(SolverError):
    """An iterative computation did not converge within its guard limit."""


class NewtonDivergenceError(SolverError):
    """The per-step Newton iteration exceeded its iteration budget.

    Carries the history of max|du| values for diagnosis.
    """

    def __init__(self, step: int, history):
        self.step = step
        self.history = list(history)
        tail = ", ".join(f"{h:.3e}" for h in self.history[-4:])
        super().__init__(
            f"Newton iteration did not converge at time step {step} "
            f"(last corrections: {tail})"
        )


class FitError(SolverError):
    """Decay-rate fitting failed (window too short or norms at machine zero)."""
