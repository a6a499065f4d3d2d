"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """A computation failed for numerical reasons (CLI exit code 2)."""


class IllConditionedMatrixError(NumericalError):
    """A matrix factorization/inversion was refused as ill-conditioned."""


class EstimationError(NumericalError):
    """An estimator could not produce a usable result."""


class InfeasibleScenarioError(ValueError):
    """A random-scenario request cannot be satisfied (e.g. min separation)."""
