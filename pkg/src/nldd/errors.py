"""Exception types shared across the solver stack."""


class InvalidInput(ValueError):
    """Raised when an argument violates a documented precondition."""


class SolverFailure(RuntimeError):
    """A nonlinear solve did not produce a usable result.

    ``subdomain`` identifies the offending subdomain when the failure
    happened inside a decomposition sweep (None for monodomain solves).
    """

    def __init__(self, message, subdomain=None):
        super().__init__(message)
        self.subdomain = subdomain


class UnsupportedOracle(ValueError):
    """The analytic reference solution does not cover the requested setup."""


class HypothesisViolated(RuntimeError):
    """A theorem hypothesis needed by the requested quantity does not hold."""


class UnknownExperiment(KeyError):
    """Requested experiment name is not in the registry."""


class InvalidOverride(ValueError):
    """An experiment override targets a structurally fixed field."""
