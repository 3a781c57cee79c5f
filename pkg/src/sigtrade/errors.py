"""Exception hierarchy shared by all modules."""


class SigTradeError(Exception):
    """Base class for package errors."""


class InvalidArgument(SigTradeError, ValueError):
    pass


class TrainingDiverged(SigTradeError, RuntimeError):
    def __init__(self, iteration, value=None):
        self.iteration = iteration
        self.value = value
        super().__init__(f"training diverged at iteration {iteration} (loss={value!r})")


class FitDegenerate(SigTradeError, ValueError):
    pass


class NotMeanReverting(SigTradeError, ValueError):
    pass


class ConstructionFailed(SigTradeError, RuntimeError):
    pass


class DataError(SigTradeError, ValueError):
    """Malformed or invalid input data (files, manifests, configs)."""
