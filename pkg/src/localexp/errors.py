"""Exception types; the CLI maps each family to an exit code."""


class LocalExpError(Exception):
    pass


class DataError(LocalExpError, ValueError):
    """Bad input data or configuration of a dataset operation."""


class NumericalError(LocalExpError, ArithmeticError):
    pass


class DegenerateWeightsError(NumericalError):
    """All regression weights vanish (source point outside every neighborhood)."""


class SingularSystemError(NumericalError):
    pass


class TrainingError(NumericalError):
    pass
