"""Exception hierarchy shared by the analyzer and the CLI."""


class StabcertError(Exception):
    """Base class for all analyzer errors."""


class DimensionError(StabcertError, ValueError):
    pass


class SymmetryError(StabcertError, ValueError):
    pass


class NotStationaryError(StabcertError):
    """The reference point does not satisfy the KKT inclusion."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class MFCQError(StabcertError):
    """Active constraint with vanishing gradient."""


class WrongCaseError(StabcertError):
    pass


class InfeasiblePointError(StabcertError):
    pass


class IndeterminateError(StabcertError):
    """The linear feasibility kernel hit its iteration cap."""


class OracleError(StabcertError):
    pass
