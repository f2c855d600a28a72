"""Exception hierarchy.

Errors split into two families that the command line maps to exit codes:
bad input (2) and numerical failure (3).
"""


class MortstatError(Exception):
    exit_code = 1


class InputError(MortstatError, ValueError):
    exit_code = 2


class InvalidInputError(InputError):
    pass


class SchemaError(InputError):
    """A CSV or config file does not follow its schema.

    ``row`` is 1-based and counts the header as row 1.
    """

    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
        self.row = row
        self.column = column


class DomainError(InputError):
    pass


class NoArticlesError(InputError):
    pass


class InsufficientDataError(InputError):
    pass


class NumericalError(MortstatError, ArithmeticError):
    exit_code = 3


class DegenerateDataError(NumericalError):
    pass


class DegenerateCovariateError(NumericalError):
    pass


class NoEventsError(NumericalError):
    pass


class DivergenceError(NumericalError):
    def __init__(self, message, covariate=None):
        super().__init__(message)
        self.covariate = covariate


class ExperimentFailedError(NumericalError):
    pass
