"""Exception hierarchy for the package."""


class L1PCAError(Exception):
    """Base class for all errors raised by l1pca."""


class DimensionMismatch(L1PCAError, ValueError):
    pass


class RankDeficient(L1PCAError, ValueError):
    """The matrix has no unique nearest point on the Stiefel manifold."""


class NegativeRadicand(L1PCAError, ValueError):
    pass


class AtAnchor(L1PCAError):
    """The subspace contains a data point, so the objective is not differentiable.

    Attributes
    ----------
    indices : tuple of int
        Indices of the anchored data points.
    """

    def __init__(self, indices, message=None):
        self.indices = tuple(int(i) for i in indices)
        if message is None:
            message = f"subspace is anchored at data points {list(self.indices)}"
        super().__init__(message)


class NotAnAnchor(L1PCAError, ValueError):
    pass


class NotHorizontal(L1PCAError, ValueError):
    pass


class SingularPrecondition(L1PCAError):
    pass


class DegenerateData(L1PCAError, ValueError):
    pass


class DataError(L1PCAError, ValueError):
    """Base class for input-data problems (bad files, malformed values)."""


class EmptyFile(DataError):
    pass


class ParseError(DataError):
    def __init__(self, line, column, token, path=None):
        self.line = line
        self.column = column
        self.token = token
        self.path = path
        where = f"{path}:" if path else ""
        super().__init__(
            f"{where}line {line}, column {column}: cannot parse {token!r} as a number"
        )
