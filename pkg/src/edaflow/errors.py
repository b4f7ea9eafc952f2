"""Exception hierarchy shared across the pipeline."""


class EdaflowError(Exception):
    """Base class for all edaflow errors."""


class DataError(EdaflowError):
    """Malformed or inconsistent input data (bad CSV rows, single-class training sets, ...)."""


class SolverError(EdaflowError):
    """The QP solver failed to reach its optimality tolerance, or the problem is ill-posed."""
