"""Exception hierarchy shared across the package."""


class ProxJobsError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(ProxJobsError, ValueError):
    """An argument is non-finite or outside its allowed range."""


class DegenerateDesignError(ProxJobsError, ValueError):
    """Too few observations, or all x values identical."""


class SizeLimitError(ProxJobsError, ValueError):
    """Input is too large for an enumeration-based routine."""


class OutOfDomainError(ProxJobsError, ValueError):
    """A travel time falls outside every stratum."""


class IncompatibleModelsError(ProxJobsError, ValueError):
    """Model sets built on different stratifications were combined."""


class DataError(ProxJobsError):
    """A census file could not be read or violates the schema."""
