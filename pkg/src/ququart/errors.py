"""Exception types shared across the package."""


class TomographyError(Exception):
    """Base class for all domain errors raised by ququart."""


class DomainError(TomographyError, ValueError):
    pass


class ZeroVector(TomographyError, ValueError):
    pass


class DegenerateInput(TomographyError, ValueError):
    pass


class DegenerateState(TomographyError, ValueError):
    """The true state produces zero expected counts on every setting."""


class AlreadyCorrected(TomographyError):
    pass


class NoCounts(TomographyError, ValueError):
    pass


class EmptyGrid(TomographyError, ValueError):
    pass


class IndexOutOfRange(TomographyError, IndexError):
    pass
