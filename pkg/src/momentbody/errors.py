"""Exception hierarchy for the moment body solver."""


class MomentBodyError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(MomentBodyError, ValueError):
    """Non-finite data, wrong shapes or mismatched dimensions."""


class InvalidConfig(MomentBodyError, ValueError):
    pass


class RankDeficient(MomentBodyError):
    """I, A_1, ..., A_m are (numerically) linearly dependent."""


class MissingBlockStructure(MomentBodyError):
    pass


class BlockViolation(MomentBodyError):
    """A matrix has nonzero entries outside its declared diagonal blocks."""


class NotPreconditioned(MomentBodyError):
    """The solver requires a traceless, orthonormal map."""


class NotASeparator(MomentBodyError):
    """A back-mapped infeasibility certificate failed re-verification."""


class NotUnit(MomentBodyError, ValueError):
    pass


class LineSearchFailed(MomentBodyError):
    pass


class SchemaError(MomentBodyError, ValueError):
    """An instance or certificate file does not match its schema."""
