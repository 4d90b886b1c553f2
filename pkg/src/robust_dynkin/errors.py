"""Exception hierarchy shared by every module of the package."""


class DynkinError(Exception):
    """Base class. ``witness`` carries the offending object when one exists."""

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


# scenario trees
class EmptyBranching(DynkinError):
    pass


class SizeLimit(DynkinError):
    pass


class UnknownNode(DynkinError, KeyError):
    pass


class DepthOutOfRange(DynkinError, IndexError):
    pass


# payoffs
class MissingTableEntry(DynkinError, KeyError):
    pass


class BoundViolated(DynkinError):
    pass


# ambiguity
class IncompletePolicy(DynkinError):
    pass


class EmptyMenu(DynkinError):
    pass


class EnumerationTooLarge(DynkinError):
    pass


class OverlappingPartition(DynkinError):
    pass


class DepthMismatch(DynkinError):
    pass


# verification
class SubmartingaleViolated(DynkinError):
    pass


class OptimalityViolated(DynkinError):
    pass


class SaddleViolated(DynkinError):
    pass


# lattice generation
class InvalidControl(DynkinError, ValueError):
    pass


# game spec files
class ParseError(DynkinError, ValueError):
    pass


class ValidationError(DynkinError, ValueError):
    """Raised for semantically invalid input. ``path`` locates the field."""

    def __init__(self, message: str, path: str = "", witness=None):
        super().__init__(f"{path}: {message}" if path else message, witness)
        self.path = path
