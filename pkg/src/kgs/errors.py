"""Exception hierarchy shared by all kgs modules."""


class KGSError(Exception):
    """Base class for every error raised by this package."""


class CyclicGraph(KGSError):
    pass


class NoConsistentExtension(KGSError):
    pass


class OrientationConflict(KGSError):
    pass


class SingularRegression(KGSError):
    pass


class DataError(KGSError):
    """Malformed dataset (non-finite values, duplicate names, too few rows)."""


class ParseError(KGSError):
    """A text input could not be parsed; the message names line and column."""


class ConflictingKnowledge(KGSError):
    pass


class CyclicKnowledge(KGSError):
    pass


class InsufficientPairs(KGSError):
    pass


class TooLarge(KGSError):
    pass


class DimensionMismatch(KGSError):
    pass


class EmptyTruth(KGSError):
    pass


class NoDiscoveries(KGSError):
    pass


class UnsupportedKnowledgeKind(KGSError):
    pass


class NameMismatch(KGSError):
    pass


class CountMismatch(KGSError):
    pass


class ConfigError(KGSError):
    pass


InvalidKnowledge = (ConflictingKnowledge, CyclicKnowledge, OrientationConflict, NoConsistentExtension)
