"""Exception types shared across the package."""


class RepassError(Exception):
    """Base class for all package errors."""


class LexiconError(RepassError):
    """Lexicon file missing, unparsable, or violating uniqueness/disjointness."""


class DuplicateEntryError(LexiconError):
    """Two lexicon entries collide on their normalized form."""


class UnknownEntryError(LexiconError):
    """Lookup of a normalized form that is not in the lexicon."""


class WerUndefinedError(RepassError):
    """WER requested against an empty reference."""


class ChatClientError(RepassError):
    """Chat completion transport or protocol failure."""


class VerdictParseError(RepassError):
    """Decider output could not be parsed into a strict YES/NO verdict."""


class AsrTransportError(RepassError):
    """Network-level failure talking to an ASR backend."""


class AsrBackendError(RepassError):
    """ASR backend reached but returned an unusable response."""


class ManifestError(RepassError):
    """Corpus manifest missing, unparsable, or inconsistent."""


class ConfigError(RepassError):
    """Run configuration invalid or referencing missing resources."""


class ScoreMismatchError(RepassError):
    """Paired score lists do not cover the same segment ids."""
