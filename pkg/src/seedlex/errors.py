"""Exception hierarchy shared across the package."""


class SeedlexError(Exception):
    """Base class for all errors raised by seedlex."""


class EmbeddingFormatError(SeedlexError, ValueError):
    """An embedding file could not be parsed into a usable table."""


class LexiconFormatError(SeedlexError, ValueError):
    """A lexicon or seed file is malformed."""


class LexiconBuildError(SeedlexError, ValueError):
    """Seeds or candidates cannot produce a lexicon."""


class ConfigError(SeedlexError, ValueError):
    """A run configuration is invalid (usage error)."""
