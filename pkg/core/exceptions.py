"""Exceptions shared by every large-sieve app."""


class LargeSieveError(ValueError):
    """Base class; a caller may catch this to handle any precondition failure."""


class DomainError(LargeSieveError):
    """An argument lies outside the mathematical domain of an operation."""


class RangeError(LargeSieveError):
    """A numeric argument lies outside its admissible range."""


class ConfigError(LargeSieveError):
    """Experiment configuration or an input file could not be used."""
