"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A config file or value violates its documented invariants."""


class InputError(ValueError):
    """An input artifact (CSV, decision list, instance) is inconsistent."""


class MaskViolationError(RuntimeError):
    """A policy chose an action its mask forbids."""
