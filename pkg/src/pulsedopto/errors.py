class PulsedOptoError(Exception):
    """Base class for library errors."""


class NonPhysicalState(PulsedOptoError, ValueError):
    """A covariance matrix violates the uncertainty relation."""


class DegenerateProfile(PulsedOptoError, ValueError):
    """The requested temporal mode carries no mechanics-to-light transfer."""


class DimensionMismatch(PulsedOptoError, ValueError):
    pass


class ConfigError(PulsedOptoError):
    pass


class ParseError(ConfigError):
    def __init__(self, message, path=None, line=None, key=None):
        self.path = path
        self.line = line
        self.key = key
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class ValidationError(ConfigError):
    """Raised with the full list of violated constraints."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))
