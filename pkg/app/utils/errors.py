from typing import Optional


class NcrIsacError(Exception):
    """Base class for every error raised by the toolkit."""


class ConfigError(NcrIsacError, ValueError):
    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        location = []
        if key is not None:
            location.append(f"key '{key}'")
        if line is not None:
            location.append(f"line {line}")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")


class DimensionError(NcrIsacError, ValueError):
    pass


class IdentifiabilityError(NcrIsacError, ValueError):
    """Range is not identifiable from the echo (zero RCS, beam null, or a
    non-positive Schur complement of the Fisher matrix)."""


class CrbConsistencyError(NcrIsacError, RuntimeError):
    pass
