"""Exception hierarchy shared by all meshtok modules."""


class MeshTokError(Exception):
    """Base class for every error raised by this package."""


class ParseError(MeshTokError):
    """Malformed mesh file. Carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class StructureError(MeshTokError):
    """Structurally invalid data (bad indices, duplicate rows, ...)."""


class DegenerateInputError(MeshTokError):
    """Input has no usable extent (zero-size mesh, all faces zero-area)."""


class DomainError(MeshTokError):
    """Value outside the domain an operation is defined on."""


class StreamParseError(MeshTokError):
    """Token stream violates the patch grammar. Carries the token position
    (or byte offset, for container-level failures)."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"position {position}: {message}"
        super().__init__(message)


class StreamTruncationError(StreamParseError):
    """Token stream ended (or a new patch started) mid-patch."""


class ConfigError(MeshTokError):
    """Inconsistent or incomplete configuration."""
