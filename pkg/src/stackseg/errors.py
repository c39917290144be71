"""Exception types shared across the package."""


class ContractError(ValueError):
    """A caller violated an operation's precondition (shape mismatch, bad index, ...)."""


class VolumeFormatError(ValueError):
    """A volume file is malformed. ``field`` names the offending header field."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class UnsupportedVolumeError(ValueError):
    """The file is valid but uses a feature outside the supported subset."""


class MetricUndefinedError(ValueError):
    """The requested metric has no defined value for these inputs (e.g. HD95 of an empty mask)."""


class TransportError(RuntimeError):
    """A remote backend could not be reached or timed out. ``frame_index`` is the
    slice being requested when the failure happened (None for connection setup)."""

    def __init__(self, message: str, frame_index: int | None = None):
        super().__init__(message)
        self.frame_index = frame_index


class ProtocolError(RuntimeError):
    """A remote backend violated the propagation wire protocol."""

    def __init__(self, message: str, frame_index: int | None = None):
        super().__init__(message)
        self.frame_index = frame_index
