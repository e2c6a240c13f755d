"""Exception types shared across the package."""


class TraceGraphError(Exception):
    """Base class for all errors raised by this package."""


class NotFound(TraceGraphError):
    """A referenced id (operation, variable, version) does not exist."""


class StateError(TraceGraphError):
    """An API call is illegal in the current recorder/graph state."""


class ConfigError(TraceGraphError):
    """Invalid configuration: unknown strategy, duplicate registration, impossible budget."""


class ParseError(TraceGraphError):
    """A document could not be parsed. ``offset`` is a byte/char position when known."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class ValidationError(TraceGraphError):
    """A graph violates a structural invariant. ``code`` is the machine-readable code."""

    def __init__(self, message: str, code: str):
        super().__init__(message)
        self.code = code


class RangeError(TraceGraphError):
    """A page index is outside the paginated range."""


class TooLarge(TraceGraphError):
    """An exhaustive search was requested on a graph above the size cap."""


class NotSequential(TraceGraphError):
    """The operation precedence of the graph is not a total order."""


class NoFault(TraceGraphError):
    """No faulty operation exists under the given oracle."""


class BackendError(TraceGraphError):
    """A chat backend failed. ``retryable`` marks transient transport errors."""

    def __init__(self, message: str, retryable: bool = False):
        super().__init__(message)
        self.retryable = retryable


class ProtocolError(TraceGraphError):
    """A backend reply did not follow the expected protocol (e.g. no tool directive)."""


class ToolError(TraceGraphError):
    """A tool invocation failed in a way the agent should observe, not crash on."""


class RunError(TraceGraphError):
    """An attribution run aborted; carries the partial cost meter."""

    def __init__(self, message: str, meter=None):
        super().__init__(message)
        self.meter = meter
