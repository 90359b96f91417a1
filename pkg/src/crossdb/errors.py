"""Error taxonomy shared by every layer of the engine.

Each error carries a category so front ends can report a stable class
(syntax | schema | execution | io) without leaking stack traces.
"""


class EngineError(Exception):
    category = "execution"

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position  # (line, column) when known

    def render(self):
        if self.position is not None:
            line, col = self.position
            return f"{self.category} error at {line}:{col}: {self}"
        return f"{self.category} error: {self}"


class QuerySyntaxError(EngineError):
    category = "syntax"


class SchemaError(EngineError):
    category = "schema"


class ExecutionError(EngineError):
    category = "execution"


class NotFoundError(ExecutionError):
    """A tid, vertex key, edge pair, or catalog object does not exist."""


class ContractError(ExecutionError):
    """An operator was invoked with operands violating its contract."""


class ConsistencyError(ExecutionError):
    """Internal dual-store state disagrees with itself (corrupted mappers)."""


class StorageError(EngineError):
    category = "io"


class FormatError(StorageError):
    """A serialized artifact has a bad magic, version, or truncated body."""
