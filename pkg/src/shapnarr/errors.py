"""Exception hierarchy.

Every error carries a ``category`` used by the CLI as a one-word,
machine-parseable prefix on stderr.
"""

from __future__ import annotations


class ShapnarrError(Exception):
    category = "INTERNAL"


class ModelError(ShapnarrError, ValueError):
    category = "MODEL_PARSE"


class ModelParseError(ModelError):
    """Model or metadata text is not valid JSON (``offset`` is in bytes)."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


class ModelValidationError(ModelError):
    def __init__(self, message: str, tree_index: int | None = None, node_id: int | None = None):
        where = []
        if tree_index is not None:
            where.append(f"tree {tree_index}")
        if node_id is not None:
            where.append(f"node {node_id}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
        self.tree_index = tree_index
        self.node_id = node_id


class UnsupportedOperationError(ModelError):
    pass


class DataError(ShapnarrError, ValueError):
    category = "DATA"

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
        self.row = row
        self.column = column


class SchemaError(DataError):
    pass


class ShapError(ShapnarrError, ValueError):
    category = "SHAP"


class ExactLimitError(ShapError):
    pass


class BackendError(ShapnarrError, RuntimeError):
    category = "BACKEND"


class BackendUnavailableError(BackendError):
    pass


class ProtocolError(BackendError):
    def __init__(self, message: str, status: int | None = None, body: str = ""):
        excerpt = body[:200]
        if status is not None:
            message = f"{message} (status {status}): {excerpt}"
        super().__init__(message)
        self.status = status
        self.body = excerpt


class EmptyGenerationError(BackendError):
    pass


class ExplanationError(ShapnarrError, ValueError):
    category = "VERIFY"


class TemplateError(ExplanationError):
    pass
