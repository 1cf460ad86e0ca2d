class GlueError(Exception):
    """Base class for everything this package raises on purpose."""


class SchemaMismatch(GlueError):
    """An instruction-record line does not match {"instruction","input","output"}."""

    def __init__(self, path: str, line_no: int, reason: str) -> None:
        self.path = str(path)
        self.line_no = line_no  # 1-based, as editors count
        self.reason = reason
        super().__init__(f"{self.path}:{line_no}: {reason}")


class OutOfMemory(GlueError):
    """Allocation failure during training, wrapped with actionable guidance."""


class MergeFailure(GlueError):
    """Checkpoint missing or unreadable when merging adapters for serving."""
