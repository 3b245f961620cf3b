"""Exception hierarchy shared by the loaders, pool and CLI."""


class ExpragError(Exception):
    """Base class for all library errors."""


class DataError(ExpragError, ValueError):
    """Input data is missing, malformed or inconsistent."""


class MalformedRecordError(DataError):
    def __init__(self, path, line_no: int, reason: str):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {reason}")


class DuplicateIdError(DataError):
    def __init__(self, path, line_no: int, record_id: str):
        self.path = str(path)
        self.line_no = line_no
        self.record_id = record_id
        super().__init__(f"{path}:{line_no}: duplicate id {record_id!r}")


class RetrievalError(ExpragError):
    """A retrieval call failed; carries the query id when known."""

    def __init__(self, message: str, query_id: str | None = None):
        self.query_id = query_id
        prefix = f"query {query_id!r}: " if query_id is not None else ""
        super().__init__(prefix + message)
