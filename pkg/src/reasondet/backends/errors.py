"""Error taxonomy for backend calls.

Retryability is a property of the error class, decided once here: the
retry loop in the HTTP clients and the failure mapping in the service
both key off it.
"""

from __future__ import annotations


class BackendError(Exception):
    """Base class for all backend failures."""

    retryable = False

    def __init__(self, message: str, *, stage: str | None = None):
        super().__init__(message)
        self.stage = stage


class BackendTimeoutError(BackendError):
    """The request did not complete within the configured timeout."""

    retryable = True


class ProtocolError(BackendError):
    """The response envelope was malformed; retrying cannot help."""

    retryable = False


class UpstreamError(BackendError):
    """Non-success status from the backend; body attached for diagnosis."""

    def __init__(self, message: str, *, status: int, body: str = "", stage: str | None = None):
        super().__init__(message, stage=stage)
        self.status = status
        self.body = body

    @property
    def retryable(self) -> bool:  # type: ignore[override]
        return self.status >= 500


class CacheMissError(BackendError):
    """A replay backend has no fixture for the request digest."""

    retryable = False

    def __init__(self, digest: str):
        super().__init__(f"no replay fixture for request digest {digest}")
        self.digest = digest


class PreconditionError(BackendError):
    """The request violated a backend precondition; nothing was sent."""

    retryable = False


class PhraseMismatchWarning(UserWarning):
    """The detector returned a phrase that was never requested."""
