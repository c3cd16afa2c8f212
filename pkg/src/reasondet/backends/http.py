"""Live HTTP clients for the three backends.

Each client wraps one endpoint with timeout, bounded retries with
exponential backoff and jitter, a token-bucket rate limit and a
concurrent-request cap. Retries fire only for timeouts and 5xx-class
upstream errors; protocol errors and 4xx responses are terminal.
"""

from __future__ import annotations

import os
import random
import threading
import time
from typing import Any, Callable, Sequence

import httpx

from ..domain import DetectionRecord, ImageRef, ObjectPhrase
from ..prompts import ChatMessage
from . import (
    DEFAULT_BOX_THRESHOLD,
    EndpointConfig,
    ReasonerCapabilities,
    check_complete_request,
    check_detect_request,
    check_reason_request,
    enforce_detection_contract,
)
from .errors import BackendError, BackendTimeoutError, ProtocolError, UpstreamError
from .wire import (
    decode_completion,
    decode_detections,
    encode_detection_request,
    encode_messages,
)


class TokenBucket:
    """Thread-safe token bucket; ``acquire`` blocks until a token is free."""

    def __init__(self, rate_per_sec: float, burst: int = 1, clock: Callable[[], float] = time.monotonic):
        self.rate = rate_per_sec
        self.burst = max(1, burst)
        self.tokens = float(self.burst)
        self.clock = clock
        self.updated = clock()
        self._lock = threading.Lock()

    def _refill(self) -> None:
        now = self.clock()
        self.tokens = min(self.burst, self.tokens + (now - self.updated) * self.rate)
        self.updated = now

    def try_acquire(self) -> float:
        """Take a token if available; otherwise return the wait in seconds."""
        with self._lock:
            self._refill()
            if self.tokens >= 1.0:
                self.tokens -= 1.0
                return 0.0
            return (1.0 - self.tokens) / self.rate

    def acquire(self, sleep: Callable[[float], None] = time.sleep) -> None:
        while True:
            wait = self.try_acquire()
            if wait <= 0.0:
                return
            sleep(wait)


class HttpBackendBase:
    """Shared transport: one httpx client, retry loop, rate limiting."""

    def __init__(
        self,
        config: EndpointConfig,
        *,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
    ):
        self.config = config
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._bucket = TokenBucket(config.rate_per_sec, burst=max(1, int(config.rate_per_sec)))
        self._slots = threading.Semaphore(config.max_concurrency)
        headers = {}
        if config.auth_token_env:
            token = os.environ.get(config.auth_token_env, "")
            if token:
                headers["Authorization"] = f"Bearer {token}"
        self._client = httpx.Client(
            base_url=config.base_url,
            timeout=config.timeout_ms / 1000.0,
            headers=headers,
            transport=transport,
        )

    def close(self) -> None:
        self._client.close()

    def _post(self, path: str, payload: dict) -> Any:
        """POST with retries; returns the decoded JSON body."""
        last: BackendError | None = None
        for attempt in range(self.config.retries + 1):
            if attempt > 0:
                backoff = self.config.backoff_base_ms / 1000.0 * (2 ** (attempt - 1))
                self._sleep(backoff + self._rng.uniform(0, backoff))
            self._bucket.acquire(self._sleep)
            with self._slots:
                try:
                    resp = self._client.post(path, json=payload)
                except httpx.TimeoutException as e:
                    last = BackendTimeoutError(f"timeout after {self.config.timeout_ms} ms: {e}")
                    continue
                except httpx.HTTPError as e:
                    last = BackendTimeoutError(f"transport failure: {e}")
                    continue
            if resp.status_code >= 400:
                err = UpstreamError(
                    f"upstream status {resp.status_code}",
                    status=resp.status_code,
                    body=resp.text[:2048],
                )
                if not err.retryable:
                    raise err
                last = err
                continue
            try:
                return resp.json()
            except ValueError as e:
                raise ProtocolError(f"response body is not JSON: {e}") from e
        assert last is not None
        raise last


class HttpReasoner(HttpBackendBase):
    """Chat-completion client for the multimodal reasoner endpoint."""

    def __init__(self, config: EndpointConfig, capabilities: ReasonerCapabilities | None = None, **kw):
        super().__init__(config, **kw)
        self.capabilities = capabilities or ReasonerCapabilities()

    def reason(self, image: ImageRef, messages: Sequence[ChatMessage]) -> str:
        check_reason_request(image, messages)
        if len(messages) > self.capabilities.max_messages:
            raise ProtocolError(f"too many messages for backend: {len(messages)}")
        body = self._post("/chat/completions", {"messages": encode_messages(messages, self.capabilities.image_modes)})
        return decode_completion(body)


class HttpDetector(HttpBackendBase):
    """Client for the open-vocabulary detection endpoint."""

    def __init__(self, config: EndpointConfig, box_threshold: float = DEFAULT_BOX_THRESHOLD, **kw):
        super().__init__(config, **kw)
        if not (0.0 < box_threshold < 1.0):
            raise ValueError(f"box_threshold must be in (0,1), got {box_threshold}")
        self.box_threshold = box_threshold

    def detect(
        self, image: ImageRef, phrases: Sequence[ObjectPhrase], threshold: float
    ) -> list[DetectionRecord]:
        check_detect_request(phrases, threshold)
        body = self._post("/detect", encode_detection_request(image, phrases, threshold))
        return enforce_detection_contract(phrases, decode_detections(body), threshold)


class HttpTextLLM(HttpBackendBase):
    """Text-only chat-completion client (datagen)."""

    def complete_text(self, messages: Sequence[ChatMessage]) -> str:
        check_complete_request(messages)
        body = self._post("/chat/completions", {"messages": encode_messages(messages)})
        return decode_completion(body)
