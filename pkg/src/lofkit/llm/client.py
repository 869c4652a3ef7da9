"""Chat-completions HTTP client with retry/backoff and credential hygiene.

Works against any endpoint speaking the usual chat-completions wire shape,
including the bundled replay server. The API credential is read from an
environment variable and never written to a log line.
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass
from typing import Callable

import requests

from ..errors import EndpointError
from .prompts import LlmRequest

logger = logging.getLogger(__name__)

RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})


@dataclass(frozen=True)
class EndpointConfig:
    """Where and how to submit requests; the credential stays in the env."""

    base_url: str
    api_key_env: str = "LOFKIT_API_KEY"
    max_attempts: int = 3
    backoff_base: float = 0.5

    def url(self) -> str:
        return self.base_url.rstrip("/") + "/chat/completions"

    def api_key(self) -> str | None:
        return os.environ.get(self.api_key_env) or None


def submit(
    request: LlmRequest,
    endpoint: EndpointConfig,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """POST the request and return the assistant message text.

    Transport failures and 429/5xx responses are retried with exponential
    backoff up to `max_attempts`; other HTTP errors and malformed bodies
    fail immediately.
    """
    url = endpoint.url()
    headers = {"Content-Type": "application/json"}
    key = endpoint.api_key()
    if key:
        headers["Authorization"] = f"Bearer {key}"

    last_error = "no attempt made"
    for attempt in range(1, endpoint.max_attempts + 1):
        logger.debug("POST %s attempt %d/%d", url, attempt, endpoint.max_attempts)
        try:
            response = requests.post(
                url, json=request.to_payload(), headers=headers, timeout=request.timeout
            )
        except requests.RequestException as exc:
            last_error = f"transport error: {exc.__class__.__name__}"
            logger.warning("request to %s failed (%s), attempt %d", url, last_error, attempt)
        else:
            if response.status_code == 200:
                try:
                    body = response.json()
                except ValueError:
                    raise EndpointError(f"endpoint {url} returned a non-JSON body") from None
                try:
                    content = body["choices"][0]["message"]["content"]
                except (KeyError, IndexError, TypeError):
                    raise EndpointError(
                        f"endpoint {url} returned JSON without choices[0].message.content"
                    ) from None
                logger.debug("completion received from %s (%d chars)", url, len(content))
                return content
            if response.status_code not in RETRYABLE_STATUS:
                raise EndpointError(f"endpoint {url} returned HTTP {response.status_code}")
            last_error = f"HTTP {response.status_code}"
            logger.warning("endpoint %s returned %s, attempt %d", url, last_error, attempt)

        if attempt < endpoint.max_attempts:
            delay = endpoint.backoff_base * 2 ** (attempt - 1)
            logger.debug("backing off %.2fs before retry", delay)
            sleep(delay)

    raise EndpointError(
        f"giving up on {url} after {endpoint.max_attempts} attempts (last: {last_error})"
    )
