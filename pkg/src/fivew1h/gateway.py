"""Dispatch rendered prompts to chat-completions endpoints and log raw responses.

Any backend that speaks the chat-completions JSON protocol (hosted model,
locally served fine-tuned checkpoint) can sit behind an endpoint id; a replay
backend serves canned responses for fully offline, bit-deterministic runs.
Response text is recorded byte-exact with a checksum taken at receipt and is
never post-processed here.
"""
from __future__ import annotations

import hashlib
import json
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .errors import IoFailure, ToolkitError
from .prompting import RenderedPrompt

DETERMINISTIC_TIMESTAMP = "1970-01-01T00:00:00Z"


@dataclass(frozen=True)
class DecodingParams:
    top_p: float = 0.95
    temperature: float = 0.7
    max_tokens: int = 2000

    def __post_init__(self):
        if not (0.0 < self.top_p <= 1.0):
            raise ValueError(f"top_p must be in (0, 1], got {self.top_p}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be nonnegative, got {self.temperature}")
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens must be positive, got {self.max_tokens}")


@dataclass
class ExtractionRequest:
    article_id: str
    prompt: RenderedPrompt
    endpoint: str
    params: DecodingParams = field(default_factory=DecodingParams)
    attempts: int = 0


@dataclass(frozen=True)
class RawResponse:
    article_id: str
    raw_text: str
    latency_s: float
    endpoint: str
    finish_reason: str
    timestamp: str
    checksum: str

    def to_payload(self) -> dict:
        return {
            "article_id": self.article_id,
            "raw_text": self.raw_text,
            "latency_s": self.latency_s,
            "endpoint": self.endpoint,
            "finish_reason": self.finish_reason,
            "timestamp": self.timestamp,
            "checksum": self.checksum,
        }


def text_checksum(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class EndpointUnreachable(ToolkitError):
    pass


class RateLimited(ToolkitError):
    pass


class ContextLengthExceeded(ToolkitError):
    """Prompt too long for the endpoint; recorded as a skip, never retried."""


class FixtureMissingArticle(ToolkitError):
    pass


class TransientBackendError(ToolkitError):
    """Internal: a retryable transport-level failure."""

    def __init__(self, message: str, rate_limited: bool = False):
        super().__init__(message)
        self.rate_limited = rate_limited


class Backend:
    """One configured completion endpoint."""

    name: str = "backend"
    # Deterministic backends get zeroed latency and a fixed timestamp so an
    # offline run log is byte-identical across executions.
    deterministic: bool = False

    def complete(self, request: ExtractionRequest) -> tuple[str, str]:
        """Return (raw_text, finish_reason) for one request."""
        raise NotImplementedError


class HttpChatBackend(Backend):
    """POSTs to a chat-completions route; credential read from the environment."""

    def __init__(
        self,
        name: str,
        base_url: str,
        model: str,
        api_key: str | None = None,
        timeout_s: float = 120.0,
        session: requests.Session | None = None,
    ):
        self.name = name
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.timeout_s = timeout_s
        self.session = session or requests.Session()

    def complete(self, request: ExtractionRequest) -> tuple[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt.text}],
            "top_p": request.params.top_p,
            "temperature": request.params.temperature,
            "max_tokens": request.params.max_tokens,
        }
        try:
            response = self.session.post(
                f"{self.base_url}/chat/completions",
                json=body,
                headers=headers,
                timeout=self.timeout_s,
            )
        except requests.RequestException as exc:
            raise TransientBackendError(f"transport failure: {exc}") from exc

        if response.status_code == 429:
            raise TransientBackendError("rate limited (429)", rate_limited=True)
        if response.status_code >= 500:
            raise TransientBackendError(f"server error ({response.status_code})")
        if response.status_code == 413 or (
            response.status_code == 400 and "context" in response.text.lower()
        ):
            raise ContextLengthExceeded(
                f"{self.name}: prompt for {request.article_id} exceeds the context window"
            )
        if response.status_code != 200:
            raise EndpointUnreachable(
                f"{self.name}: unexpected status {response.status_code}: {response.text[:200]}"
            )

        payload = response.json()
        try:
            choice = payload["choices"][0]
            return choice["message"]["content"], choice.get("finish_reason", "stop")
        except (KeyError, IndexError, TypeError) as exc:
            raise EndpointUnreachable(f"{self.name}: malformed completion payload") from exc


class ReplayBackend(Backend):
    """Returns canned responses keyed by article id."""

    deterministic = True

    def __init__(self, name: str, responses: dict[str, str]):
        self.name = name
        self.responses = responses

    def complete(self, request: ExtractionRequest) -> tuple[str, str]:
        if request.article_id not in self.responses:
            raise FixtureMissingArticle(
                f"replay fixture has no response for article {request.article_id!r}"
            )
        return self.responses[request.article_id], "stop"


class EndpointRegistry:
    def __init__(self):
        self._backends: dict[str, Backend] = {}

    def register(self, backend: Backend) -> str:
        self._backends[backend.name] = backend
        return backend.name

    def get(self, name: str) -> Backend:
        try:
            return self._backends[name]
        except KeyError:
            raise EndpointUnreachable(f"no endpoint registered under {name!r}") from None


DEFAULT_REGISTRY = EndpointRegistry()


def replay_backend(
    fixture_path: str | Path, registry: EndpointRegistry = DEFAULT_REGISTRY
) -> str:
    """Register a replay endpoint from a fixture file and return its id.

    The fixture is either a JSON object mapping article_id -> raw_text, or a
    JSON Lines file with article_id / raw_text fields (a previous run log
    works as-is).
    """
    path = Path(fixture_path)
    try:
        content = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read replay fixture {path}: {exc}") from exc

    responses: dict[str, str] = {}
    try:
        payload = json.loads(content)
    except json.JSONDecodeError:
        payload = None
    if isinstance(payload, dict):
        responses = {str(k): str(v) for k, v in payload.items()}
    else:
        for line in content.splitlines():
            if not line.strip():
                continue
            record = json.loads(line)
            responses[record["article_id"]] = record["raw_text"]
    return registry.register(ReplayBackend(name=f"replay:{path.stem}", responses=responses))


def load_endpoint_config(
    path: str | Path,
    registry: EndpointRegistry = DEFAULT_REGISTRY,
    environ: dict | None = None,
) -> str:
    """Register an HTTP endpoint from a JSON config file and return its id.

    Config: {"name": ..., "base_url": ..., "model": ..., "api_key_env": ...};
    the credential is read only from the named environment variable.
    """
    import os

    path = Path(path)
    try:
        config = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot read endpoint config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IoFailure(f"endpoint config {path} is not valid JSON: {exc}") from exc

    env = environ if environ is not None else os.environ
    api_key = env.get(config["api_key_env"]) if config.get("api_key_env") else None
    backend = HttpChatBackend(
        name=config["name"],
        base_url=config["base_url"],
        model=config["model"],
        api_key=api_key,
    )
    return registry.register(backend)


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 5
    base_delay_s: float = 0.5
    max_delay_s: float = 30.0
    jitter_seed: int | None = None

    def delays(self):
        rng = random.Random(self.jitter_seed)
        for attempt in range(self.max_attempts - 1):
            backoff = min(self.base_delay_s * (2**attempt), self.max_delay_s)
            yield backoff * (0.5 + rng.random())


def send_request(
    request: ExtractionRequest,
    registry: EndpointRegistry = DEFAULT_REGISTRY,
    retry: RetryPolicy = RetryPolicy(),
    sleep=time.sleep,
) -> RawResponse:
    """Dispatch one request with retries on transport and rate-limit failures.

    The attempt counter on the request records how many completions were
    attempted. Context-length failures are surfaced immediately so the run
    can record a skip instead of burning retries.
    """
    backend = registry.get(request.endpoint)
    delays = retry.delays()
    request.attempts = 0
    last_error: TransientBackendError | None = None
    while request.attempts < retry.max_attempts:
        request.attempts += 1
        started = time.monotonic()
        try:
            raw_text, finish_reason = backend.complete(request)
        except TransientBackendError as exc:
            last_error = exc
            try:
                sleep(next(delays))
            except StopIteration:
                break
            continue
        latency = 0.0 if backend.deterministic else time.monotonic() - started
        timestamp = (
            DETERMINISTIC_TIMESTAMP
            if backend.deterministic
            else time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
        )
        return RawResponse(
            article_id=request.article_id,
            raw_text=raw_text,
            latency_s=round(latency, 6),
            endpoint=request.endpoint,
            finish_reason=finish_reason,
            timestamp=timestamp,
            checksum=text_checksum(raw_text),
        )

    if last_error is not None and last_error.rate_limited:
        raise RateLimited(f"{request.endpoint}: retries exhausted: {last_error}")
    raise EndpointUnreachable(f"{request.endpoint}: retries exhausted: {last_error}")


@dataclass
class BatchManifest:
    requested: int = 0
    completed: int = 0
    failed: int = 0
    skipped: int = 0
    error_counts: dict[str, int] = field(default_factory=dict)

    def record_error(self, error: Exception) -> None:
        name = type(error).__name__
        self.error_counts[name] = self.error_counts.get(name, 0) + 1

    def to_payload(self) -> dict:
        return {
            "requested": self.requested,
            "completed": self.completed,
            "failed": self.failed,
            "skipped": self.skipped,
            "error_counts": dict(self.error_counts),
        }


def _logged_article_ids(run_path: Path) -> set[str]:
    if not run_path.exists():
        return set()
    logged = set()
    for line in run_path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        logged.add(json.loads(line)["article_id"])
    return logged


def run_batch(
    requests_: list[ExtractionRequest],
    run_path: str | Path,
    max_in_flight: int = 4,
    registry: EndpointRegistry = DEFAULT_REGISTRY,
    retry: RetryPolicy = RetryPolicy(),
    sleep=time.sleep,
) -> BatchManifest:
    """Issue requests with bounded concurrency, appending responses to a run log.

    The log is append-only JSON Lines written in request order, so a crashed
    run leaves a valid prefix. Rerunning with the same run_path resumes and
    skips article ids that are already logged.
    """
    run_path = Path(run_path)
    manifest = BatchManifest(requested=len(requests_))

    already = _logged_article_ids(run_path)
    pending = []
    for request in requests_:
        if request.article_id in already:
            manifest.skipped += 1
        else:
            pending.append(request)

    if not pending:
        return manifest

    try:
        with run_path.open("a", encoding="utf-8") as log, ThreadPoolExecutor(
            max_workers=max(1, max_in_flight)
        ) as pool:
            futures = [
                pool.submit(send_request, request, registry, retry, sleep)
                for request in pending
            ]
            # Consume in submission order: a single log writer, deterministic
            # line order, and any crash still leaves an in-order prefix.
            for future in futures:
                try:
                    response = future.result()
                except ContextLengthExceeded as exc:
                    manifest.skipped += 1
                    manifest.record_error(exc)
                except ToolkitError as exc:
                    manifest.failed += 1
                    manifest.record_error(exc)
                else:
                    log.write(json.dumps(response.to_payload(), ensure_ascii=False))
                    log.write("\n")
                    log.flush()
                    manifest.completed += 1
    except OSError as exc:
        raise IoFailure(f"cannot write run log {run_path}: {exc}") from exc
    return manifest


def load_run_log(path: str | Path) -> list[RawResponse]:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read run log {path}: {exc}") from exc
    responses = []
    for line in lines:
        if not line.strip():
            continue
        payload = json.loads(line)
        responses.append(RawResponse(**payload))
    return responses
