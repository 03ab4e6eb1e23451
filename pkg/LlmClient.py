import datetime
import hashlib
import json
import os
import re
import threading
import time
from abc import ABC, abstractmethod
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Literal, Optional, Sequence

import httpx
import numpy as np
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt, wait_exponential

from printer import Printer

printer = Printer.getInstance()

DEFAULT_MAX_OUTPUT_TOKENS = 4096
ANTHROPIC_VERSION = "2023-06-01"
DEFAULT_COMMENTARY_PATTERN = r"^\s*(?:(?:here is|here's|here\u2019s)\b.*|(?:sure|certainly|of course|below is|the (?:recovered|corrected) text)\b.*:\s*)$"

# Models evaluated in the model comparison, by provider
MODEL_IDS = {
    "claude-3-haiku-20240307": "anthropic",
    "claude-3-opus-20240229": "anthropic",
    "gemma-7b-it": "groq",
    "gpt-3.5-turbo": "openai",
    "gpt-4-turbo-preview": "openai",
    "meta-llama-3-70b-instruct": "groq",
    "mixtral-8x7b-32768": "groq",
}


class ProviderError(Exception):
    def __init__(self, message: str, status: Optional[int] = None, body: str = ""):
        super().__init__(message)
        self.status = status
        self.body = body[:200]


class AuthError(ProviderError):
    pass


class RateLimited(ProviderError):
    pass


class ProviderTimeout(ProviderError):
    pass


class TransientProviderError(ProviderError):
    pass


class EmptyLogprobs(ValueError):
    pass


class PositiveLogprob(ValueError):
    pass


class InvalidResponse(ProviderError):
    pass


@dataclass(frozen=True)
class ChatRequest:
    """
    One chat completion request. document carries the text under correction for the echo provider and is never
    sent to a live API; seed is forwarded where supported. Neither is part of the fixture key.
    """
    user: str
    model_id: str
    system: Optional[str] = None
    temperature: float = 0.0
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    want_logprobs: bool = False
    seed: Optional[int] = None
    document: Optional[str] = None

    def __post_init__(self):
        if len(self.user) == 0:
            raise ValueError("Chat request without user text")
        if not 0 <= self.temperature <= 2:
            raise ValueError(f"Temperature must be in [0, 2], got {self.temperature}")
        if self.max_output_tokens < 1:
            raise ValueError(f"max_output_tokens must be positive, got {self.max_output_tokens}")


def request_key(request: ChatRequest) -> str:
    payload = {"model_id": request.model_id, "system": request.system, "user": request.user, "temperature": request.temperature}
    return hashlib.sha256(json.dumps(payload, sort_keys=True, ensure_ascii=False).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ProviderResponse:
    text: str
    token_logprobs: Optional[tuple[float, ...]] = None


@dataclass
class CorrectionRecord:
    doc_id: str
    model_id: str
    prompt_label: str
    placement: str
    corrected_text: str
    token_logprobs: Optional[list[float]]
    latency: float
    attempt: int
    created_at: str

    def __post_init__(self):
        if self.token_logprobs is not None and any(lp > 0 for lp in self.token_logprobs):
            raise PositiveLogprob(f"Response for '{self.doc_id}' contains positive log probabilities")


WireFormat = Literal["openai", "anthropic", "echo", "replay"]


@dataclass
class ProviderConfig:
    name: str
    wire_format: WireFormat
    base_url: str = ""
    auth_env_var: Optional[str] = None
    max_concurrency: int = 4
    max_attempts: int = 5
    backoff_initial: float = 1.0
    backoff_max: float = 60.0
    timeout: float = 120.0
    fixture_path: Optional[str] = None

    def __post_init__(self):
        if self.max_concurrency < 1:
            raise ValueError(f"max_concurrency of provider '{self.name}' must be at least 1, got {self.max_concurrency}")
        if self.max_attempts < 1:
            raise ValueError(f"max_attempts of provider '{self.name}' must be at least 1, got {self.max_attempts}")
        if self.auth_env_var is None:
            self.auth_env_var = f"CLOCRC_API_KEY_{self.name.upper().replace('-', '_')}"


BUILTIN_PROVIDERS = {
    "echo": ProviderConfig("echo", "echo", max_concurrency=8),
    "replay": ProviderConfig("replay", "replay", max_concurrency=8),
    "openai": ProviderConfig("openai", "openai", base_url="https://api.openai.com/v1/chat/completions"),
    "anthropic": ProviderConfig("anthropic", "anthropic", base_url="https://api.anthropic.com/v1/messages"),
    "groq": ProviderConfig("groq", "openai", base_url="https://api.groq.com/openai/v1/chat/completions"),
}


class Provider(ABC):
    """
    Base for all providers. A rate-limit answer pauses every worker of the provider, not only the one that hit it.
    """

    def __init__(self, config: ProviderConfig):
        self.config = config
        self._pause_lock = threading.Lock()
        self._pause_until = 0.0

    @property
    def is_live(self) -> bool:
        return self.config.wire_format in ("openai", "anthropic")

    def pause(self, seconds: float) -> None:
        with self._pause_lock:
            self._pause_until = max(self._pause_until, time.monotonic() + seconds)

    def wait_if_paused(self) -> None:
        with self._pause_lock:
            remaining = self._pause_until - time.monotonic()
        if remaining > 0:
            time.sleep(remaining)

    @abstractmethod
    def send(self, request: ChatRequest) -> ProviderResponse:
        pass


class EchoProvider(Provider):
    def send(self, request: ChatRequest) -> ProviderResponse:
        return ProviderResponse(request.document if request.document is not None else request.user)


class ReplayProvider(Provider):
    """
    Answers from a JSONL fixture file {"key", "response", "token_logprobs"} keyed by request_key.
    """

    def __init__(self, config: ProviderConfig, fixtures: Optional[dict[str, ProviderResponse]] = None):
        super().__init__(config)
        if fixtures is None:
            if config.fixture_path is None:
                raise ValueError("The replay provider needs a fixture file. Please set the fixtures path.")
            fixtures = load_fixtures(config.fixture_path)
        self.fixtures = fixtures

    def send(self, request: ChatRequest) -> ProviderResponse:
        key = request_key(request)
        if key not in self.fixtures:
            raise ProviderError(f"No replay fixture for request key {key} (model '{request.model_id}')")
        return self.fixtures[key]


def load_fixtures(path: str | Path) -> dict[str, ProviderResponse]:
    fixtures = {}
    with open(path, encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if line.strip() == "":
                continue
            try:
                record = json.loads(line)
                logprobs = record.get("token_logprobs")
                fixtures[str(record["key"])] = ProviderResponse(str(record["response"]), None if logprobs is None else tuple(float(lp) for lp in logprobs))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise ValueError(f"Line {line_number} of fixture file '{path}' is not a valid fixture: {e}") from e
    return fixtures


def write_fixtures(path: str | Path, entries: Iterable[tuple[ChatRequest, str, Optional[Sequence[float]]]], append: bool = False) -> int:
    """
    Writes replay fixtures for (request, response text, token log probabilities) triples.

    :return: Number of fixtures written
    """
    count = 0
    with open(path, "a" if append else "w", encoding="utf-8", newline="\n") as f:
        for request, response, logprobs in entries:
            record = {"key": request_key(request), "response": response, "token_logprobs": None if logprobs is None else list(logprobs)}
            f.write(json.dumps(record, ensure_ascii=False) + "\n")
            count += 1
    return count


class RecordingProvider(Provider):
    """
    Forwards every request to another provider and keeps the successful exchanges, so that a live run can be
    replayed later from the file written by save().
    """

    def __init__(self, inner: Provider):
        super().__init__(inner.config)
        self.inner = inner
        self.entries: list[tuple[ChatRequest, str, Optional[tuple[float, ...]]]] = []
        self._entries_lock = threading.Lock()

    def send(self, request: ChatRequest) -> ProviderResponse:
        response = self.inner.send(request)
        with self._entries_lock:
            self.entries.append((request, response.text, response.token_logprobs))
        return response

    def save(self, path: str | Path) -> int:
        with self._entries_lock:
            entries = list(self.entries)
        return write_fixtures(path, entries)


class HttpChatProvider(Provider):
    def __init__(self, config: ProviderConfig, client: Optional[httpx.Client] = None, api_key: Optional[str] = None):
        super().__init__(config)
        if api_key is None:
            api_key = os.environ.get(config.auth_env_var)
        if api_key is None or api_key == "":
            raise AuthError(f"No API key for provider '{config.name}'. Please set the environment variable '{config.auth_env_var}'.")
        self.api_key = api_key
        self.client = client if client is not None else httpx.Client(timeout=config.timeout)

    @abstractmethod
    def headers(self) -> dict[str, str]:
        pass

    @abstractmethod
    def body(self, request: ChatRequest) -> dict:
        pass

    @abstractmethod
    def parse(self, payload: dict) -> ProviderResponse:
        pass

    def send(self, request: ChatRequest) -> ProviderResponse:
        try:
            response = self.client.post(self.config.base_url, headers=self.headers(), json=self.body(request), timeout=self.config.timeout)
        except httpx.TimeoutException as e:
            raise ProviderTimeout(f"Provider '{self.config.name}' timed out after {self.config.timeout}s") from e
        except httpx.TransportError as e:
            raise TransientProviderError(f"Provider '{self.config.name}' is not reachable: {e}") from e

        status = response.status_code
        if status in (401, 403):
            raise AuthError(f"Provider '{self.config.name}' rejected the credentials from '{self.config.auth_env_var}'", status, response.text)
        if status == 429:
            retry_after = response.headers.get("retry-after")
            self.pause(float(retry_after) if retry_after is not None and retry_after.replace(".", "", 1).isdigit() else self.config.backoff_initial)
            raise RateLimited(f"Provider '{self.config.name}' is rate limiting", status, response.text)
        if status >= 500:
            raise TransientProviderError(f"Provider '{self.config.name}' failed with status {status}", status, response.text)
        if status != 200:
            raise ProviderError(f"Provider '{self.config.name}' returned status {status}: {response.text[:200]}", status, response.text)
        try:
            return self.parse(response.json())
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise ProviderError(f"Provider '{self.config.name}' returned an unexpected body: {response.text[:200]}", status, response.text) from e


class OpenAIChatProvider(HttpChatProvider):
    def headers(self) -> dict[str, str]:
        return {"Authorization": f"Bearer {self.api_key}", "Content-Type": "application/json"}

    def body(self, request: ChatRequest) -> dict:
        messages = []
        if request.system is not None:
            messages.append({"role": "system", "content": request.system})
        messages.append({"role": "user", "content": request.user})
        body = {"model": request.model_id, "messages": messages, "temperature": request.temperature, "max_tokens": request.max_output_tokens}
        if request.want_logprobs:
            body["logprobs"] = True
        if request.seed is not None:
            body["seed"] = request.seed
        return body

    def parse(self, payload: dict) -> ProviderResponse:
        choice = payload["choices"][0]
        text = choice["message"]["content"] or ""
        logprobs = None
        if choice.get("logprobs") is not None and choice["logprobs"].get("content") is not None:
            logprobs = tuple(float(token["logprob"]) for token in choice["logprobs"]["content"])
        return ProviderResponse(text, logprobs)


class AnthropicChatProvider(HttpChatProvider):
    """
    Messages API adapter; this API reports no token log probabilities.
    """

    def headers(self) -> dict[str, str]:
        return {"x-api-key": self.api_key, "anthropic-version": ANTHROPIC_VERSION, "content-type": "application/json"}

    def body(self, request: ChatRequest) -> dict:
        body = {"model": request.model_id, "max_tokens": request.max_output_tokens, "temperature": request.temperature,
                "messages": [{"role": "user", "content": request.user}]}
        if request.system is not None:
            body["system"] = request.system
        return body

    def parse(self, payload: dict) -> ProviderResponse:
        texts = [block["text"] for block in payload["content"] if block.get("type") == "text"]
        return ProviderResponse(texts[0] if len(texts) > 0 else "")


def build_provider(config: ProviderConfig, client: Optional[httpx.Client] = None) -> Provider:
    match config.wire_format:
        case "echo":
            return EchoProvider(config)
        case "replay":
            return ReplayProvider(config)
        case "openai":
            return OpenAIChatProvider(config, client)
        case "anthropic":
            return AnthropicChatProvider(config, client)
        case _:
            raise ValueError(f"Unknown wire format '{config.wire_format}' of provider '{config.name}'")


def strip_commentary(text: str, pattern: str = DEFAULT_COMMENTARY_PATTERN) -> str:
    """
    Removes a leading line matching the pattern (e.g. "Here is the recovered text:").
    """
    first, newline, rest = text.partition("\n")
    if re.match(pattern, first, flags=re.IGNORECASE) is None:
        return text
    return rest.lstrip("\n") if newline else ""


def complete(request: ChatRequest, provider: Provider, doc_id: str = "", prompt_label: str = "", placement: str = "",
             sleep: Callable[[float], None] = time.sleep) -> CorrectionRecord:
    """
    Sends the request, retrying rate limits, timeouts and server errors with exponential backoff.

    :param request: Request to send
    :param provider: Provider to use
    :param doc_id: Provenance of the record
    :param prompt_label: Provenance of the record
    :param placement: Provenance of the record
    :param sleep: Sleep function used between attempts
    :return: CorrectionRecord with the verbatim response (trailing newlines stripped)
    """
    config = provider.config
    start = time.perf_counter()
    attempt_number = 0
    retrying = Retrying(stop=stop_after_attempt(config.max_attempts),
                        wait=wait_exponential(multiplier=config.backoff_initial, max=config.backoff_max),
                        retry=retry_if_exception_type((RateLimited, ProviderTimeout, TransientProviderError)),
                        sleep=sleep, reraise=True)
    for attempt in retrying:
        with attempt:
            attempt_number = attempt.retry_state.attempt_number
            provider.wait_if_paused()
            response = provider.send(request)

    try:
        return CorrectionRecord(doc_id=doc_id, model_id=request.model_id, prompt_label=prompt_label, placement=placement,
                                corrected_text=response.text.rstrip("\n"),
                                token_logprobs=None if response.token_logprobs is None else list(response.token_logprobs),
                                latency=time.perf_counter() - start, attempt=attempt_number,
                                created_at=datetime.datetime.now(datetime.timezone.utc).isoformat())
    except PositiveLogprob as e:
        raise InvalidResponse(f"Provider '{config.name}' sent an unusable response: {e}") from e


@dataclass
class CompletionJob:
    key: str
    request: ChatRequest
    doc_id: str = ""
    prompt_label: str = ""
    placement: str = ""


def submit_all(jobs: Sequence[CompletionJob], provider: Provider, executor: ThreadPoolExecutor) -> list[Future]:
    return [executor.submit(complete, job.request, provider, job.doc_id, job.prompt_label, job.placement) for job in jobs]


def complete_many(jobs: Sequence[CompletionJob], provider: Provider) -> dict[str, CorrectionRecord | ProviderError]:
    """
    Runs the jobs through a pool of provider.config.max_concurrency workers.
    Failures are returned in place of the record instead of aborting the batch, except for AuthError.

    :return: Job key -> record or error, in job order
    """
    results = {}
    with ThreadPoolExecutor(max_workers=provider.config.max_concurrency) as executor:
        futures = submit_all(jobs, provider, executor)
        for job, future in zip(jobs, futures):
            try:
                results[job.key] = future.result()
            except AuthError:
                for pending in futures:
                    pending.cancel()
                raise
            except ProviderError as e:
                results[job.key] = e
    return results


def perplexity(token_logprobs: Sequence[float]) -> float:
    """
    exp of the negated mean token log probability: 1 for a fully certain response, larger means less certain.
    """
    if len(token_logprobs) == 0:
        raise EmptyLogprobs("Perplexity needs at least one token log probability")
    values = np.asarray(token_logprobs, dtype=float)
    if np.any(values > 0):
        raise PositiveLogprob(f"Log probabilities must be <= 0, got a maximum of {values.max()}")
    return float(np.exp(-np.mean(values)))
