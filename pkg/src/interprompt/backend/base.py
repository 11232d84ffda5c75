from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Protocol

API_KEY_ENV = "INTERPROMPT_API_KEY"
JOB_STATUSES = ("pending", "running", "succeeded", "failed")
TERMINAL = frozenset({"succeeded", "failed"})


class BackendError(RuntimeError):
    """Base class for backend failures."""


class TransportError(BackendError):
    """Network failure, rate limit or server error; retriable."""


class AuthError(BackendError):
    pass


class ServiceRejection(BackendError):
    """The service refused the request; ``str(exc)`` is the service message verbatim."""


class JobNotFound(BackendError):
    pass


class FineTuneValidationError(BackendError):
    """The training file failed local checks; nothing was sent."""


def prompt_sha256(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass(frozen=True)
class BackendConfig:
    base_url: str = "https://api.openai.com/v1"
    api_key: str = field(default="", repr=False)
    model_id: str = "davinci"
    max_tokens: int = 128
    temperature: float = 0.0
    stop: tuple[str, ...] = ("\n###\n",)
    max_parallel: int = 4
    retry_budget: int = 3
    timeout: float = 60.0
    backoff_base: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "stop", tuple(self.stop))
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.max_parallel < 1:
            raise ValueError("max_parallel must be at least 1")
        if self.retry_budget < 0:
            raise ValueError("retry_budget must be non-negative")

    @classmethod
    def from_env(cls, **overrides) -> "BackendConfig":
        overrides.setdefault("api_key", os.environ.get(API_KEY_ENV, ""))
        return cls(**overrides)

    def with_(self, **changes) -> "BackendConfig":
        return replace(self, **changes)

    def public_dict(self) -> dict:
        """Everything except the API key, for manifests and logs."""
        return {
            "base_url": self.base_url,
            "model_id": self.model_id,
            "max_tokens": self.max_tokens,
            "temperature": self.temperature,
            "stop": list(self.stop),
            "max_parallel": self.max_parallel,
            "retry_budget": self.retry_budget,
            "timeout": self.timeout,
            "api_key_set": bool(self.api_key),
        }


@dataclass(frozen=True)
class FineTuneJob:
    job_id: str
    training_file: str
    status: str = "pending"
    result_model_id: str | None = None

    def __post_init__(self):
        if self.status not in JOB_STATUSES:
            raise ValueError(f"unknown job status {self.status!r}")
        if (self.status == "succeeded") != (self.result_model_id is not None):
            raise ValueError("result_model_id must be set exactly when the job succeeded")

    @property
    def terminal(self) -> bool:
        return self.status in TERMINAL


class Backend(Protocol):
    config: BackendConfig

    def complete(self, prompt: str) -> str: ...

    def submit_finetune(self, records_path) -> FineTuneJob: ...

    def poll_finetune(self, job: FineTuneJob) -> FineTuneJob: ...


def completion_payload(prompt: str, config: BackendConfig) -> dict:
    return {
        "model": config.model_id,
        "prompt": prompt,
        "max_tokens": config.max_tokens,
        "temperature": config.temperature,
        "stop": list(config.stop),
    }


def truncate_at_stop(text: str, stops) -> str:
    cut = len(text)
    for stop in stops:
        if stop:
            pos = text.find(stop)
            if 0 <= pos < cut:
                cut = pos
    return text[:cut]


def validate_finetune_file(path) -> int:
    """Check that ``path`` is non-empty JSONL of prompt/completion records; returns the count."""
    path = Path(path)
    if not path.is_file():
        raise FineTuneValidationError(f"training file not found: {path}")
    count = 0
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FineTuneValidationError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict) or set(obj) != {"prompt", "completion"}:
                raise FineTuneValidationError(f"{path}:{lineno}: expected exactly the keys prompt and completion")
            if not all(isinstance(obj[k], str) and obj[k] for k in ("prompt", "completion")):
                raise FineTuneValidationError(f"{path}:{lineno}: prompt and completion must be non-empty strings")
            count += 1
    if count == 0:
        raise FineTuneValidationError(f"training file {path} has no records")
    return count
