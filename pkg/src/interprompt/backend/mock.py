from __future__ import annotations

import threading
import time
from typing import Iterable, Mapping

from ..prompts import PromptTemplate, build_completion
from ..corpus import Post
from .base import (
    BackendConfig,
    FineTuneJob,
    JobNotFound,
    TransportError,
    completion_payload,
    truncate_at_stop,
    validate_finetune_file,
)


def neither_completion(template: PromptTemplate) -> str:
    story = build_completion(Post("fallback", "-", 0, 0), template)
    return template.completion_prefix + story.serialized


class MockBackend:
    """Deterministic in-process backend.

    Known prompts return their fixture completion; unknown prompts return the
    (0, 0) story completion. Prompts in ``fail_prompts`` raise TransportError.
    Fine-tune jobs succeed on the ``polls_to_succeed``-th poll.
    """

    def __init__(
        self,
        config: BackendConfig | None = None,
        fixtures: Mapping[str, str] | None = None,
        template: PromptTemplate | None = None,
        fail_prompts: Iterable[str] = (),
        polls_to_succeed: int = 3,
        fail_polls: Iterable[int] = (),
        latency: float = 0.0,
    ):
        self.config = config or BackendConfig(base_url="mock://", model_id="mock")
        self.fixtures = dict(fixtures or {})
        self.template = template or PromptTemplate()
        self.fail_prompts = set(fail_prompts)
        self.polls_to_succeed = polls_to_succeed
        self.fail_polls = set(fail_polls)
        self.latency = latency
        self.fallback = neither_completion(self.template)
        self.requests: list[dict] = []
        self.in_flight = 0
        self.max_in_flight = 0
        self._jobs: dict[str, dict] = {}
        self._lock = threading.Lock()

    def complete(self, prompt: str) -> str:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        payload = completion_payload(prompt, self.config)
        with self._lock:
            self.requests.append(payload)
            self.in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self.in_flight)
        try:
            if self.latency:
                time.sleep(self.latency)
            if prompt in self.fail_prompts:
                raise TransportError("mock transport failure")
            text = self.fixtures.get(prompt, self.fallback)
            return truncate_at_stop(text, self.config.stop)
        finally:
            with self._lock:
                self.in_flight -= 1

    def submit_finetune(self, records_path) -> FineTuneJob:
        validate_finetune_file(records_path)
        with self._lock:
            job_id = f"ft-mock-{len(self._jobs) + 1}"
            self._jobs[job_id] = {"polls": 0}
        return FineTuneJob(job_id, str(records_path), "pending")

    def poll_finetune(self, job: FineTuneJob) -> FineTuneJob:
        if job.terminal:
            return job
        with self._lock:
            state = self._jobs.get(job.job_id)
            if state is None:
                raise JobNotFound(f"no such job {job.job_id!r}")
            state["polls"] += 1
            n = state["polls"]
        if n in self.fail_polls:
            raise TransportError(f"mock network failure on poll {n}")
        if n >= self.polls_to_succeed:
            return FineTuneJob(job.job_id, job.training_file, "succeeded", f"{self.config.model_id}:{job.job_id}")
        return FineTuneJob(job.job_id, job.training_file, "running")
