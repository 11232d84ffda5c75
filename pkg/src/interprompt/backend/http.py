"""Client for a completion-style JSON HTTP service.

Endpoints (relative to ``base_url``):

* ``POST /completions``      body: model, prompt, max_tokens, temperature, stop
* ``POST /files``            multipart upload, ``purpose=fine-tune``
* ``POST /fine_tunes``       body: training_file, model
* ``GET  /fine_tunes/{id}``
"""

from __future__ import annotations

import logging
import threading
import time
from pathlib import Path

import requests

from .base import (
    AuthError,
    BackendConfig,
    BackendError,
    FineTuneJob,
    JobNotFound,
    ServiceRejection,
    TransportError,
    completion_payload,
    prompt_sha256,
    truncate_at_stop,
    validate_finetune_file,
)

logger = logging.getLogger(__name__)

_STATUS_MAP = {
    "created": "pending",
    "pending": "pending",
    "queued": "pending",
    "validating_files": "pending",
    "running": "running",
    "succeeded": "succeeded",
    "failed": "failed",
    "cancelled": "failed",
}


def _error_message(resp: requests.Response) -> str:
    try:
        body = resp.json()
    except ValueError:
        return resp.text or resp.reason
    err = body.get("error") if isinstance(body, dict) else None
    if isinstance(err, dict) and "message" in err:
        return str(err["message"])
    if isinstance(err, str):
        return err
    return resp.text


def _retry_after(resp: requests.Response) -> float | None:
    value = resp.headers.get("Retry-After")
    if value is None:
        return None
    try:
        return max(0.0, float(value))
    except ValueError:
        return None


class HTTPBackend:
    def __init__(self, config: BackendConfig, session: requests.Session | None = None, sleep=time.sleep):
        self.config = config
        self._session = session or requests.Session()
        self._sleep = sleep
        self._lock = threading.Lock()
        self.request_log: list[dict] = []

    # -- transport ---------------------------------------------------------

    def _url(self, path: str) -> str:
        return self.config.base_url.rstrip("/") + path

    def _headers(self) -> dict:
        if not self.config.api_key:
            raise AuthError("no API key configured (set INTERPROMPT_API_KEY)")
        return {"Authorization": f"Bearer {self.config.api_key}"}

    def _log(self, entry: dict) -> None:
        with self._lock:
            self.request_log.append(entry)

    def _request(self, method: str, path: str, *, tag: str = "", **kwargs) -> dict:
        headers = self._headers()
        retries = 0
        while True:
            started = time.monotonic()
            retry_after = None
            try:
                resp = self._session.request(
                    method, self._url(path), headers=headers, timeout=self.config.timeout, **kwargs
                )
            except requests.RequestException as exc:
                status, failure = None, TransportError(f"{method} {path}: {type(exc).__name__}: {exc}")
            else:
                status = resp.status_code
                failure = None
                if status == 429 or status >= 500:
                    failure = TransportError(f"{method} {path}: HTTP {status}: {_error_message(resp)}")
                    retry_after = _retry_after(resp)
                elif status in (401, 403):
                    raise AuthError(f"{method} {path}: HTTP {status}: {_error_message(resp)}")
                elif status == 404:
                    raise JobNotFound(_error_message(resp))
                elif status >= 400:
                    raise ServiceRejection(_error_message(resp))
            latency = time.monotonic() - started
            self._log({"method": method, "path": path, "status": status, "latency_s": round(latency, 4),
                       "retry": retries, "tag": tag})
            if failure is None:
                try:
                    return resp.json()
                except ValueError:
                    raise BackendError(f"{method} {path}: response is not JSON") from None
            if retries >= self.config.retry_budget:
                raise TransportError(f"{failure} (gave up after {retries} retries)")
            delay = retry_after if retry_after is not None else self.config.backoff_base * (2 ** retries)
            logger.info("retrying %s %s in %.2fs (%s)", method, path, delay, failure)
            self._sleep(delay)
            retries += 1

    # -- operations --------------------------------------------------------

    def complete(self, prompt: str) -> str:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        digest = prompt_sha256(prompt)
        started = time.monotonic()
        body = self._request("POST", "/completions", tag=digest, json=completion_payload(prompt, self.config))
        try:
            text = body["choices"][0]["text"]
        except (KeyError, IndexError, TypeError):
            raise BackendError("completion response lacks choices[0].text") from None
        usage = body.get("usage") or {}
        logger.info(
            "completion prompt=%s model=%s latency=%.3fs prompt_tokens=%s completion_tokens=%s",
            digest[:12], self.config.model_id, time.monotonic() - started,
            usage.get("prompt_tokens"), usage.get("completion_tokens"),
        )
        return truncate_at_stop(text, self.config.stop)

    def submit_finetune(self, records_path) -> FineTuneJob:
        n = validate_finetune_file(records_path)
        path = Path(records_path)
        with path.open("rb") as fh:
            uploaded = self._request(
                "POST", "/files", files={"file": (path.name, fh, "application/jsonl")}, data={"purpose": "fine-tune"}
            )
        file_id = uploaded.get("id")
        if not file_id:
            raise BackendError("file upload response lacks an id")
        body = self._request("POST", "/fine_tunes", json={"training_file": file_id, "model": self.config.model_id})
        logger.info("submitted fine-tune job %s with %d records", body.get("id"), n)
        return self._job_from(body, str(path))

    def poll_finetune(self, job: FineTuneJob) -> FineTuneJob:
        if job.terminal:
            return job
        body = self._request("GET", f"/fine_tunes/{job.job_id}")
        return self._job_from(body, job.training_file)

    @staticmethod
    def _job_from(body: dict, training_file: str) -> FineTuneJob:
        try:
            job_id = str(body["id"])
            status = _STATUS_MAP[str(body.get("status", "pending"))]
        except KeyError as exc:
            raise BackendError(f"unexpected fine-tune response: missing or unknown {exc}") from None
        model = body.get("fine_tuned_model") if status == "succeeded" else None
        if status == "succeeded" and not model:
            raise BackendError(f"job {job_id} succeeded without a fine_tuned_model")
        return FineTuneJob(job_id, training_file, status, model)
