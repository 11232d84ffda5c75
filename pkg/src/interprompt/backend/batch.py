from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from ..corpus import Post
from ..prompts import PromptError, PromptTemplate, build_nshot_prompt, inference_prompt
from .base import Backend, BackendError, prompt_sha256

logger = logging.getLogger(__name__)


class ResponseCache:
    """Completions on disk, one JSON file per (model_id, prompt) pair."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(model_id: str, prompt: str) -> str:
        return hashlib.sha256(f"{model_id}\0{prompt}".encode("utf-8")).hexdigest()

    def _path(self, model_id: str, prompt: str) -> Path:
        return self.directory / f"{self.key(model_id, prompt)}.json"

    def get(self, model_id: str, prompt: str) -> str | None:
        path = self._path(model_id, prompt)
        try:
            with path.open(encoding="utf-8") as fh:
                return json.load(fh)["completion"]
        except FileNotFoundError:
            return None
        except (ValueError, KeyError):
            logger.warning("ignoring corrupt cache entry %s", path.name)
            return None

    def put(self, model_id: str, prompt: str, completion: str) -> None:
        path = self._path(model_id, prompt)
        entry = {"model_id": model_id, "prompt_sha256": prompt_sha256(prompt), "completion": completion}
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(entry, fh, ensure_ascii=False)
        os.replace(tmp, path)


@dataclass(frozen=True)
class Prediction:
    post_id: str
    prompt_sha256: str
    completion: str | None
    error: str | None = None
    cached: bool = False


def select_exemplars(pool: Sequence[Post], n: int, target: Post) -> list[Post]:
    """First ``n`` posts of ``pool`` other than the target."""
    chosen = [p for p in pool if p.id != target.id][:n]
    if len(chosen) < n:
        raise PromptError(f"exemplar pool has only {len(chosen)} usable posts, {n} requested")
    return chosen


def build_prompt(post: Post, template: PromptTemplate, shots: int | None = None, pool: Sequence[Post] = ()) -> str:
    """Fine-tuned-model prompt when ``shots`` is None, otherwise an N-shot prompt."""
    if shots is None:
        return inference_prompt(post, template)
    return build_nshot_prompt(post, select_exemplars(pool, shots, post), template)


def batch_predict(
    posts: Sequence[Post],
    template: PromptTemplate,
    backend: Backend,
    *,
    shots: int | None = None,
    exemplar_pool: Sequence[Post] = (),
    cache: ResponseCache | None = None,
) -> list[Prediction]:
    """One prediction per post, in input order.

    At most ``backend.config.max_parallel`` requests run at once. Per-post
    failures land in ``Prediction.error``; the batch always completes.
    """
    model_id = backend.config.model_id

    def run(post: Post) -> Prediction:
        try:
            prompt = build_prompt(post, template, shots, exemplar_pool)
        except PromptError as exc:
            return Prediction(post.id, "", None, f"prompt: {exc}")
        digest = prompt_sha256(prompt)
        if cache is not None:
            hit = cache.get(model_id, prompt)
            if hit is not None:
                return Prediction(post.id, digest, hit, cached=True)
        try:
            text = backend.complete(prompt)
        except BackendError as exc:
            logger.warning("post %s failed: %s", post.id, exc)
            return Prediction(post.id, digest, None, f"{type(exc).__name__}: {exc}")
        if cache is not None:
            cache.put(model_id, prompt, text)
        return Prediction(post.id, digest, text)

    workers = max(1, backend.config.max_parallel)
    if workers == 1:
        return [run(post) for post in posts]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, posts))
