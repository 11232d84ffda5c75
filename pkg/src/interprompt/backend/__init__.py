from .base import (
    API_KEY_ENV,
    AuthError,
    Backend,
    BackendConfig,
    BackendError,
    FineTuneJob,
    FineTuneValidationError,
    JobNotFound,
    ServiceRejection,
    TransportError,
    completion_payload,
    file_sha256,
    prompt_sha256,
    validate_finetune_file,
)
from .batch import Prediction, ResponseCache, batch_predict, build_prompt, select_exemplars
from .http import HTTPBackend
from .mock import MockBackend, neither_completion

__all__ = [
    "API_KEY_ENV",
    "AuthError",
    "Backend",
    "BackendConfig",
    "BackendError",
    "FineTuneJob",
    "FineTuneValidationError",
    "HTTPBackend",
    "JobNotFound",
    "MockBackend",
    "Prediction",
    "ResponseCache",
    "ServiceRejection",
    "TransportError",
    "batch_predict",
    "build_prompt",
    "completion_payload",
    "file_sha256",
    "neither_completion",
    "prompt_sha256",
    "select_exemplars",
    "validate_finetune_file",
]
