"""Combined three-span story-completion loss, checked on a toy conditional bigram model.

The toy model scores completion token ``t`` of a record with

    logits = W[span_t, prev_t] + bag(prompt) @ U[span_t]

where ``span_t`` is 0 (label section), 1 (TBe cue section) or 2 (PBu cue
section), ``prev_t`` is the preceding token within the section (the reserved
``SECTION_START`` token for a section's first token) and ``bag`` is the
presence vector of the prompt tokens. Each section is therefore scored given
only the post and its own prompt, and the three per-section losses are
separate terms.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .corpus import Post, normalize
from .prompts import PromptTemplate, build_completion

logger = logging.getLogger(__name__)

N_SPANS = 3
SECTION_START = "<s>"
DIVERGENCE_LIMIT = 1e6


class GradientCheckError(ArithmeticError):
    pass


@dataclass(frozen=True)
class LossConfig:
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 1.0

    def __post_init__(self):
        weights = self.weights
        if any(not math.isfinite(w) or w < 0 for w in weights):
            raise ValueError(f"loss weights must be finite and non-negative, got {weights}")
        if not any(w > 0 for w in weights):
            raise ValueError("at least one loss weight must be positive")

    @property
    def weights(self) -> tuple[float, float, float]:
        return (self.lambda1, self.lambda2, self.lambda3)


@dataclass(frozen=True)
class TokenDistributionSequence:
    vocab_size: int
    steps: np.ndarray

    def __post_init__(self):
        steps = np.asarray(self.steps, dtype=np.float64)
        if steps.ndim == 1 and steps.size == 0:
            steps = steps.reshape(0, self.vocab_size)
        object.__setattr__(self, "steps", steps)
        if self.vocab_size < 1 or steps.ndim != 2 or steps.shape[1] != self.vocab_size:
            raise ValueError(f"steps must have shape (E, {self.vocab_size}), got {steps.shape}")
        if np.any(steps < 0) or np.any(steps > 1):
            raise ValueError("probabilities must lie in [0, 1]")
        if steps.size and np.max(np.abs(steps.sum(axis=1) - 1.0)) > 1e-9:
            raise ValueError("each step must sum to 1 within 1e-9")

    def __len__(self) -> int:
        return self.steps.shape[0]


def _nll(predicted: TokenDistributionSequence, target: Sequence[int]) -> float:
    target = np.asarray(target, dtype=np.int64)
    if target.shape != (len(predicted),):
        raise ValueError(f"target length {target.size} != number of steps {len(predicted)}")
    if target.size and (target.min() < 0 or target.max() >= predicted.vocab_size):
        raise ValueError("target ids out of vocabulary range")
    probs = predicted.steps[np.arange(target.size), target]
    if np.any(probs == 0.0):
        logger.debug("zero probability assigned to a target token; loss is +inf")
        return math.inf
    return float(-np.log(probs).sum())


def loss_entity(predicted: TokenDistributionSequence, target: Sequence[int]) -> float:
    """Token-level cross-entropy of the label section.

    Returns ``math.inf`` when a target token has probability zero.
    """
    return _nll(predicted, target)


def loss_generation(predicted: TokenDistributionSequence, target: Sequence[int]) -> float:
    """Negative log-likelihood of a cue section's continuation given its prompt."""
    return _nll(predicted, target)


def combined_loss(l1: float, l2: float, l3: float, config: LossConfig = LossConfig()) -> float:
    total = 0.0
    for weight, value in zip(config.weights, (l1, l2, l3)):
        if weight == 0:
            continue
        if math.isinf(value):
            return math.inf
        total += weight * value
    return total


# ---------------------------------------------------------------------------
# toy model
# ---------------------------------------------------------------------------


def toy_tokenize(text: str) -> list[str]:
    return text.casefold().split()


@dataclass(frozen=True)
class ToyRecord:
    """Token ids of a prompt and its completion, plus the section of each completion token."""

    prompt: tuple[int, ...]
    completion: tuple[int, ...]
    spans: tuple[int, ...]

    def __post_init__(self):
        if not self.prompt:
            raise ValueError("prompt must have at least one token")
        if len(self.completion) != len(self.spans):
            raise ValueError("completion and spans must have equal length")
        if any(s not in (0, 1, 2) for s in self.spans):
            raise ValueError("span ids must be 0, 1 or 2")


@dataclass
class ToyModel:
    vocab: list[str]
    W: np.ndarray
    U: np.ndarray
    learning_rate: float = 0.5
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        V = len(self.vocab)
        self.W = np.asarray(self.W, dtype=np.float64)
        self.U = np.asarray(self.U, dtype=np.float64)
        if self.W.shape != (N_SPANS, V, V) or self.U.shape != (N_SPANS, V, V):
            raise ValueError(f"parameter tables must have shape {(N_SPANS, V, V)}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        self.index = {tok: i for i, tok in enumerate(self.vocab)}
        if len(self.index) != V:
            raise ValueError("vocabulary has duplicate tokens")
        if not self.vocab or self.vocab[0] != SECTION_START:
            raise ValueError(f"vocab[0] must be the section-start token {SECTION_START!r}")

    @classmethod
    def init(cls, vocab: Sequence[str], seed: int = 0, scale: float = 0.01, learning_rate: float = 0.5) -> "ToyModel":
        rng = np.random.default_rng(seed)
        V = len(vocab)
        return cls(
            list(vocab),
            rng.normal(0.0, scale, (N_SPANS, V, V)),
            rng.normal(0.0, scale, (N_SPANS, V, V)),
            learning_rate,
        )

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def copy(self) -> "ToyModel":
        return ToyModel(list(self.vocab), self.W.copy(), self.U.copy(), self.learning_rate)

    def bag(self, prompt: Sequence[int]) -> np.ndarray:
        vec = np.zeros(self.vocab_size)
        vec[list(set(prompt))] = 1.0
        return vec

    def distribution(self, prompt: Sequence[int], prev: int, span: int) -> np.ndarray:
        """Next-token probabilities, computed directly (independent of the batch kernels)."""
        logits = self.W[span, prev] + self.bag(prompt) @ self.U[span]
        logits = logits - logits.max()
        p = np.exp(logits)
        return p / p.sum()

    def encode(self, tokens: Sequence[str]) -> tuple[int, ...]:
        try:
            return tuple(self.index[t] for t in tokens)
        except KeyError as exc:
            raise KeyError(f"token {exc.args[0]!r} not in the toy vocabulary") from None


@dataclass
class _Batch:
    bags: np.ndarray
    rec: np.ndarray
    span: np.ndarray
    prev: np.ndarray
    nxt: np.ndarray

    @property
    def n_tokens(self) -> int:
        return int(self.nxt.size)


def _contexts(record: ToyRecord):
    """(span, previous token, target) triples; the context resets at every section start."""
    context, last_span = 0, None
    for tok, s in zip(record.completion, record.spans):
        if s != last_span:
            context, last_span = 0, s
        yield s, context, tok
        context = tok


def _batch(model: ToyModel, records: Sequence[ToyRecord]) -> _Batch:
    rec, span, prev, nxt = [], [], [], []
    for r, record in enumerate(records):
        for s, context, tok in _contexts(record):
            rec.append(r)
            span.append(s)
            prev.append(context)
            nxt.append(tok)
    ids = np.array([*prev, *nxt, *(t for r in records for t in r.prompt)], dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= model.vocab_size):
        raise ValueError("record token ids out of vocabulary range")
    bags = np.stack([model.bag(r.prompt) for r in records]) if records else np.zeros((0, model.vocab_size))
    as_int = lambda xs: np.asarray(xs, dtype=np.int64)  # noqa: E731
    return _Batch(bags, as_int(rec), as_int(span), as_int(prev), as_int(nxt))


def _token_weights(batch: _Batch, config: LossConfig) -> np.ndarray:
    # mean over records of the per-record combined loss
    lam = np.asarray(config.weights, dtype=np.float64)
    return lam[batch.span] / max(batch.bags.shape[0], 1)


def objective_and_grad(model: ToyModel, records: Sequence[ToyRecord], config: LossConfig = LossConfig()):
    """Mean per-record combined loss and its gradient (dW, dU)."""
    batch = _batch(model, records)
    weights = _token_weights(batch, config)
    loss, dW, dU = kernels.toy_loss_grad(model.W, model.U, batch.bags, batch.rec, batch.span, batch.prev, batch.nxt, weights)
    return float(loss), dW, dU


def objective(model: ToyModel, records: Sequence[ToyRecord], config: LossConfig = LossConfig()) -> float:
    return objective_and_grad(model, records, config)[0]


def span_distributions(model: ToyModel, record: ToyRecord) -> list[tuple[TokenDistributionSequence, list[int]]]:
    """Per-section predicted distributions and targets, via :meth:`ToyModel.distribution`."""
    steps: list[list[np.ndarray]] = [[] for _ in range(N_SPANS)]
    targets: list[list[int]] = [[] for _ in range(N_SPANS)]
    for s, context, tok in _contexts(record):
        steps[s].append(model.distribution(record.prompt, context, s))
        targets[s].append(tok)
    V = model.vocab_size
    return [
        (TokenDistributionSequence(V, np.array(steps[s]) if steps[s] else np.zeros((0, V))), targets[s])
        for s in range(N_SPANS)
    ]


def record_span_losses(model: ToyModel, record: ToyRecord) -> tuple[float, float, float]:
    (d1, t1), (d2, t2), (d3, t3) = span_distributions(model, record)
    return loss_entity(d1, t1), loss_generation(d2, t2), loss_generation(d3, t3)


def reference_objective(model: ToyModel, records: Sequence[ToyRecord], config: LossConfig = LossConfig()) -> float:
    """Same value as :func:`objective`, assembled from the per-section loss functions."""
    total = sum(combined_loss(*record_span_losses(model, r), config) for r in records)
    return total / max(len(records), 1)


def gradient_check(
    model: ToyModel,
    records: Sequence[ToyRecord],
    config: LossConfig = LossConfig(),
    h: float = 1e-5,
    floor: float = 1e-6,
) -> float:
    """Max relative error between the analytic gradient and central differences.

    Every entry of W and U is perturbed. The relative error of an entry is
    ``|a - n| / max(|a|, |n|, floor)``.
    """
    if model.vocab_size > 64 or len(records) > 5:
        raise ValueError("gradient_check is meant for vocab <= 64 and at most 5 records")
    loss, dW, dU = objective_and_grad(model, records, config)
    if not math.isfinite(loss):
        raise GradientCheckError(f"objective is not finite ({loss}); check aborted")
    batch = _batch(model, records)
    weights = _token_weights(batch, config)

    def f(W, U):
        value = kernels.toy_loss_grad(W, U, batch.bags, batch.rec, batch.span, batch.prev, batch.nxt, weights)[0]
        if not math.isfinite(value):
            raise GradientCheckError("objective became non-finite under perturbation")
        return value

    worst = 0.0
    W = model.W.copy()
    U = model.U.copy()
    for table, analytic in ((W, dW), (U, dU)):
        flat = table.reshape(-1)
        grad = analytic.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = f(W, U)
            flat[i] = orig - h
            down = f(W, U)
            flat[i] = orig
            numeric = (up - down) / (2 * h)
            err = abs(grad[i] - numeric) / max(abs(grad[i]), abs(numeric), floor)
            worst = max(worst, err)
    return worst


@dataclass
class TrainResult:
    trajectory: list[float]
    diverged: bool = False
    message: str = ""


def train_toy(
    model: ToyModel,
    records: Sequence[ToyRecord],
    epochs: int,
    config: LossConfig = LossConfig(),
) -> TrainResult:
    """Full-batch gradient descent; updates ``model`` in place.

    ``trajectory[e]`` is the objective at the start of epoch ``e``.
    """
    if epochs < 0:
        raise ValueError("epochs must be non-negative")
    if epochs and not records:
        raise ValueError("no training records")
    trajectory: list[float] = []
    if epochs == 0:
        return TrainResult(trajectory)
    batch = _batch(model, records)
    weights = _token_weights(batch, config)
    lr = model.learning_rate
    for epoch in range(epochs):
        loss, dW, dU = kernels.toy_loss_grad(model.W, model.U, batch.bags, batch.rec, batch.span, batch.prev, batch.nxt, weights)
        loss = float(loss)
        trajectory.append(loss)
        if not math.isfinite(loss) or loss > DIVERGENCE_LIMIT:
            message = f"diverged at epoch {epoch}: loss {loss:.6g}"
            logger.warning(message)
            return TrainResult(trajectory, True, message)
        model.W -= lr * dW
        model.U -= lr * dU
    return TrainResult(trajectory)


# ---------------------------------------------------------------------------
# posts -> toy records
# ---------------------------------------------------------------------------


def completion_sections(post: Post, template: PromptTemplate) -> tuple[str, str, str]:
    """The completion text split into its label, TBe-cue and PBu-cue sections (stop included in the last)."""
    story = build_completion(post, template)
    return (
        template.completion_prefix + template.rho1_prefix + story.label_phrase,
        template.rho2_prefix + story.tbe_cue,
        template.rho3_prefix + story.pbu_cue + template.stop_sequence,
    )


def build_vocab(posts: Sequence[Post], template: PromptTemplate) -> list[str]:
    seen: dict[str, None] = {SECTION_START: None}
    for post in posts:
        for piece in (post.text + template.separator, *completion_sections(post, template)):
            for tok in toy_tokenize(piece):
                seen.setdefault(tok, None)
    return list(seen)


def encode_post(model: ToyModel, post: Post, template: PromptTemplate) -> ToyRecord:
    prompt = model.encode(toy_tokenize(post.text + template.separator))
    completion: list[int] = []
    spans: list[int] = []
    for s, section in enumerate(completion_sections(post, template)):
        ids = model.encode(toy_tokenize(section))
        completion.extend(ids)
        spans.extend([s] * len(ids))
    return ToyRecord(prompt, tuple(completion), tuple(spans))


def predict_labels(model: ToyModel, post: Post, template: PromptTemplate) -> tuple[int, int]:
    """Label pair whose phrase has the highest label-section log-likelihood.

    Prompt tokens outside the vocabulary are ignored.
    """
    prompt = tuple(model.index[t] for t in toy_tokenize(post.text + template.separator) if t in model.index)
    if not prompt:
        prompt = (0,)
    head = model.encode(toy_tokenize(template.completion_prefix + template.rho1_prefix))
    best, best_score = None, -math.inf
    for pair, phrase in template.label_lexicon.items():
        prev = head[-1] if head else 0
        score = 0.0
        for tok in model.encode(toy_tokenize(phrase)):
            p = model.distribution(prompt, prev, 0)[tok]
            score += math.log(p) if p > 0 else -math.inf
            prev = tok
        if best is None or score > best_score:
            best, best_score = pair, score
    return best


def label_accuracy(model: ToyModel, posts: Sequence[Post], template: PromptTemplate) -> float:
    hits = sum(predict_labels(model, post, template) == post.labels for post in posts)
    return hits / len(posts)


# ---------------------------------------------------------------------------
# fixtures
# ---------------------------------------------------------------------------

MEMORIZE_POSTS = (
    Post("m-00", "sunny garden tulips bloom", 0, 0),
    Post("m-10", "nobody ever calls", 1, 0, tbe_cue="nobody ever calls"),
    Post("m-01", "draining their savings", 0, 1, pbu_cue="draining their savings"),
    Post("m-11", "friends vanished debts pile", 1, 1, tbe_cue="friends vanished", pbu_cue="debts pile"),
)


def toy_problem(posts: Sequence[Post], template: PromptTemplate | None = None, seed: int = 0, learning_rate: float = 0.5):
    """Vocabulary, fresh model and encoded records for a list of posts."""
    template = template or PromptTemplate()
    model = ToyModel.init(build_vocab(posts, template), seed=seed, learning_rate=learning_rate)
    return model, [encode_post(model, post, template) for post in posts]


def random_toy_problem(seed: int, max_vocab: int = 12, max_records: int = 5):
    """Small random model and records for gradient checks."""
    rng = np.random.default_rng(seed)
    V = int(rng.integers(3, max_vocab + 1))
    vocab = [SECTION_START, *(f"t{i}" for i in range(1, V))]
    model = ToyModel(vocab, rng.normal(0, 1, (N_SPANS, V, V)), rng.normal(0, 1, (N_SPANS, V, V)))
    records = []
    for _ in range(int(rng.integers(1, max_records + 1))):
        prompt = tuple(int(x) for x in rng.integers(0, V, int(rng.integers(1, 6))))
        length = int(rng.integers(3, 10))
        completion = tuple(int(x) for x in rng.integers(0, V, length))
        cuts = sorted(int(x) for x in rng.integers(0, length + 1, 2))
        spans = tuple(0 if i < cuts[0] else 1 if i < cuts[1] else 2 for i in range(length))
        records.append(ToyRecord(prompt, completion, spans))
    return model, records
