"""Classification and cue-similarity metrics (ROUGE-1, ROUGE-L, BLEU-1, exact match).

All similarity scores share one tokenizer: case-folded, punctuation removed,
whitespace split. Bump ``TOKENIZER_VERSION`` whenever it changes.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .kernels import lcs_length

TOKENIZER_VERSION = "1"

_PUNCT = re.compile(r"[^\w\s]|_")
_WS = re.compile(r"\s+")


class UndefinedScoreError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    return _PUNCT.sub(" ", text.casefold()).split()


def normalize_answer(text: str) -> str:
    return _WS.sub(" ", text.casefold()).strip()


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BinaryConfusion:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @classmethod
    def from_labels(cls, gold: Iterable[int], pred: Iterable[int]) -> "BinaryConfusion":
        counts = Counter(zip(gold, pred))
        return cls(tp=counts[1, 1], fp=counts[0, 1], fn=counts[1, 0], tn=counts[0, 0])


@dataclass(frozen=True)
class ClassificationScores:
    precision: float
    recall: float
    f1: float
    accuracy: float
    degenerate: tuple[str, ...] = ()


def classification_metrics(confusion: BinaryConfusion) -> ClassificationScores:
    """Precision, recall, F1 and accuracy of the positive class.

    Zero denominators give 0 and are named in ``degenerate``.
    """
    if confusion.total == 0:
        raise ValueError("empty confusion matrix")
    flags = []
    tp, fp, fn, tn = confusion.tp, confusion.fp, confusion.fn, confusion.tn
    if tp + fp:
        precision = tp / (tp + fp)
    else:
        precision = 0.0
        flags.append("precision")
    if tp + fn:
        recall = tp / (tp + fn)
    else:
        recall = 0.0
        flags.append("recall")
    if precision + recall:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
        flags.append("f1")
    return ClassificationScores(precision, recall, f1, (tp + tn) / confusion.total, tuple(flags))


# ---------------------------------------------------------------------------
# generation similarity
# ---------------------------------------------------------------------------


def _f1(overlap: int, n_cand: int, n_ref: int) -> float:
    if overlap == 0:
        return 0.0
    p = overlap / n_cand
    r = overlap / n_ref
    return 2 * p * r / (p + r)


def _tokens_pair(candidate: str, reference: str) -> tuple[list[str], list[str]]:
    ref = tokenize(reference)
    if not ref:
        raise UndefinedScoreError(f"reference {reference!r} has no tokens")
    return tokenize(candidate), ref


def rouge1(candidate: str, reference: str) -> float:
    """Unigram-overlap F1 with clipped counts."""
    cand, ref = _tokens_pair(candidate, reference)
    if not cand:
        return 0.0
    overlap = sum((Counter(cand) & Counter(ref)).values())
    return _f1(overlap, len(cand), len(ref))


def rougeL(candidate: str, reference: str) -> float:
    cand, ref = _tokens_pair(candidate, reference)
    if not cand:
        return 0.0
    ids: dict[str, int] = {}
    a = [ids.setdefault(tok, len(ids)) for tok in cand]
    b = [ids.setdefault(tok, len(ids)) for tok in ref]
    return _f1(lcs_length(a, b), len(cand), len(ref))


def bleu1(candidate: str, reference: str) -> float:
    """Sentence-level clipped unigram precision times the brevity penalty."""
    cand, ref = _tokens_pair(candidate, reference)
    if not cand:
        return 0.0
    clipped = sum((Counter(cand) & Counter(ref)).values())
    bp = 1.0 if len(cand) >= len(ref) else math.exp(1 - len(ref) / len(cand))
    return bp * clipped / len(cand)


def exact_match(candidate: str, reference: str) -> int:
    return int(normalize_answer(candidate) == normalize_answer(reference))


@dataclass(frozen=True)
class GenerationScores:
    rouge1: float
    rougeL: float
    bleu1: float
    exact_match: float
    n_scored: int = 0
    n_skipped: int = 0

    def as_row(self) -> dict[str, float]:
        return {"rouge1": self.rouge1, "rougeL": self.rougeL, "bleu1": self.bleu1, "exact_match": self.exact_match}


def corpus_generation_scores(pairs: Sequence[tuple[str | None, str | None]]) -> GenerationScores:
    """Macro average over (candidate, reference) pairs.

    Pairs whose reference is absent or has no tokens are skipped and counted;
    an absent candidate scores as the empty string.
    """
    if not pairs:
        raise UndefinedScoreError("no pairs to score")
    totals = [0.0, 0.0, 0.0, 0.0]
    scored = skipped = 0
    for candidate, reference in pairs:
        if reference is None or not tokenize(reference):
            skipped += 1
            continue
        candidate = candidate or ""
        totals[0] += rouge1(candidate, reference)
        totals[1] += rougeL(candidate, reference)
        totals[2] += bleu1(candidate, reference)
        totals[3] += exact_match(candidate, reference)
        scored += 1
    if not scored:
        raise UndefinedScoreError(f"all {skipped} pairs lack a reference")
    return GenerationScores(*(t / scored for t in totals), n_scored=scored, n_skipped=skipped)
