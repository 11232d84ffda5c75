"""Decode a generated story completion back into labels and textual cues."""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache

from .corpus import normalize
from .prompts import PromptTemplate

_SEGMENT_SPLIT = re.compile(r";|\s/\s|\r?\n")


class UnparseableCompletion(ValueError):
    def __init__(self, raw: str, reason: str):
        self.raw = raw
        self.reason = reason
        preview = raw if len(raw) <= 80 else raw[:77] + "..."
        super().__init__(f"{reason}: {preview!r}")


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    repair: bool = True

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "repair": self.repair}


@dataclass(frozen=True)
class ParsedCompletion:
    tbe_label: int
    pbu_label: int
    tbe_cue: str | None = None
    pbu_cue: str | None = None
    diagnostics: tuple[Diagnostic, ...] = ()
    exact: bool = True
    parsed: bool = True

    @property
    def labels(self) -> tuple[int, int]:
        return (self.tbe_label, self.pbu_label)

    @property
    def status(self) -> str:
        if not self.parsed:
            return "unparseable"
        return "exact" if self.exact else "repaired"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "tbe_label": self.tbe_label,
            "pbu_label": self.pbu_label,
            "tbe_cue": self.tbe_cue,
            "pbu_cue": self.pbu_cue,
            "exact": self.exact,
            "diagnostics": [d.to_dict() for d in self.diagnostics],
        }


def extract_primary_cue(cue_text: str) -> str:
    """First non-empty segment of a ``;``, `` / `` or newline delimited list, trimmed."""
    for segment in _SEGMENT_SPLIT.split(cue_text):
        segment = segment.strip()
        if segment:
            return segment
    return ""


@lru_cache(maxsize=64)
def _tolerant(prefix: str) -> re.Pattern:
    words = prefix.split()
    return re.compile(r"\s+".join(re.escape(w) for w in words), re.IGNORECASE)


@lru_cache(maxsize=16)
def _phrase_patterns(items: tuple[tuple[str, tuple[int, int]], ...]):
    ordered = sorted(items, key=lambda item: len(item[0]), reverse=True)
    return [(phrase, pair, re.compile(re.escape(phrase) + r"(?!\w)")) for phrase, pair in ordered]


def _find(text: str, prefix: str, start: int) -> tuple[int, int, bool] | None:
    """Locate ``prefix`` in ``text[start:]``; returns (begin, end, repaired)."""
    pos = text.find(prefix, start)
    if pos >= 0:
        return pos, pos + len(prefix), False
    m = _tolerant(prefix).search(text, start)
    if m:
        return m.start(), m.end(), True
    return None


def parse_completion(raw: str, template: PromptTemplate | None = None) -> ParsedCompletion:
    """Parse one completion; raises :class:`UnparseableCompletion` when no label is recoverable."""
    template = template or PromptTemplate()
    diags: list[Diagnostic] = []

    text = raw
    stop = text.find(template.stop_sequence)
    if stop >= 0:
        text = text[:stop]

    rho1 = _find(text, template.rho1_prefix, 0)
    if rho1 is None:
        raise UnparseableCompletion(raw, "no label section")
    if rho1[2]:
        diags.append(Diagnostic("rho1_tolerant", "label prefix matched ignoring case/whitespace"))
    if text[: rho1[0]].strip():
        diags.append(Diagnostic("leading_text", "text before the label section was ignored"))

    rho2 = _find(text, template.rho2_prefix, rho1[1])
    rho3 = _find(text, template.rho3_prefix, rho2[1] if rho2 else rho1[1])
    if rho2 and rho2[2]:
        diags.append(Diagnostic("rho2_tolerant", "TBe cue prefix matched ignoring case/whitespace"))
    if rho3 and rho3[2]:
        diags.append(Diagnostic("rho3_tolerant", "PBu cue prefix matched ignoring case/whitespace"))

    label_end = rho2[0] if rho2 else (rho3[0] if rho3 else len(text))
    region = text[rho1[1] : label_end]
    labels = _match_label(region, template, diags)
    if labels is None:
        raise UnparseableCompletion(raw, "no label phrase")

    if rho2 is None:
        diags.append(Diagnostic("missing_tbe_section", "TBe cue section missing; cue treated as absent"))
        tbe_region = None
    else:
        tbe_region = text[rho2[1] : rho3[0] if rho3 else len(text)]
    if rho3 is None:
        diags.append(Diagnostic("missing_pbu_section", "PBu cue section missing; cue treated as absent"))
        pbu_region = None
    else:
        pbu_region = text[rho3[1] :]

    tbe_cue = _cue(tbe_region, labels[0], "tbe", template, diags)
    pbu_cue = _cue(pbu_region, labels[1], "pbu", template, diags)
    exact = not any(d.repair for d in diags)
    return ParsedCompletion(labels[0], labels[1], tbe_cue, pbu_cue, tuple(diags), exact)


def _match_label(region: str, template: PromptTemplate, diags: list[Diagnostic]):
    norm = normalize(region)
    lexicon = template.label_lexicon
    for phrase, pair, pattern in _phrase_patterns(tuple(template.phrase_to_labels().items())):
        if norm == phrase:
            if region != lexicon[pair]:
                diags.append(Diagnostic("label_normalized", "label phrase matched ignoring case/whitespace"))
            return pair
        if pattern.match(norm):
            diags.append(Diagnostic("label_trailing_text", f"text after label phrase {phrase!r} ignored"))
            return pair
    return None


def _cue(region, label: int, factor: str, template: PromptTemplate, diags: list[Diagnostic]):
    if region is None:
        return None
    cue = region.strip()
    if not cue:
        return None
    if normalize(cue) == normalize(template.empty_cue_token):
        if cue != template.empty_cue_token:
            diags.append(Diagnostic(f"{factor}_empty_token_normalized", "empty-cue token matched ignoring case"))
        return None
    if not label:
        diags.append(
            Diagnostic(f"{factor}_cue_dropped", f"{factor.upper()} label is 0 but a cue was generated; cue dropped")
        )
        return None
    primary = extract_primary_cue(cue)
    if primary != cue:
        diags.append(Diagnostic(f"{factor}_primary_cue", f"kept first segment of a multi-part cue: {primary!r}"))
    return primary or None


def parse_or_default(raw: str | None, template: PromptTemplate | None = None) -> ParsedCompletion:
    """Like :func:`parse_completion` but scores failures as (0, 0) with no cues."""
    if raw is None:
        return ParsedCompletion(0, 0, None, None, (Diagnostic("no_completion", "no completion returned"),), False, False)
    try:
        return parse_completion(raw, template)
    except UnparseableCompletion as exc:
        return ParsedCompletion(0, 0, None, None, (Diagnostic("unparseable", exc.reason),), False, False)
