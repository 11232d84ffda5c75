"""Story-completion fine-tuning records and N-shot prompts."""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import Post, normalize

LABEL_PAIRS = ((0, 0), (1, 0), (0, 1), (1, 1))
CANONICAL_SHOTS = (0, 1, 8)

DEFAULT_LEXICON = {
    (0, 0): "neither belong nor burden",
    (1, 0): "belong",
    (0, 1): "burden",
    (1, 1): "both belong and burden",
}


class PromptError(ValueError):
    pass


class ExemplarLeakError(PromptError):
    pass


class NonCanonicalShotsWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    rho1_prefix: str = "This given sentence represents "
    rho2_prefix: str = "\nWords those indicate belong expression in the sentence: "
    rho3_prefix: str = "\nWords those indicate burden expression in the sentence: "
    separator: str = "\n\nIntent:\n\n"
    stop_sequence: str = "\n###\n"
    label_lexicon: Mapping[tuple[int, int], str] = field(default_factory=lambda: dict(DEFAULT_LEXICON))
    empty_cue_token: str = "none"
    completion_prefix: str = " "
    instruction: str | None = None

    def __post_init__(self):
        lexicon = {tuple(int(x) for x in k): str(v) for k, v in dict(self.label_lexicon).items()}
        object.__setattr__(self, "label_lexicon", lexicon)
        if set(lexicon) != set(LABEL_PAIRS):
            raise PromptError("label_lexicon must map exactly the four (tbe, pbu) label pairs")
        normalized = {normalize(v) for v in lexicon.values()}
        if len(normalized) != 4 or "" in normalized:
            raise PromptError("label phrases must be non-empty and distinct")
        if not self.separator:
            raise PromptError("separator must be non-empty")
        if not self.stop_sequence or not self.stop_sequence.strip():
            raise PromptError("stop_sequence must contain a non-whitespace character")
        for name, text in self._fragments():
            if self.stop_sequence in text:
                raise PromptError(f"stop_sequence occurs inside {name}")
        if not self.rho1_prefix.strip() or not self.rho2_prefix.strip() or not self.rho3_prefix.strip():
            raise PromptError("section prefixes must be non-empty")
        if not self.empty_cue_token.strip():
            raise PromptError("empty_cue_token must be non-empty")
        if self.instruction is None:
            object.__setattr__(self, "instruction", default_instruction(self))

    def _fragments(self):
        yield "rho1_prefix", self.rho1_prefix
        yield "rho2_prefix", self.rho2_prefix
        yield "rho3_prefix", self.rho3_prefix
        for pair, phrase in self.label_lexicon.items():
            yield f"label phrase {pair}", phrase

    def phrase_to_labels(self) -> dict[str, tuple[int, int]]:
        return {normalize(phrase): pair for pair, phrase in self.label_lexicon.items()}

    def to_dict(self) -> dict:
        data = asdict(self)
        data["label_lexicon"] = {f"{a}{b}": self.label_lexicon[a, b] for a, b in LABEL_PAIRS}
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> "PromptTemplate":
        data = dict(data)
        lexicon = data.pop("label_lexicon", None)
        if lexicon is not None:
            data["label_lexicon"] = {(int(k[0]), int(k[1])): v for k, v in lexicon.items()}
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise PromptError(f"unknown template field(s): {', '.join(sorted(unknown))}")
        return cls(**data)

    def to_config_section(self) -> dict[str, str]:
        """Flat string mapping for an INI ``[template]`` section (values JSON-quoted)."""
        flat = {}
        for key, value in self.to_dict().items():
            if key == "label_lexicon":
                for pair, phrase in value.items():
                    flat[f"label_{pair}"] = json.dumps(phrase)
            else:
                flat[key] = json.dumps(value)
        return flat

    @classmethod
    def from_config_section(cls, section: Mapping[str, str]) -> "PromptTemplate":
        data: dict = {}
        lexicon = dict(cls().to_dict()["label_lexicon"])
        for key, raw in section.items():
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            if key.startswith("label_"):
                lexicon[key[len("label_"):]] = value
            else:
                data[key] = value
        data["label_lexicon"] = lexicon
        return cls.from_dict(data)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def default_instruction(template: PromptTemplate) -> str:
    phrases = ", ".join(template.label_lexicon[pair] for pair in LABEL_PAIRS)
    return (
        "Read the post and answer in three parts. "
        f'First write "{template.rho1_prefix.strip()}" followed by one of: {phrases}. '
        f'Then write "{template.rho2_prefix.strip()}" followed by the words from the post '
        f"that show it, or {template.empty_cue_token}. "
        f'Then write "{template.rho3_prefix.strip()}" followed by the words from the post '
        f"that show it, or {template.empty_cue_token}.\n\n"
    )


@dataclass(frozen=True)
class StoryCompletion:
    label_phrase: str
    tbe_cue: str
    pbu_cue: str
    serialized: str


@dataclass(frozen=True)
class FineTuneRecord:
    prompt: str
    completion: str

    def to_json(self) -> str:
        return json.dumps({"prompt": self.prompt, "completion": self.completion}, ensure_ascii=False)


def build_completion(post: Post, template: PromptTemplate) -> StoryCompletion:
    label_phrase = template.label_lexicon[post.labels]
    tbe_cue = post.tbe_cue if post.tbe_label and post.tbe_cue else template.empty_cue_token
    pbu_cue = post.pbu_cue if post.pbu_label and post.pbu_cue else template.empty_cue_token
    serialized = (
        template.rho1_prefix + label_phrase
        + template.rho2_prefix + tbe_cue
        + template.rho3_prefix + pbu_cue
    )
    return StoryCompletion(label_phrase, tbe_cue, pbu_cue, serialized)


def _check_text(post: Post, template: PromptTemplate) -> None:
    if template.stop_sequence in post.text:
        raise PromptError(f"post {post.id!r}: text contains the stop sequence {template.stop_sequence!r}")


def build_finetune_record(post: Post, template: PromptTemplate) -> FineTuneRecord:
    _check_text(post, template)
    completion = template.completion_prefix + build_completion(post, template).serialized
    return FineTuneRecord(post.text + template.separator, completion + template.stop_sequence)


def build_finetune_records(posts: Iterable[Post], template: PromptTemplate) -> list[FineTuneRecord]:
    return [build_finetune_record(post, template) for post in posts]


def build_nshot_prompt(target: Post, exemplars: Sequence[Post], template: PromptTemplate) -> str:
    """Worked exemplar blocks followed by the unanswered target block.

    With no exemplars the template's instruction is prepended instead. Exemplar
    counts other than 0, 1 and 8 work but emit :class:`NonCanonicalShotsWarning`.
    """
    if any(ex.id == target.id for ex in exemplars):
        raise ExemplarLeakError(f"target post {target.id!r} is among the exemplars")
    if len(exemplars) not in CANONICAL_SHOTS:
        warnings.warn(
            f"{len(exemplars)}-shot prompt is not one of the canonical counts {CANONICAL_SHOTS}",
            NonCanonicalShotsWarning,
            stacklevel=2,
        )
    _check_text(target, template)
    parts = [template.instruction] if not exemplars else []
    for ex in exemplars:
        record = build_finetune_record(ex, template)
        parts.append(record.prompt + record.completion)
    parts.append(target.text + template.separator)
    return "".join(parts)


def inference_prompt(post: Post, template: PromptTemplate) -> str:
    """Prompt for a fine-tuned model: the post followed by the separator."""
    _check_text(post, template)
    return post.text + template.separator


def count_exemplar_blocks(prompt: str, template: PromptTemplate) -> int:
    return prompt.count(template.separator + template.completion_prefix + template.rho1_prefix)


def write_finetune_jsonl(records: Iterable[FineTuneRecord], path) -> int:
    n = 0
    with Path(path).open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(record.to_json() + "\n")
            n += 1
    return n


def read_finetune_jsonl(path) -> list[FineTuneRecord]:
    records = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                records.append(FineTuneRecord(str(obj["prompt"]), str(obj["completion"])))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise PromptError(f"{path}:{lineno}: not a prompt/completion record ({exc})") from exc
    return records
