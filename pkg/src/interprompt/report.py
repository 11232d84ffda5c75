"""Run manifests and evaluation reports (Markdown + CSV + JSON)."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import Post
from .metrics import (
    TOKENIZER_VERSION,
    BinaryConfusion,
    ClassificationScores,
    GenerationScores,
    UndefinedScoreError,
    classification_metrics,
    corpus_generation_scores,
)
from .parser import parse_or_default
from .prompts import PromptTemplate

FACTORS = ("tbe", "pbu")
FACTOR_NAMES = {"tbe": "Thwarted Belongingness (TBe)", "pbu": "Perceived Burdensomeness (PBu)"}
UNPARSEABLE_POLICY = "unparseable or missing completions are scored as (0, 0) with no cues"


class MissingIdsError(ValueError):
    def __init__(self, missing: Sequence[str]):
        self.missing = list(missing)
        shown = ", ".join(self.missing[:20]) + (" ..." if len(self.missing) > 20 else "")
        super().__init__(f"{len(self.missing)} prediction id(s) not in the gold data: {shown}")


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------


def run_id(command: str, payload: Mapping) -> str:
    blob = json.dumps({"command": command, **payload}, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def append_manifest(path, command: str, payload: Mapping) -> dict:
    """Append one run entry to a JSON Lines manifest and return it.

    ``run_id`` depends only on ``command`` and ``payload``, never on the time.
    """
    entry = {
        "run_id": run_id(command, payload),
        "command": command,
        "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        **payload,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8") as fh:
        fh.write(json.dumps(entry, sort_keys=True, ensure_ascii=False) + "\n")
    return entry


def read_manifest(path) -> list[dict]:
    with Path(path).open(encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


# ---------------------------------------------------------------------------
# predictions file
# ---------------------------------------------------------------------------


def write_predictions(path, rows: Iterable[dict]) -> int:
    n = 0
    with Path(path).open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")
            n += 1
    return n


def read_predictions(path) -> list[dict]:
    rows = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if "id" not in row:
                raise ValueError(f"{path}:{lineno}: prediction lacks an id")
            rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


@dataclass
class EvaluationReport:
    n_predictions: int
    classification: dict[str, ClassificationScores]
    generation: dict[str, GenerationScores | None]
    counts: dict[str, int]
    run_id: str = ""
    template_sha256: str = ""
    significance_markdown: str | None = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "template_sha256": self.template_sha256,
            "tokenizer_version": TOKENIZER_VERSION,
            "n_predictions": self.n_predictions,
            "counts": dict(self.counts),
            "classification": {
                k: {"precision": v.precision, "recall": v.recall, "f1": v.f1, "accuracy": v.accuracy,
                    "degenerate": list(v.degenerate)}
                for k, v in self.classification.items()
            },
            "generation": {
                k: None if v is None else {**v.as_row(), "n_scored": v.n_scored, "n_skipped": v.n_skipped}
                for k, v in self.generation.items()
            },
            "significance_markdown": self.significance_markdown,
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "EvaluationReport":
        return cls(
            n_predictions=data["n_predictions"],
            classification={
                k: ClassificationScores(v["precision"], v["recall"], v["f1"], v["accuracy"], tuple(v["degenerate"]))
                for k, v in data["classification"].items()
            },
            generation={
                k: None if v is None else GenerationScores(
                    v["rouge1"], v["rougeL"], v["bleu1"], v["exact_match"], v["n_scored"], v["n_skipped"])
                for k, v in data["generation"].items()
            },
            counts=dict(data["counts"]),
            run_id=data.get("run_id", ""),
            template_sha256=data.get("template_sha256", ""),
            significance_markdown=data.get("significance_markdown"),
            notes=list(data.get("notes", [])),
        )


def evaluate(predictions: Sequence[Mapping], gold: Sequence[Post], template: PromptTemplate | None = None,
             run: str = "") -> EvaluationReport:
    template = template or PromptTemplate()
    by_id = {post.id: post for post in gold}
    missing = [str(row["id"]) for row in predictions if str(row["id"]) not in by_id]
    if missing:
        raise MissingIdsError(missing)
    if not predictions:
        raise ValueError("no predictions to evaluate")

    counts = {"exact": 0, "repaired": 0, "unparseable": 0, "transport_errors": 0}
    gold_labels = {f: [] for f in FACTORS}
    pred_labels = {f: [] for f in FACTORS}
    cue_pairs = {f: [] for f in FACTORS}
    for row in predictions:
        post = by_id[str(row["id"])]
        completion = row.get("completion")
        if completion is None:
            counts["transport_errors"] += 1
        parsed = parse_or_default(completion, template)
        counts[parsed.status] += 1
        for factor, gold_label, pred_label, gold_cue, pred_cue in (
            ("tbe", post.tbe_label, parsed.tbe_label, post.tbe_cue, parsed.tbe_cue),
            ("pbu", post.pbu_label, parsed.pbu_label, post.pbu_cue, parsed.pbu_cue),
        ):
            gold_labels[factor].append(gold_label)
            pred_labels[factor].append(pred_label)
            cue_pairs[factor].append((pred_cue, gold_cue))

    classification = {
        f: classification_metrics(BinaryConfusion.from_labels(gold_labels[f], pred_labels[f])) for f in FACTORS
    }
    generation: dict[str, GenerationScores | None] = {}
    notes = [UNPARSEABLE_POLICY]
    for f in FACTORS:
        try:
            generation[f] = corpus_generation_scores(cue_pairs[f])
        except UndefinedScoreError:
            generation[f] = None
            notes.append(f"{f.upper()}: no gold cues, generation scores undefined")
    return EvaluationReport(len(predictions), classification, generation, counts, run, template.digest(), None, notes)


def render_markdown(report: EvaluationReport) -> str:
    lines = [
        "# Evaluation report",
        "",
        f"- run: `{report.run_id or '-'}`",
        f"- template: `{report.template_sha256[:12] or '-'}`",
        f"- tokenizer version: {TOKENIZER_VERSION}",
        f"- predictions: {report.n_predictions}",
        "",
        "## Classification",
        "",
        "| Factor | Precision | Recall | F1-score | Accuracy |",
        "|---|---|---|---|---|",
    ]
    flagged = []
    for f in FACTORS:
        s = report.classification[f]
        lines.append(f"| {FACTOR_NAMES[f]} | {s.precision:.4f} | {s.recall:.4f} | {s.f1:.4f} | {s.accuracy:.4f} |")
        if s.degenerate:
            flagged.append(f"{f.upper()}: zero denominator in {', '.join(s.degenerate)} (reported as 0)")
    lines += [
        "",
        "## Generated explanations",
        "",
        "| Factor | Rouge-1 | Rouge-L | BLEU-1 | EM | scored | skipped |",
        "|---|---|---|---|---|---|---|",
    ]
    for f in FACTORS:
        g = report.generation[f]
        if g is None:
            lines.append(f"| {FACTOR_NAMES[f]} | - | - | - | - | 0 | - |")
        else:
            lines.append(
                f"| {FACTOR_NAMES[f]} | {g.rouge1:.4f} | {g.rougeL:.4f} | {g.bleu1:.4f} | {g.exact_match:.4f} "
                f"| {g.n_scored} | {g.n_skipped} |"
            )
    c = report.counts
    lines += [
        "",
        "## Parse accounting",
        "",
        "| predictions | exact | repaired | unparseable | of which transport errors |",
        "|---|---|---|---|---|",
        f"| {report.n_predictions} | {c['exact']} | {c['repaired']} | {c['unparseable']} | {c['transport_errors']} |",
        "",
    ]
    if report.significance_markdown:
        lines += ["## Significance", "", report.significance_markdown.rstrip(), ""]
    notes = [*report.notes, *flagged]
    if notes:
        lines += ["## Notes", ""] + [f"- {n}" for n in notes] + [""]
    return "\n".join(lines)


def write_csv(report: EvaluationReport, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run_id", "section", "factor", "metric", "value"])
        for f in FACTORS:
            s = report.classification[f]
            for metric in ("precision", "recall", "f1", "accuracy"):
                writer.writerow([report.run_id, "classification", f, metric, f"{getattr(s, metric):.6f}"])
        for f in FACTORS:
            g = report.generation[f]
            if g is None:
                continue
            for metric, value in g.as_row().items():
                writer.writerow([report.run_id, "generation", f, metric, f"{value:.6f}"])
        for key, value in report.counts.items():
            writer.writerow([report.run_id, "counts", "", key, value])
