"""Posts annotated for thwarted belongingness (TBe) and perceived burdensomeness (PBu)."""

from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

logger = logging.getLogger(__name__)

FIELDS = ("id", "text", "tbe_label", "pbu_label", "tbe_cue", "pbu_cue")
REQUIRED = ("text", "tbe_label", "pbu_label")
SPLIT_NAMES = ("train", "validation", "test")

_WS = re.compile(r"\s+")


def normalize(text: str) -> str:
    """Lowercase and collapse whitespace runs; used for cue/substring checks."""
    return _WS.sub(" ", text).strip().casefold()


class IngestionError(ValueError):
    """Raised when a dataset file has rows that violate the Post invariants.

    ``errors`` holds ``(row_number, message)`` pairs (row 1 is the first data
    row); ``posts`` holds the rows that did load.
    """

    def __init__(self, path, errors, posts=()):
        self.path = str(path)
        self.errors = list(errors)
        self.posts = list(posts)
        lines = "; ".join(f"row {row}: {msg}" for row, msg in self.errors[:20])
        more = f" (+{len(self.errors) - 20} more)" if len(self.errors) > 20 else ""
        super().__init__(f"{self.path}: {len(self.errors)} invalid row(s): {lines}{more}")


class UndefinedRatioError(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class Post:
    id: str
    text: str
    tbe_label: int
    pbu_label: int
    tbe_cue: str | None = None
    pbu_cue: str | None = None

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise ValueError("text is empty")
        for name in ("tbe_label", "pbu_label"):
            value = getattr(self, name)
            if isinstance(value, bool) or value not in (0, 1):
                raise ValueError(f"{name} must be 0 or 1, got {value!r}")
        for factor in ("tbe", "pbu"):
            cue = getattr(self, f"{factor}_cue")
            if cue is not None and not cue.strip():
                object.__setattr__(self, f"{factor}_cue", None)
            elif cue is not None and getattr(self, f"{factor}_label") == 0:
                raise ValueError(f"{factor}_cue given but {factor}_label is 0")

    @property
    def labels(self) -> tuple[int, int]:
        return (self.tbe_label, self.pbu_label)

    def cue_warnings(self) -> list[str]:
        """Gold cues that are not substrings of the text (case/whitespace-insensitive)."""
        text = normalize(self.text)
        return [
            f"{factor}_cue {cue!r} is not a substring of the text"
            for factor, cue in (("tbe", self.tbe_cue), ("pbu", self.pbu_cue))
            if cue is not None and normalize(cue) not in text
        ]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "tbe_label": self.tbe_label,
            "pbu_label": self.pbu_label,
            "tbe_cue": self.tbe_cue,
            "pbu_cue": self.pbu_cue,
        }


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[Post, ...] = ()
    validation: tuple[Post, ...] = ()
    test: tuple[Post, ...] = ()

    def __post_init__(self):
        seen: dict[str, str] = {}
        for name in SPLIT_NAMES:
            posts = tuple(getattr(self, name))
            object.__setattr__(self, name, posts)
            for post in posts:
                if post.id in seen:
                    raise ValueError(f"post id {post.id!r} appears in both {seen[post.id]} and {name}")
                seen[post.id] = name


@dataclass(frozen=True)
class ContingencyTable:
    """Counts indexed by (TBe, PBu): ``n01`` is TBe=0, PBu=1."""

    n00: int = 0
    n01: int = 0
    n10: int = 0
    n11: int = 0

    def __post_init__(self):
        if min(self.n00, self.n01, self.n10, self.n11) < 0:
            raise ValueError("contingency cells must be non-negative")

    @property
    def total(self) -> int:
        return self.n00 + self.n01 + self.n10 + self.n11

    def cell(self, tbe: int, pbu: int) -> int:
        return getattr(self, f"n{tbe}{pbu}")


@dataclass
class Ingestion:
    posts: list[Post] = field(default_factory=list)
    errors: list[tuple[int, str]] = field(default_factory=list)
    warnings: list[tuple[int, str]] = field(default_factory=list)


def contingency(posts: Iterable[Post]) -> ContingencyTable:
    counts = {(0, 0): 0, (0, 1): 0, (1, 0): 0, (1, 1): 0}
    for post in posts:
        counts[post.labels] += 1
    return ContingencyTable(counts[0, 0], counts[0, 1], counts[1, 0], counts[1, 1])


def delta_ratios(table: ContingencyTable) -> tuple[Fraction, Fraction]:
    """Relative increase from TBe=0 to TBe=1 within each PBu column.

    Returned as exact fractions; ``float()`` them for display.
    """
    if table.n00 == 0 or table.n01 == 0:
        raise UndefinedRatioError(
            f"delta ratio undefined: n00={table.n00}, n01={table.n01} (need both > 0)"
        )
    return (
        Fraction(table.n10 - table.n00, table.n00),
        Fraction(table.n11 - table.n01, table.n01),
    )


# ---------------------------------------------------------------------------
# I/O
# ---------------------------------------------------------------------------


def _infer_format(path: Path, fmt: str | None) -> str:
    if fmt:
        fmt = fmt.lower()
    else:
        fmt = path.suffix.lower().lstrip(".")
    if fmt not in ("csv", "jsonl"):
        raise ValueError(f"unsupported dataset format {fmt!r}; expected csv or jsonl")
    return fmt


def _parse_label(value) -> int:
    if isinstance(value, bool):
        raise ValueError(f"non-binary label {value!r}")
    if isinstance(value, int):
        label = value
    elif isinstance(value, float) and value.is_integer():
        label = int(value)
    elif isinstance(value, str) and value.strip().lstrip("+-").isdigit():
        label = int(value.strip())
    else:
        raise ValueError(f"non-binary label {value!r}")
    if label not in (0, 1):
        raise ValueError(f"non-binary label {value!r}")
    return label


def _optional(value) -> str | None:
    if value is None:
        return None
    value = str(value)
    return value if value.strip() else None


def _row_to_post(row: dict, rowno: int) -> Post:
    missing = [key for key in REQUIRED if key not in row or row[key] is None]
    if missing:
        raise ValueError(f"missing field(s) {', '.join(missing)}")
    post_id = row.get("id")
    post_id = str(post_id) if post_id not in (None, "") else str(rowno)
    return Post(
        id=post_id,
        text=str(row["text"]),
        tbe_label=_parse_label(row["tbe_label"]),
        pbu_label=_parse_label(row["pbu_label"]),
        tbe_cue=_optional(row.get("tbe_cue")),
        pbu_cue=_optional(row.get("pbu_cue")),
    )


def _iter_rows(path: Path, fmt: str):
    if fmt == "csv":
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            missing = [key for key in REQUIRED if key not in (reader.fieldnames or ())]
            if missing:
                raise IngestionError(path, [(0, f"header lacks column(s) {', '.join(missing)}")])
            for rowno, row in enumerate(reader, start=1):
                yield rowno, row, None
    else:
        with path.open(encoding="utf-8") as fh:
            rowno = 0
            for line in fh:
                if not line.strip():
                    continue
                rowno += 1
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    yield rowno, None, f"invalid JSON: {exc.msg}"
                    continue
                if not isinstance(obj, dict):
                    yield rowno, None, "expected a JSON object"
                    continue
                yield rowno, obj, None


def read_posts(path, fmt: str | None = None) -> Ingestion:
    """Read one dataset file, collecting per-row errors instead of raising."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset file not found: {path}")
    fmt = _infer_format(path, fmt)
    result = Ingestion()
    seen: set[str] = set()
    for rowno, row, problem in _iter_rows(path, fmt):
        if problem is None:
            try:
                post = _row_to_post(row, rowno)
            except ValueError as exc:
                problem = str(exc)
            else:
                if post.id in seen:
                    problem = f"duplicate id {post.id!r}"
        if problem is not None:
            result.errors.append((rowno, problem))
            continue
        seen.add(post.id)
        for message in post.cue_warnings():
            logger.warning("%s row %d: %s", path, rowno, message)
            result.warnings.append((rowno, message))
        result.posts.append(post)
    return result


def _find_split_file(directory: Path, name: str, fmt: str | None) -> Path | None:
    suffixes = (fmt,) if fmt else ("csv", "jsonl")
    for suffix in suffixes:
        candidate = directory / f"{name}.{suffix}"
        if candidate.is_file():
            return candidate
    return None


def load_dataset(path, fmt: str | None = None) -> list[Post] | DatasetSplit:
    """Load a dataset file (-> list of posts) or a split directory (-> DatasetSplit).

    A split directory holds ``train``, ``validation`` and ``test`` files with a
    ``.csv`` or ``.jsonl`` suffix; missing splits are empty.
    Raises :class:`IngestionError` if any row is invalid.
    """
    path = Path(path)
    if path.is_dir():
        splits = {}
        for name in SPLIT_NAMES:
            split_path = _find_split_file(path, name, fmt)
            splits[name] = load_dataset(split_path, fmt) if split_path else []
        if not any(splits.values()):
            raise FileNotFoundError(f"no train/validation/test files in {path}")
        return DatasetSplit(**splits)
    result = read_posts(path, fmt)
    if result.errors:
        raise IngestionError(path, result.errors, result.posts)
    return result.posts


def write_posts(path, posts: Sequence[Post], fmt: str | None = None) -> None:
    path = Path(path)
    fmt = _infer_format(path, fmt)
    if fmt == "csv":
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=FIELDS)
            writer.writeheader()
            for post in posts:
                row = post.to_dict()
                row["tbe_cue"] = row["tbe_cue"] or ""
                row["pbu_cue"] = row["pbu_cue"] or ""
                writer.writerow(row)
    else:
        with path.open("w", encoding="utf-8") as fh:
            for post in posts:
                fh.write(json.dumps(post.to_dict(), ensure_ascii=False) + "\n")


def all_posts(dataset: list[Post] | DatasetSplit) -> list[Post]:
    if isinstance(dataset, DatasetSplit):
        return [*dataset.train, *dataset.validation, *dataset.test]
    return list(dataset)
