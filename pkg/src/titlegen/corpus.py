"""Stack Overflow post ingestion, validation, and bi-modal input formatting.

On-disk convention: UTF-8 line-delimited JSON, one record per line. Post
records carry the fields ``id``, ``language``, ``title``, ``description``,
``code``; formatted-input dumps carry ``id``, ``input``, ``gold``. JSON
escaping keeps each record on a single line regardless of embedded newlines.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Callable, Iterable, Iterator, Sequence

LANGUAGES = ("java", "csharp", "python", "javascript")

# Language-specific prefix tokens prepended to the serialized input.
DEFAULT_PREFIXES = {
    "java": "Java",
    "csharp": "C#",
    "python": "Python",
    "javascript": "JS",
}

CODE_SEPARATOR = "<code>"

SPLIT_NAMES = ("train", "validation", "test")


class CorpusError(ValueError):
    """Base error for dataset ingestion and formatting problems."""


class ParseError(CorpusError):
    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class FormatError(CorpusError):
    pass


@dataclass(frozen=True)
class Post:
    """One Stack Overflow question; ``title`` is the gold summary."""

    id: str
    language: str
    title: str
    description: str
    code: str = ""

    def __post_init__(self) -> None:
        if self.language not in LANGUAGES:
            raise CorpusError(f"unknown language tag {self.language!r}")
        if not self.title.strip():
            raise CorpusError(f"post {self.id!r}: title is empty")
        if not self.description.strip() and not self.code.strip():
            raise CorpusError(f"post {self.id!r}: nothing to summarize (empty description and code)")


@dataclass(frozen=True)
class DatasetSplit:
    name: str
    records: tuple[Post, ...]

    def __post_init__(self) -> None:
        if self.name not in SPLIT_NAMES:
            raise CorpusError(f"unknown split name {self.name!r}")

    def __len__(self) -> int:
        return len(self.records)

    def per_language_counts(self) -> dict[str, int]:
        counts = {lang: 0 for lang in LANGUAGES}
        for post in self.records:
            counts[post.language] += 1
        return counts


_POST_FIELDS = {"id", "language", "title", "description", "code"}
_REQUIRED_POST_FIELDS = {"id", "language", "title", "description"}


def _iter_lines(source: Iterable[str] | Iterable[bytes] | IO) -> Iterator[str]:
    for raw in source:
        yield raw.decode("utf-8") if isinstance(raw, bytes) else raw


def parse_posts(source: Iterable[str] | Iterable[bytes] | IO, name: str = "train") -> DatasetSplit:
    """Parse line-delimited post records into a split; blank lines are skipped.

    Raises :class:`ParseError` (with the offending line number) on malformed
    records, unknown language tags, or duplicate ids.
    """
    records: list[Post] = []
    seen_ids: set[str] = set()
    for line_number, line in enumerate(_iter_lines(source), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(line_number, f"invalid JSON ({exc.msg})") from exc
        if not isinstance(obj, dict):
            raise ParseError(line_number, "record is not an object")
        unknown = set(obj) - _POST_FIELDS
        if unknown:
            raise ParseError(line_number, f"unknown fields {sorted(unknown)}")
        missing = _REQUIRED_POST_FIELDS - set(obj)
        if missing:
            raise ParseError(line_number, f"missing fields {sorted(missing)}")
        for key, value in obj.items():
            if not isinstance(value, str):
                raise ParseError(line_number, f"field {key!r} is not a string")
        if obj["id"] in seen_ids:
            raise ParseError(line_number, f"duplicate id {obj['id']!r}")
        try:
            post = Post(
                id=obj["id"],
                language=obj["language"],
                title=obj["title"],
                description=obj["description"],
                code=obj.get("code", ""),
            )
        except CorpusError as exc:
            raise ParseError(line_number, str(exc)) from exc
        seen_ids.add(post.id)
        records.append(post)
    return DatasetSplit(name=name, records=tuple(records))


def serialize_posts(split: DatasetSplit) -> Iterator[str]:
    """Yield one JSON line per post; inverse of :func:`parse_posts`."""
    for post in split.records:
        yield json.dumps(
            {
                "id": post.id,
                "language": post.language,
                "title": post.title,
                "description": post.description,
                "code": post.code,
            },
            ensure_ascii=False,
            sort_keys=True,
        )


def load_split(path: str, name: str = "train") -> DatasetSplit:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_posts(handle, name=name)


def save_split(split: DatasetSplit, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for line in serialize_posts(split):
            handle.write(line + "\n")


def whitespace_tokens(text: str) -> list[str]:
    """Default budget counter: split on runs of whitespace."""
    return text.split()


TokenCounter = Callable[[str], Sequence[str]]


@dataclass(frozen=True)
class FormattedInput:
    """Serialized bi-modal input: prefix, description, separator, code."""

    text: str
    token_count: int


def _single_line(text: str) -> str:
    # Collapse all whitespace runs so the serialization is one line and
    # truncation by re-joining tokens is a strict prefix operation.
    return " ".join(text.split())


def _defang_separator(text: str) -> str:
    # The separator literal must occur exactly once in the output; break up
    # any occurrence embedded in post content.
    return text.replace(CODE_SEPARATOR, "< code >")


def format_input(
    post: Post,
    prefixes: dict[str, str] | None = None,
    budget: int = 512,
    counter: TokenCounter = whitespace_tokens,
) -> FormattedInput:
    """Serialize a post as ``<prefix> description <code> code``, token-budgeted.

    The four parts are joined by single spaces and the result is cut to the
    first ``budget`` tokens under ``counter``. Description precedes code, so
    description tokens survive truncation preferentially; the leading prefix
    token always survives (budget >= 1). ``counter`` must tokenize stably
    under single-space re-joining of its own output (the whitespace default
    does).
    """
    prefixes = DEFAULT_PREFIXES if prefixes is None else prefixes
    if budget < 1:
        raise FormatError(f"budget must be >= 1, got {budget}")
    if post.language not in prefixes:
        raise FormatError(f"no prefix registered for language {post.language!r}")
    parts = [
        prefixes[post.language],
        _single_line(_defang_separator(post.description)),
        CODE_SEPARATOR,
        _single_line(_defang_separator(post.code)),
    ]
    text = " ".join(parts).strip()
    tokens = list(counter(text))
    if len(tokens) > budget:
        text = " ".join(tokens[:budget])
        tokens = tokens[:budget]
    return FormattedInput(text=text, token_count=len(tokens))


@dataclass(frozen=True)
class FormattedExample:
    """One row of a formatted-input dump: model input plus gold title."""

    id: str
    input: str
    gold: str


def format_split(
    split: DatasetSplit,
    prefixes: dict[str, str] | None = None,
    budget: int = 512,
    counter: TokenCounter = whitespace_tokens,
) -> list[FormattedExample]:
    return [
        FormattedExample(id=post.id, input=format_input(post, prefixes, budget, counter).text, gold=post.title)
        for post in split.records
    ]


def write_formatted(examples: Iterable[FormattedExample], path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for example in examples:
            handle.write(
                json.dumps(
                    {"id": example.id, "input": example.input, "gold": example.gold},
                    ensure_ascii=False,
                    sort_keys=True,
                )
                + "\n"
            )


def read_formatted(path: str) -> list[FormattedExample]:
    examples: list[FormattedExample] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(line_number, f"invalid JSON ({exc.msg})") from exc
            try:
                examples.append(FormattedExample(id=obj["id"], input=obj["input"], gold=obj["gold"]))
            except (KeyError, TypeError) as exc:
                raise ParseError(line_number, f"missing formatted-input field ({exc})") from exc
    return examples
