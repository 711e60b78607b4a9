from __future__ import annotations

import json

import pytest

from titlegen import corpus
from titlegen.corpus import (
    CorpusError,
    DatasetSplit,
    FormatError,
    ParseError,
    Post,
    format_input,
    format_split,
    parse_posts,
    read_formatted,
    serialize_posts,
    whitespace_tokens,
    write_formatted,
)

from conftest import synthetic_posts


def _line(**fields) -> str:
    record = {
        "id": "x1",
        "language": "java",
        "title": "NullPointerException in stream map",
        "description": "calling map on a stream throws",
        "code": "list.stream().map(f)",
    }
    record.update(fields)
    return json.dumps(record)


def test_parse_empty_input():
    split = parse_posts([], name="train")
    assert len(split) == 0


def test_parse_skips_blank_lines():
    split = parse_posts([_line(), "", "   ", _line(id="x2")])
    assert [post.id for post in split.records] == ["x1", "x2"]


def test_parse_hundred_posts_per_language_counts(tmp_path):
    posts = synthetic_posts(100, seed=1)
    path = tmp_path / "posts.jsonl"
    with open(path, "w", encoding="utf-8") as handle:
        for line in serialize_posts(DatasetSplit(name="train", records=tuple(posts))):
            handle.write(line + "\n")
    split = corpus.load_split(str(path))
    assert len(split) == 100
    assert split.per_language_counts() == {"java": 25, "csharp": 25, "python": 25, "javascript": 25}


def test_parse_accepts_bytes():
    split = parse_posts([_line().encode("utf-8")])
    assert split.records[0].id == "x1"


def test_parse_missing_title_names_line():
    record = json.loads(_line())
    del record["title"]
    with pytest.raises(ParseError, match="line 2"):
        parse_posts([_line(), json.dumps(record)])


def test_parse_unknown_language_names_tag():
    with pytest.raises(ParseError, match="rust"):
        parse_posts([_line(language="rust")])


def test_parse_duplicate_id():
    with pytest.raises(ParseError, match="duplicate id"):
        parse_posts([_line(), _line()])


def test_parse_invalid_json_names_line():
    with pytest.raises(ParseError, match="line 1"):
        parse_posts(["{not json"])


def test_parse_unknown_field_rejected():
    with pytest.raises(ParseError, match="tags"):
        parse_posts([_line(tags="java")])


def test_parse_non_string_field_rejected():
    with pytest.raises(ParseError, match="code"):
        parse_posts([_line(code=3)])


def test_missing_code_defaults_empty():
    record = json.loads(_line())
    del record["code"]
    split = parse_posts([json.dumps(record)])
    assert split.records[0].code == ""


def test_empty_title_rejected():
    with pytest.raises(ParseError, match="title"):
        parse_posts([_line(title="   ")])


def test_nothing_to_summarize_rejected():
    with pytest.raises(ParseError, match="nothing to summarize"):
        parse_posts([_line(description="", code="")])


def test_roundtrip_field_for_field(tmp_path):
    posts = synthetic_posts(40, seed=9)
    posts.append(
        Post(id="nl", language="python", title="multi line code", description="desc", code="a = 1\nb = 2")
    )
    split = DatasetSplit(name="validation", records=tuple(posts))
    lines = list(serialize_posts(split))
    assert all("\n" not in line for line in lines)
    parsed = parse_posts(lines, name="validation")
    assert parsed == split


def test_split_name_validated():
    with pytest.raises(CorpusError):
        DatasetSplit(name="dev", records=())


JS_POST = Post(
    id="js1",
    language="javascript",
    title="JQuery AJAX File Upload Error 500",
    description="upload fails",
    code="$.ajax(...)",
)


def test_format_golden_javascript():
    formatted = format_input(JS_POST, budget=512)
    assert formatted.text == "JS upload fails <code> $.ajax(...)"
    assert formatted.token_count == 5


@pytest.mark.parametrize(
    "language,prefix",
    [("java", "Java"), ("csharp", "C#"), ("python", "Python"), ("javascript", "JS")],
)
def test_format_prefix_per_language(language, prefix):
    post = Post(id="p", language=language, title="t", description="upload fails", code="x()")
    formatted = format_input(post)
    assert formatted.text == f"{prefix} upload fails <code> x()"
    assert formatted.text.split()[0] == prefix


def test_format_empty_code_keeps_separator():
    post = Post(id="p", language="javascript", title="t", description="upload fails", code="")
    assert format_input(post).text == "JS upload fails <code>"


def test_format_truncation_budget_three():
    formatted = format_input(JS_POST, budget=3)
    assert formatted.text == "JS upload fails"
    assert formatted.token_count == 3
    # independent recount
    assert len(formatted.text.split()) == 3


def test_format_budget_respected_under_counter():
    post = Post(
        id="p",
        language="java",
        title="t",
        description=" ".join(f"w{i}" for i in range(600)),
        code=" ".join(f"c{i}" for i in range(100)),
    )
    for budget in (1, 3, 512, 10_000):
        formatted = format_input(post, budget=budget)
        assert formatted.token_count == len(whitespace_tokens(formatted.text))
        assert formatted.token_count <= budget
    full = format_input(post, budget=10_000)
    assert full.text.split()[0] == "Java"
    assert full.text.count("<code>") == 1


def test_format_description_survives_preferentially():
    post = Post(id="p", language="java", title="t", description="one two three", code="four five")
    formatted = format_input(post, budget=4)
    assert formatted.text == "Java one two three"


def test_format_deterministic():
    a = format_input(JS_POST, budget=512)
    b = format_input(JS_POST, budget=512)
    assert a == b


def test_format_separator_exactly_once_even_if_content_contains_it():
    post = Post(
        id="p",
        language="python",
        title="t",
        description="what does <code> mean here",
        code="print('<code>')",
    )
    formatted = format_input(post, budget=512)
    assert formatted.text.count("<code>") == 1


def test_format_collapses_internal_whitespace():
    post = Post(id="p", language="python", title="t", description="a   b\n\tc", code="d \n e")
    assert format_input(post).text == "Python a b c <code> d e"


def test_format_missing_prefix_mapping():
    with pytest.raises(FormatError, match="prefix"):
        format_input(JS_POST, prefixes={"java": "Java"})


def test_format_budget_must_be_positive():
    with pytest.raises(FormatError):
        format_input(JS_POST, budget=0)


def test_custom_counter():
    # a counter that treats each character group of 2 whitespace tokens as one
    def pair_counter(text: str) -> list[str]:
        tokens = text.split()
        return [" ".join(tokens[i : i + 2]) for i in range(0, len(tokens), 2)]

    formatted = format_input(JS_POST, budget=2, counter=pair_counter)
    assert formatted.token_count == 2
    assert formatted.text == "JS upload fails <code>"


def test_formatted_dump_roundtrip(tmp_path):
    split = DatasetSplit(name="test", records=tuple(synthetic_posts(10, seed=4)))
    examples = format_split(split)
    path = tmp_path / "formatted.jsonl"
    write_formatted(examples, str(path))
    loaded = read_formatted(str(path))
    assert loaded == examples
    with open(path, encoding="utf-8") as handle:
        first = json.loads(handle.readline())
    assert set(first) == {"id", "input", "gold"}
