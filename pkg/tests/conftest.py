from __future__ import annotations

import json
import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from titlegen import corpus

WORDS = (
    "error exception null pointer array list string loop index file upload request response "
    "server client socket thread async await promise callback json parse database query join "
    "table column widget layout render click event handler module import compile build test "
    "cache memory leak crash timeout retry session token auth login route controller model view"
).split()


def synthetic_posts(count: int, seed: int = 0, languages=corpus.LANGUAGES) -> list[corpus.Post]:
    """Posts whose titles share vocabulary with their descriptions, so mock
    candidates overlap the gold titles."""
    rng = random.Random(seed)
    posts = []
    for index in range(count):
        language = languages[index % len(languages)]
        title_words = rng.sample(WORDS, rng.randint(3, 7))
        extra = rng.sample(WORDS, rng.randint(3, 8))
        description = " ".join(title_words + extra)
        code = f"{rng.choice(title_words)}({rng.choice(WORDS)})" if rng.random() < 0.8 else ""
        posts.append(
            corpus.Post(
                id=f"p{index:04d}",
                language=language,
                title=" ".join(title_words),
                description=description,
                code=code,
            )
        )
    return posts


def write_posts(posts, path: Path) -> Path:
    with open(path, "w", encoding="utf-8") as handle:
        for post in posts:
            handle.write(
                json.dumps(
                    {
                        "id": post.id,
                        "language": post.language,
                        "title": post.title,
                        "description": post.description,
                        "code": post.code,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    return path


@pytest.fixture
def small_split() -> corpus.DatasetSplit:
    return corpus.DatasetSplit(name="test", records=tuple(synthetic_posts(12, seed=3)))


def gold_variations(gold: str) -> list[str]:
    """Four near-duplicates of the gold phrasing (the consensus cluster)."""
    tokens = gold.split()
    reordered = tokens[1:] + tokens[:1]
    return [
        gold,
        " ".join(tokens[:-1]) if len(tokens) > 1 else gold + " issue",
        " ".join(reordered),
        " ".join(tokens[1:]) if len(tokens) > 2 else "fix " + gold,
    ]


def consensus_candidates(rng: random.Random, gold: str, total: int = 30) -> list[str]:
    """Candidate set with a 4-strong near-duplicate cluster of the gold placed
    away from index 0, among one-off candidates that share topic words."""
    topic = gold.split()
    cluster = gold_variations(gold)
    scattered = []
    for index in range(total - len(cluster)):
        noise = [f"n{rng.randrange(10_000)}x{index}" for _ in range(rng.randint(3, 5))]
        words = rng.sample(topic, min(len(topic), rng.randint(1, 2))) + noise
        rng.shuffle(words)
        scattered.append(" ".join(words))
    candidates = list(scattered)
    positions = sorted(rng.sample(range(1, total), len(cluster)))
    for position, member in zip(positions, cluster):
        candidates.insert(position, member)
    return candidates


class ConsensusBackend:
    """Backend double emitting consensus-structured candidate sets: the first
    candidate is never the cluster, mirroring a decoder whose top choice is
    not the most relevant title."""

    def __init__(self, seed: int, gold_by_input: dict[str, str]):
        self.seed = seed
        self.gold_by_input = gold_by_input
        self.model_id = f"consensus:{seed}"

    def generate(self, request):
        from titlegen.generator import GenerationResponse

        gold = self.gold_by_input[request.input]
        rng = random.Random(f"{self.seed}|{request.input}")
        candidates = consensus_candidates(rng, gold, total=max(request.num_candidates, 6))
        return GenerationResponse(candidates=tuple(candidates[: request.num_candidates]), model_id=self.model_id)


@pytest.fixture
def wire_fixtures_dir() -> Path:
    return Path(__file__).parent.parent / "fixtures" / "wire"
