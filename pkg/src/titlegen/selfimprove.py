"""Training-set augmentation: generate k candidates per example, keep the one
closest to the gold title by ROUGE-L, and hand the augmented set to a trainer.

The augmented dataset pairs each input with its best prediction (the original
gold titles are carried along for bookkeeping but are not retained as
targets). Cardinality is preserved: every example yields exactly one pair.
"""
from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import requests

from .corpus import FormattedExample
from .generator import GenerationRequest, GeneratorError, TitleGenerator
from .metrics import normalize_tokens, rouge_l

SELECTION_METRICS = ("f1", "recall")


class AugmentationError(Exception):
    def __init__(self, message: str, example_id: str | None = None):
        super().__init__(message)
        self.example_id = example_id


class HandoffError(Exception):
    pass


def best_candidate(gold: str, candidates: Sequence[str], metric: str = "f1") -> tuple[int, float]:
    """Index and score of the candidate with maximal ROUGE-L against ``gold``.

    Ties resolve to the lowest index (the generator's own earlier candidate).
    """
    if not candidates:
        raise ValueError("candidate list is empty")
    if metric not in SELECTION_METRICS:
        raise ValueError(f"selection metric must be one of {SELECTION_METRICS}, got {metric!r}")
    gold_tokens = normalize_tokens(gold)
    best_index = 0
    best_score = -1.0
    for index, candidate in enumerate(candidates):
        score = rouge_l(gold_tokens, normalize_tokens(candidate))
        value = score.f1 if metric == "f1" else score.recall
        if value > best_score:
            best_index = index
            best_score = value
    return best_index, best_score


@dataclass(frozen=True)
class AugmentedPair:
    id: str
    input: str
    prediction: str
    gold: str
    rouge_l_f1: float
    candidate_count: int


@dataclass
class AugmentationManifest:
    source_digest: str
    generator_id: str
    k: int
    record_count: int
    mean_rouge_l_f1: float
    selection_metric: str
    ack_token: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @staticmethod
    def from_json(text: str) -> "AugmentationManifest":
        return AugmentationManifest(**json.loads(text))


def dataset_digest(examples: Sequence[FormattedExample]) -> str:
    hasher = hashlib.sha256()
    for example in examples:
        hasher.update(
            json.dumps(
                {"id": example.id, "input": example.input, "gold": example.gold},
                ensure_ascii=False,
                sort_keys=True,
            ).encode("utf-8")
        )
        hasher.update(b"\n")
    return hasher.hexdigest()


def _generate_with_retries(
    generator: TitleGenerator,
    request: GenerationRequest,
    example_id: str,
    max_attempts: int,
    backoff: float,
) -> tuple[str, ...]:
    last_error: GeneratorError | None = None
    for attempt in range(max_attempts):
        try:
            return generator.generate(request).candidates
        except GeneratorError as exc:
            last_error = exc
            if attempt + 1 < max_attempts:
                time.sleep(backoff * (2**attempt))
    raise AugmentationError(
        f"generation failed for example {example_id!r} after {max_attempts} attempts: {last_error}",
        example_id=example_id,
    )


def augment(
    examples: Sequence[FormattedExample],
    generator: TitleGenerator,
    k: int = 20,
    parallelism: int = 1,
    metric: str = "f1",
    max_new_tokens: int = 48,
    seed: int | None = None,
    max_attempts: int = 3,
    backoff: float = 0.25,
) -> tuple[list[AugmentedPair], AugmentationManifest]:
    """Run the self-improvement pass over a formatted dataset.

    Generation fans out over a bounded thread pool; emission order always
    matches input order. A persistent generator failure aborts the whole run
    (naming the example) rather than silently dropping records.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if parallelism < 1:
        raise ValueError(f"parallelism must be >= 1, got {parallelism}")

    def produce(example: FormattedExample) -> AugmentedPair:
        request = GenerationRequest(input=example.input, num_candidates=k, max_new_tokens=max_new_tokens, seed=seed)
        candidates = _generate_with_retries(generator, request, example.id, max_attempts, backoff)
        index, _ = best_candidate(example.gold, candidates, metric=metric)
        prediction = candidates[index]
        score = rouge_l(normalize_tokens(example.gold), normalize_tokens(prediction))
        return AugmentedPair(
            id=example.id,
            input=example.input,
            prediction=prediction,
            gold=example.gold,
            rouge_l_f1=score.f1,
            candidate_count=k,
        )

    if parallelism == 1:
        pairs = [produce(example) for example in examples]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            pairs = list(pool.map(produce, examples))

    mean_score = sum(p.rouge_l_f1 for p in pairs) / len(pairs) if pairs else 0.0
    manifest = AugmentationManifest(
        source_digest=dataset_digest(examples),
        generator_id=generator.model_id,
        k=k,
        record_count=len(pairs),
        mean_rouge_l_f1=mean_score,
        selection_metric=metric,
    )
    return pairs, manifest


def write_augmented(pairs: Sequence[AugmentedPair], path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for pair in pairs:
            handle.write(json.dumps(asdict(pair), ensure_ascii=False, sort_keys=True) + "\n")


def write_trainer_view(pairs: Sequence[AugmentedPair], path: str) -> None:
    """Emit the augmented set in the trainer's input/gold schema.

    The selected prediction becomes the training target (``gold`` field).
    """
    with open(path, "w", encoding="utf-8") as handle:
        for pair in pairs:
            handle.write(
                json.dumps(
                    {"id": pair.id, "input": pair.input, "gold": pair.prediction},
                    ensure_ascii=False,
                    sort_keys=True,
                )
                + "\n"
            )


def handoff_finetune(
    manifest: AugmentationManifest,
    dataset_path: str,
    endpoint: str,
    timeout: float = 30.0,
) -> str:
    """Announce the augmented dataset to the trainer endpoint.

    POSTs ``{dataset_path, record_count, source_digest, generator_id, k}`` to
    ``{endpoint}/finetune`` and records the returned acknowledgment token in
    the manifest. The trainer must echo the record count.
    """
    endpoint = endpoint.rstrip("/")
    payload = {
        "dataset_path": dataset_path,
        "record_count": manifest.record_count,
        "source_digest": manifest.source_digest,
        "generator_id": manifest.generator_id,
        "k": manifest.k,
    }
    try:
        response = requests.post(f"{endpoint}/finetune", json=payload, timeout=timeout)
    except requests.RequestException as exc:
        raise HandoffError(f"trainer endpoint {endpoint} unreachable: {exc}") from exc
    if response.status_code != 200:
        raise HandoffError(f"trainer endpoint {endpoint} rejected handoff: status {response.status_code}")
    try:
        body = response.json()
    except ValueError as exc:
        raise HandoffError(f"trainer endpoint {endpoint} returned non-JSON acknowledgment") from exc
    ack = body.get("ack")
    if not isinstance(ack, str) or not ack:
        raise HandoffError(f"trainer endpoint {endpoint} returned no acknowledgment token")
    received = body.get("received_records")
    if received != manifest.record_count:
        raise HandoffError(
            f"trainer endpoint {endpoint} acknowledged {received} records, expected {manifest.record_count}"
        )
    manifest.ack_token = ack
    return ack
