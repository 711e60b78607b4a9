"""Offline fine-tuning of a sidecar checkpoint on an input/gold dataset.

The dataset is line-delimited JSON with ``input`` and ``gold`` fields (extra
fields are ignored, so augmented-pipeline dumps train directly). Languages are
mixed by shuffling the concatenated data each epoch.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import torch

from .model import SidecarConfig, batch_ids, encode_pair, load_checkpoint, save_checkpoint
from .vocab import CharVocab


class TrainingError(Exception):
    pass


def load_pairs(path: str) -> list[tuple[str, str]]:
    pairs: list[tuple[str, str]] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                pairs.append((record["input"], record["gold"]))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise TrainingError(f"{path}:{line_number}: bad record ({exc})") from exc
    return pairs


@dataclass
class TrainResult:
    checkpoint_path: str
    loss_before: float
    loss_after: float
    epochs: int
    steps: int
    step_losses: list[float]


@torch.no_grad()
def dataset_loss(model, vocab: CharVocab, config: SidecarConfig, pairs: list[tuple[str, str]]) -> float:
    model.eval()
    total = 0.0
    for start in range(0, len(pairs), config.batch_size):
        chunk = pairs[start : start + config.batch_size]
        encoded = [encode_pair(vocab, config, src, tgt) for src, tgt in chunk]
        src = batch_ids([e[0] for e in encoded])
        tgt = batch_ids([e[1] for e in encoded])
        total += float(model.sequence_loss(src, tgt)) * len(chunk)
    return total / len(pairs)


def finetune(
    checkpoint_in: str,
    dataset_path: str,
    checkpoint_out: str,
    epochs: int | None = None,
    stage: str = "self_improve",
    learning_rate: float | None = None,
    batch_size: int | None = None,
    seed: int = 0,
) -> TrainResult:
    """Train the checkpoint on the dataset and save a new checkpoint.

    ``epochs`` defaults to the config value for ``stage`` (initial or
    self_improve). Refuses to train on an empty dataset.
    """
    pairs = load_pairs(dataset_path)
    if not pairs:
        raise TrainingError(f"{dataset_path}: dataset is empty, refusing to train")
    model, vocab, config, _ = load_checkpoint(checkpoint_in)
    if epochs is None:
        if stage not in config.epochs:
            raise TrainingError(f"unknown training stage {stage!r}")
        epochs = int(config.epochs[stage])
    if learning_rate is not None:
        config.learning_rate = learning_rate
    if batch_size is not None:
        config.batch_size = batch_size

    loss_before = dataset_loss(model, vocab, config, pairs)

    torch.manual_seed(seed)
    shuffler = torch.Generator().manual_seed(seed)
    optimizer = torch.optim.AdamW(model.parameters(), lr=config.learning_rate)
    step_losses: list[float] = []
    model.train()
    for _ in range(epochs):
        order = torch.randperm(len(pairs), generator=shuffler).tolist()
        for start in range(0, len(order), config.batch_size):
            chunk = [pairs[i] for i in order[start : start + config.batch_size]]
            encoded = [encode_pair(vocab, config, src, tgt) for src, tgt in chunk]
            src = batch_ids([e[0] for e in encoded])
            tgt = batch_ids([e[1] for e in encoded])
            optimizer.zero_grad()
            loss = model.sequence_loss(src, tgt)
            loss.backward()
            optimizer.step()
            step_losses.append(float(loss.detach()))

    loss_after = dataset_loss(model, vocab, config, pairs)
    save_checkpoint(checkpoint_out, model, vocab, config)
    return TrainResult(
        checkpoint_path=checkpoint_out,
        loss_before=loss_before,
        loss_after=loss_after,
        epochs=epochs,
        steps=len(step_losses),
        step_losses=step_losses,
    )


def init_checkpoint(path: str, dataset_path: str | None = None, seed: int = 0, config: SidecarConfig | None = None) -> str:
    """Create a randomly initialized checkpoint.

    The vocabulary is built from the dataset when one is given, otherwise
    from printable ASCII.
    """
    from .vocab import DEFAULT_CHARSET
    from .model import new_model

    config = config or SidecarConfig()
    if dataset_path:
        pairs = load_pairs(dataset_path)
        vocab = CharVocab.from_texts([text for pair in pairs for text in pair])
    else:
        vocab = CharVocab(DEFAULT_CHARSET)
    model = new_model(vocab, config, seed=seed)
    save_checkpoint(path, model, vocab, config)
    return path
