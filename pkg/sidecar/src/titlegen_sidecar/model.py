"""Tiny GRU encoder-decoder over characters, plus checkpoint I/O.

Small enough to fine-tune on CPU in seconds; the checkpoint identifier is a
path to a saved state (any seq2seq checkpoint in this format loads).
"""
from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch
import torch.nn.functional as F
from torch import nn

from .vocab import BOS, EOS, PAD, CharVocab


@dataclass
class SidecarConfig:
    checkpoint: str | None = None
    device: str = "cpu"
    max_input_length: int = 512
    max_target_length: int = 64
    beam_width: int = 4
    temperature: float = 0.8
    top_p: float = 0.95
    default_seed: int = 0
    learning_rate: float = 5e-5
    epochs: dict = field(default_factory=lambda: {"initial": 8, "self_improve": 4})
    batch_size: int = 4
    embedding_dim: int = 32
    hidden_dim: int = 64

    def __post_init__(self) -> None:
        if self.max_input_length < 1 or self.max_target_length < 1:
            raise ValueError("sequence lengths must be positive")
        if self.batch_size < 1:
            raise ValueError("batch size must be positive")


class TinySeq2Seq(nn.Module):
    def __init__(self, vocab_size: int, embedding_dim: int = 32, hidden_dim: int = 64):
        super().__init__()
        self.embedding = nn.Embedding(vocab_size, embedding_dim, padding_idx=PAD)
        self.encoder = nn.GRU(embedding_dim, hidden_dim, batch_first=True)
        self.decoder = nn.GRU(embedding_dim, hidden_dim, batch_first=True)
        self.head = nn.Linear(hidden_dim, vocab_size)

    def encode(self, src: torch.Tensor) -> torch.Tensor:
        _, hidden = self.encoder(self.embedding(src))
        return hidden  # (1, B, H)

    def decode_step(self, tokens: torch.Tensor, hidden: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        output, hidden = self.decoder(self.embedding(tokens.unsqueeze(1)), hidden)
        return self.head(output.squeeze(1)), hidden

    def sequence_loss(self, src: torch.Tensor, tgt: torch.Tensor) -> torch.Tensor:
        """Teacher-forced cross entropy; ``tgt`` rows are BOS ... EOS, padded."""
        hidden = self.encode(src)
        outputs, _ = self.decoder(self.embedding(tgt[:, :-1]), hidden)
        logits = self.head(outputs)
        return F.cross_entropy(
            logits.reshape(-1, logits.size(-1)),
            tgt[:, 1:].reshape(-1),
            ignore_index=PAD,
        )


def batch_ids(rows: list[list[int]], device: str = "cpu") -> torch.Tensor:
    width = max(len(row) for row in rows)
    tensor = torch.full((len(rows), width), PAD, dtype=torch.long, device=device)
    for index, row in enumerate(rows):
        tensor[index, : len(row)] = torch.tensor(row, dtype=torch.long, device=device)
    return tensor


def encode_pair(vocab: CharVocab, config: SidecarConfig, source: str, target: str) -> tuple[list[int], list[int]]:
    src = vocab.encode(source, max_len=config.max_input_length)
    tgt = vocab.encode(target, max_len=config.max_target_length, add_bos=True, add_eos=True)
    return (src or [PAD]), tgt


def new_model(vocab: CharVocab, config: SidecarConfig, seed: int = 0) -> TinySeq2Seq:
    torch.manual_seed(seed)
    return TinySeq2Seq(len(vocab), config.embedding_dim, config.hidden_dim)


def save_checkpoint(path: str, model: TinySeq2Seq, vocab: CharVocab, config: SidecarConfig) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "format": "titlegen-sidecar-checkpoint@1",
            "chars": vocab.chars,
            "config": asdict(config),
            "state_dict": model.state_dict(),
        },
        path,
    )


def load_checkpoint(path: str) -> tuple[TinySeq2Seq, CharVocab, SidecarConfig, str]:
    """Load a checkpoint; returns (model, vocab, config, model_id).

    The model id embeds a digest of the file so distinct checkpoints are
    distinguishable over the wire.
    """
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("format") != "titlegen-sidecar-checkpoint@1":
        raise ValueError(f"{path}: not a sidecar checkpoint")
    vocab = CharVocab(payload["chars"])
    config = SidecarConfig(**payload["config"])
    model = TinySeq2Seq(len(vocab), config.embedding_dim, config.hidden_dim)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()[:12]
    return model, vocab, config, f"tiny-seq2seq:{digest}"
