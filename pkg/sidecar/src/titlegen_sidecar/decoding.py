"""Beam-search and nucleus-sampling decoding for the tiny seq2seq model.

Both decoders return exactly ``n`` candidates ranked best-first by total
sequence log-probability. Special tokens other than EOS are never emitted and
EOS is blocked on the first step, so candidates are always nonempty strings.
"""
from __future__ import annotations

import torch
import torch.nn.functional as F

from .model import TinySeq2Seq
from .vocab import BOS, EOS, PAD, UNK, CharVocab


def _mask_specials(logits: torch.Tensor, allow_eos: bool) -> torch.Tensor:
    masked = logits.clone()
    masked[..., PAD] = float("-inf")
    masked[..., BOS] = float("-inf")
    masked[..., UNK] = float("-inf")
    if not allow_eos:
        masked[..., EOS] = float("-inf")
    return masked


@torch.no_grad()
def beam_search(
    model: TinySeq2Seq,
    vocab: CharVocab,
    src_ids: list[int],
    n: int,
    beam_width: int,
    max_new_tokens: int,
) -> list[str]:
    width = max(beam_width, n)
    src = torch.tensor([src_ids], dtype=torch.long)
    hidden = model.encode(src)
    # beam: (logprob, token ids, hidden, finished)
    beams: list[tuple[float, list[int], torch.Tensor, bool]] = [(0.0, [], hidden, False)]
    for step in range(max_new_tokens):
        expanded: list[tuple[float, list[int], torch.Tensor, bool]] = []
        for logprob, tokens, state, finished in beams:
            if finished:
                expanded.append((logprob, tokens, state, True))
                continue
            previous = torch.tensor([tokens[-1] if tokens else BOS], dtype=torch.long)
            logits, next_state = model.decode_step(previous, state)
            candidates = F.log_softmax(_mask_specials(logits, allow_eos=step > 0), dim=-1).squeeze(0)
            values, indices = torch.topk(candidates, min(width, (candidates > float("-inf")).sum().item()))
            for value, index in zip(values.tolist(), indices.tolist()):
                if index == EOS:
                    expanded.append((logprob + value, tokens, next_state, True))
                else:
                    expanded.append((logprob + value, tokens + [index], next_state, False))
        expanded.sort(key=lambda beam: -beam[0])
        beams = expanded[:width]
        if all(beam[3] for beam in beams):
            break
    beams.sort(key=lambda beam: -beam[0])
    texts = [vocab.decode(tokens) for _, tokens, _, _ in beams if tokens]
    if not texts:
        raise RuntimeError("beam search produced no candidates")
    while len(texts) < n:  # vocabulary smaller than n: cycle the top beams
        texts.append(texts[len(texts) % max(len(texts), 1)])
    return texts[:n]


@torch.no_grad()
def nucleus_sample(
    model: TinySeq2Seq,
    vocab: CharVocab,
    src_ids: list[int],
    n: int,
    temperature: float,
    top_p: float,
    max_new_tokens: int,
    seed: int,
) -> list[str]:
    generator = torch.Generator().manual_seed(seed)
    src = torch.tensor([src_ids], dtype=torch.long)
    hidden0 = model.encode(src)
    scored: list[tuple[float, str]] = []
    for _ in range(n):
        hidden = hidden0
        tokens: list[int] = []
        logprob = 0.0
        for step in range(max_new_tokens):
            previous = torch.tensor([tokens[-1] if tokens else BOS], dtype=torch.long)
            logits, hidden = model.decode_step(previous, hidden)
            logits = _mask_specials(logits, allow_eos=step > 0).squeeze(0) / temperature
            probs = F.softmax(logits, dim=-1)
            sorted_probs, sorted_indices = torch.sort(probs, descending=True)
            cumulative = torch.cumsum(sorted_probs, dim=-1)
            keep = cumulative - sorted_probs < top_p  # always keeps the top token
            nucleus = sorted_probs * keep
            nucleus = nucleus / nucleus.sum()
            choice = torch.multinomial(nucleus, 1, generator=generator).item()
            token = sorted_indices[choice].item()
            logprob += float(torch.log(probs[token]))
            if token == EOS:
                break
            tokens.append(token)
        scored.append((logprob, vocab.decode(tokens)))
    scored.sort(key=lambda pair: -pair[0])
    return [text for _, text in scored]
