"""Extraction of token-level loss traces and checkpoint loss curves.

Runs a full-precision causal language model (and optionally an
externally quantized variant) over a tokenized corpus, producing the
per-token record files consumed by the bound assembler: realized NLL
under the full model, smoothed NLL under the quantized model, and the
exact model-distribution mean of the smoothed NLL. Also converts
ordered training checkpoints into the checkpoint-curve and online-loss
CSV formats used by the scaling and prequential tools.

Models are anything callable on a (batch, positions) integer tensor
that returns next-token logits of shape (batch, positions, vocab),
either directly or as the ``logits`` attribute of the returned object.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import torch

from tokenbound import TokenTrace, save_trace

__all__ = [
    "ExtractionJob",
    "CheckpointRecord",
    "extract_trace",
    "extract_loss_curves",
    "mean_corpus_loss",
]


def _as_sequences(corpus) -> list[torch.Tensor]:
    seqs = []
    for i, seq in enumerate(corpus):
        t = torch.as_tensor(seq, dtype=torch.long)
        if t.ndim != 1:
            raise ValueError(f"corpus sequence {i} must be one-dimensional")
        if len(t) < 2:
            raise ValueError(
                f"corpus sequence {i} has {len(t)} tokens; need at least 2 "
                "(one context token plus one target)"
            )
        seqs.append(t)
    if not seqs:
        raise ValueError("corpus is empty")
    return seqs


@dataclass
class ExtractionJob:
    """One extraction run: models, corpus, and sampling settings.

    ``alpha`` is the smoothing weight to apply to the quantized model's
    probabilities; it is chosen upstream (from the per-token complexity)
    and stored verbatim in the emitted trace header. ``model_quant``
    defaults to the full model, in which case the quantization gap is
    identically zero.
    """

    model_full: object
    corpus: Sequence
    max_tokens: int
    alpha: float
    model_quant: Optional[object] = None
    batch_size: int = 8
    seed: Optional[int] = None
    device: str = "cpu"
    parent_size: Optional[int] = None
    sequences: list[torch.Tensor] = field(init=False, repr=False)

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if not (0.0 <= self.alpha < 1.0):
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.sequences = _as_sequences(self.corpus)


def _logits(model, ids: torch.Tensor) -> torch.Tensor:
    out = model(ids)
    logits = getattr(out, "logits", out)
    if logits.ndim != 3:
        raise ValueError(
            f"model output must be (batch, positions, vocab); got shape "
            f"{tuple(logits.shape)}"
        )
    return logits.to(torch.float64)


def _model_vocab(model, probe: torch.Tensor) -> int:
    with torch.no_grad():
        return int(_logits(model, probe[None, :2]).shape[-1])


def check_tokenizers_match(tok_full, tok_quant) -> None:
    """Raise unless the two tokenizers define the same vocabulary."""
    if tok_full is tok_quant:
        return
    vocab_full = tok_full.get_vocab()
    vocab_quant = tok_quant.get_vocab()
    if vocab_full != vocab_quant:
        raise ValueError("tokenizer mismatch between full and quantized models")


def _sample_positions(job: ExtractionJob) -> list[tuple[int, int]]:
    """Uniform sample over (sequence, position) pairs with position >= 1."""
    frame = [
        (s, p) for s, seq in enumerate(job.sequences) for p in range(1, len(seq))
    ]
    rng = np.random.default_rng(job.seed)
    if job.max_tokens >= len(frame):
        picks = frame
    else:
        idx = rng.choice(len(frame), size=job.max_tokens, replace=False)
        picks = [frame[i] for i in sorted(idx)]
    return picks


def extract_trace(
    job: ExtractionJob,
    out_path: Union[str, Path, None] = None,
    body_format: str = "text",
) -> TokenTrace:
    """Run both models over the sampled token-context pairs.

    Per pair: nll_full is the full model's NLL of the realized token;
    nll_quant is the NLL of the realized token under the smoothed
    quantized distribution (1-alpha)*p_q + alpha/V, mixed on
    probabilities; proxy_mean_quant is the exact mean of that smoothed
    NLL under the *full* model's distribution, summed over the whole
    vocabulary. Writes a schema-valid trace file when out_path is given.
    """
    model_quant = job.model_quant if job.model_quant is not None else job.model_full
    probe = job.sequences[0]
    vocab = _model_vocab(job.model_full, probe)
    vocab_quant = _model_vocab(model_quant, probe)
    if vocab != vocab_quant:
        raise ValueError(
            f"vocabulary mismatch: full model has {vocab} entries, "
            f"quantized model has {vocab_quant}"
        )

    picks = _sample_positions(job)
    by_seq: dict[int, list[int]] = {}
    for s, p in picks:
        by_seq.setdefault(s, []).append(p)

    alpha = job.alpha
    cap = math.inf if alpha == 0.0 else math.log(vocab / alpha)
    nll_full = np.empty(len(picks))
    nll_quant = np.empty(len(picks))
    proxy = np.empty(len(picks))

    row = 0
    device = torch.device(job.device)
    with torch.no_grad():
        for s in sorted(by_seq):
            seq = job.sequences[s].to(device)
            positions = torch.as_tensor(by_seq[s], device=device)
            logp_h = torch.log_softmax(
                _logits(job.model_full, seq[None, :-1]), dim=-1
            )[0, positions - 1]
            p_h = torch.exp(logp_h)
            p_q = torch.softmax(_logits(model_quant, seq[None, :-1]), dim=-1)[
                0, positions - 1
            ]
            p_sq = (1.0 - alpha) * p_q + alpha / vocab
            nlls_sq = -torch.log(p_sq)
            targets = seq[positions]
            take = torch.arange(len(positions), device=device)
            k = len(positions)
            nll_full[row : row + k] = (-logp_h[take, targets]).cpu().numpy()
            nll_quant[row : row + k] = np.minimum(
                nlls_sq[take, targets].cpu().numpy(), cap
            )
            proxy[row : row + k] = (p_h * nlls_sq).sum(dim=-1).cpu().numpy()
            row += k

    frame_note = f"extracted:uniform-token-positions:seed={job.seed}"
    is_subsample = job.parent_size is not None
    trace = TokenTrace(
        vocab=vocab,
        alpha_used=alpha,
        nll_full=nll_full,
        nll_quant=nll_quant,
        proxy_mean_quant=proxy,
        source=frame_note,
        is_subsample=is_subsample,
        subsample_size=len(picks) if is_subsample else None,
        parent_size=job.parent_size,
    )
    if out_path is not None:
        save_trace(trace, out_path, body_format)
    return trace


@dataclass(frozen=True)
class CheckpointRecord:
    """A training checkpoint with the metadata the curves need."""

    model: object
    tokens_seen: float
    model_size: int

    def __post_init__(self):
        if self.tokens_seen is None or self.model_size is None:
            raise ValueError("checkpoint is missing tokens_seen/model_size metadata")
        if self.tokens_seen <= 0:
            raise ValueError("tokens_seen must be positive")


def mean_corpus_loss(model, corpus, device: str = "cpu") -> float:
    """Mean next-token NLL of the model over every position of the corpus."""
    seqs = _as_sequences(corpus)
    total = 0.0
    count = 0
    dev = torch.device(device)
    with torch.no_grad():
        for seq in seqs:
            seq = seq.to(dev)
            logp = torch.log_softmax(_logits(model, seq[None, :-1]), dim=-1)[0]
            targets = seq[1:]
            total += float(-logp[torch.arange(len(targets)), targets].sum())
            count += len(targets)
    return total / count


def extract_loss_curves(
    checkpoints: Sequence[CheckpointRecord],
    corpus,
    checkpoint_csv: Union[str, Path],
    online_csv: Union[str, Path],
    device: str = "cpu",
) -> dict:
    """Score ordered checkpoints on the corpus; write both CSV formats.

    The checkpoint CSV holds one row per checkpoint
    (model_size,tokens_seen,loss). The online-loss CSV approximates the
    training-order online loss piecewise-constant from the left: row i
    is scored by the latest checkpoint strictly before checkpoint i (the
    first row by itself), and the final column by the last checkpoint,
    so a single checkpoint yields an exactly-zero excess.
    """
    if not checkpoints:
        raise ValueError("need at least one checkpoint")
    seen = [c.tokens_seen for c in checkpoints]
    if any(b <= a for a, b in zip(seen, seen[1:])):
        raise ValueError("checkpoints must be strictly ordered by tokens_seen")

    losses = [mean_corpus_loss(c.model, corpus, device) for c in checkpoints]
    final = losses[-1]

    ckpt_lines = ["model_size,tokens_seen,loss"]
    for c, loss in zip(checkpoints, losses):
        ckpt_lines.append(f"{c.model_size},{float(c.tokens_seen)!r},{loss!r}")
    Path(checkpoint_csv).write_text("\n".join(ckpt_lines) + "\n", encoding="utf-8")

    online_lines = ["step,online_loss,final_loss"]
    for i, c in enumerate(checkpoints):
        online = losses[max(i - 1, 0)]
        online_lines.append(f"{float(c.tokens_seen)!r},{online!r},{final!r}")
    Path(online_csv).write_text("\n".join(online_lines) + "\n", encoding="utf-8")

    return {"losses": losses, "final_loss": final}
