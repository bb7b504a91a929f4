"""Adapters from real causal language models to the trace and loss-curve
file formats consumed by the bound toolkit."""

from .extract import (
    CheckpointRecord,
    ExtractionJob,
    check_tokenizers_match,
    extract_loss_curves,
    extract_trace,
    mean_corpus_loss,
)

__version__ = "0.1.0"

__all__ = [
    "CheckpointRecord",
    "ExtractionJob",
    "check_tokenizers_match",
    "extract_loss_curves",
    "extract_trace",
    "mean_corpus_loss",
]
