"""File formats and report emission.

Traces are stored as a one-line JSON header followed by the records,
either line-delimited text (one record per line, fixed field order,
shortest round-trip float formatting) or a compact binary body of
little-endian float64 triples for very long traces. Reports serialize
deterministically with 12 significant digits.
"""

from __future__ import annotations

import dataclasses
import json
import math
import struct
from pathlib import Path
from typing import Union

import numpy as np

from .assembly import BoundReport, TokenTrace
from .prequential import OnlineLossCurve
from .scaling import CheckpointCurve
from .spectral import SpectralEstimate

__all__ = [
    "save_trace",
    "load_trace",
    "emit_report",
    "load_report",
    "load_checkpoint_curves",
    "load_online_loss_curve",
    "load_matrix",
]

SCHEMA_VERSION = 1
_RECORD_STRUCT = struct.Struct("<3d")


def _header_dict(trace: TokenTrace, body_format: str) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "format": body_format,
        "vocab": trace.vocab,
        "alpha_used": trace.alpha_used,
        "num_records": trace.n,
        "source": trace.source,
        "is_subsample": trace.is_subsample,
        "subsample_size": trace.subsample_size,
        "parent_size": trace.parent_size,
    }


def save_trace(trace: TokenTrace, path: Union[str, Path], body_format: str = "text") -> None:
    """Write a trace file. body_format is "text" or "binary"."""
    path = Path(path)
    header = json.dumps(_header_dict(trace, body_format), sort_keys=False)
    if body_format == "text":
        lines = [header]
        for k in range(trace.n):
            lines.append(
                f"{k}\t{float(trace.nll_full[k])!r}"
                f"\t{float(trace.nll_quant[k])!r}\t{float(trace.proxy_mean_quant[k])!r}"
            )
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    elif body_format == "binary":
        body = np.column_stack(
            [trace.nll_full, trace.nll_quant, trace.proxy_mean_quant]
        ).astype("<f8")
        with path.open("wb") as fh:
            fh.write(header.encode("utf-8") + b"\n")
            fh.write(body.tobytes())
    else:
        raise ValueError(f"unknown body format {body_format!r}")


def load_trace(path: Union[str, Path]) -> TokenTrace:
    """Load and fully validate a trace file (either body format)."""
    path = Path(path)
    with path.open("rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValueError(f"{path}: unreadable trace header: {exc}") from exc
        if header.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(
                f"{path}: schema version {header.get('schema_version')} "
                f"!= {SCHEMA_VERSION}"
            )
        n = int(header["num_records"])
        if n < 1:
            raise ValueError(f"{path}: trace must contain at least one record")
        body_format = header.get("format", "text")
        if body_format == "binary":
            raw = fh.read()
            expected = n * _RECORD_STRUCT.size
            if len(raw) != expected:
                raise ValueError(
                    f"{path}: truncated binary body ({len(raw)} bytes, expected {expected})"
                )
            body = np.frombuffer(raw, dtype="<f8").reshape(n, 3)
        elif body_format == "text":
            rows = np.empty((n, 3))
            for i in range(n):
                line = fh.readline().decode("utf-8").rstrip("\n")
                if not line:
                    raise ValueError(f"{path}: truncated at record {i}")
                parts = line.split("\t")
                if len(parts) != 4:
                    raise ValueError(f"{path}: malformed record {i}: {line!r}")
                rows[i] = [float(parts[1]), float(parts[2]), float(parts[3])]
            body = rows
        else:
            raise ValueError(f"{path}: unknown body format {body_format!r}")
    return TokenTrace(
        vocab=int(header["vocab"]),
        alpha_used=float(header["alpha_used"]),
        nll_full=body[:, 0].copy(),
        nll_quant=body[:, 1].copy(),
        proxy_mean_quant=body[:, 2].copy(),
        source=header.get("source", "synthetic"),
        is_subsample=bool(header.get("is_subsample", False)),
        subsample_size=header.get("subsample_size"),
        parent_size=header.get("parent_size"),
    )


def _format_number(value):
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError("non-finite number in report")
        return float(f"{value:.12g}")
    return value


def _check_and_round(obj, context=""):
    if isinstance(obj, dict):
        return {k: _check_and_round(v, f"{context}.{k}" if context else str(k)) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_check_and_round(v, f"{context}[{i}]") for i, v in enumerate(obj)]
    if isinstance(obj, np.ndarray):
        if not np.all(np.isfinite(obj)):
            raise ValueError(f"non-finite value in field {context!r}")
        return [_check_and_round(float(v)) for v in obj.ravel()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if not math.isfinite(v):
            raise ValueError(f"non-finite value in field {context!r}")
        return _format_number(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _report_payload(report) -> dict:
    if isinstance(report, BoundReport):
        d = dataclasses.asdict(report)
        return {"kind": "bound_report", **d}
    if isinstance(report, SpectralEstimate):
        d = dataclasses.asdict(report)
        return {"kind": "spectral_estimate", **d}
    if isinstance(report, list):  # comparison table: list of row dicts
        return {"kind": "comparison_table", "rows": report}
    if isinstance(report, dict):
        return {"kind": "generic", **report}
    raise ValueError(f"cannot emit object of type {type(report).__name__}")


def emit_report(report, fmt: str = "json") -> str:
    """Serialize a report deterministically; refuses NaN/inf anywhere.

    JSON keeps the full structure; CSV flattens to a plottable table
    (one row per entry, one column per term).
    """
    payload = _check_and_round(_report_payload(report))
    if fmt == "json":
        return json.dumps(payload, indent=2, sort_keys=False, allow_nan=False) + "\n"
    if fmt == "csv":
        if payload["kind"] == "comparison_table":
            rows = payload["rows"]
            if not rows:
                return "spec\n"
            cols = list(rows[0].keys())
            lines = [",".join(cols)]
            for row in rows:
                lines.append(",".join(str(row[c]) for c in cols))
            return "\n".join(lines) + "\n"
        scalars = {
            k: v for k, v in payload.items() if not isinstance(v, (list, dict))
        }
        cols = list(scalars.keys())
        return ",".join(cols) + "\n" + ",".join(str(scalars[c]) for c in cols) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def load_report(text: str) -> dict:
    """Parse an emitted JSON report back into a dict."""
    return json.loads(text)


def load_checkpoint_curves(path: Union[str, Path]) -> list[CheckpointCurve]:
    """Read checkpoint curves from CSV with columns
    model_size,tokens_seen,loss[,extra metrics...]."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").strip().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty checkpoint CSV")
    cols = [c.strip() for c in lines[0].split(",")]
    required = ("model_size", "tokens_seen", "loss")
    for col in required:
        if col not in cols:
            raise ValueError(f"{path}: missing column {col!r}")
    extras = [c for c in cols if c not in required]
    by_model: dict[int, list] = {}
    for i, line in enumerate(lines[1:], start=2):
        vals = dict(zip(cols, (float(x) for x in line.split(","))))
        by_model.setdefault(int(vals["model_size"]), []).append(vals)
    curves = []
    for model_size in sorted(by_model):
        rows = sorted(by_model[model_size], key=lambda r: r["tokens_seen"])
        curves.append(
            CheckpointCurve(
                model_size=model_size,
                tokens_seen=np.array([r["tokens_seen"] for r in rows]),
                train_loss=np.array([r["loss"] for r in rows]),
                extras={c: np.array([r[c] for r in rows]) for c in extras},
            )
        )
    return curves


def load_online_loss_curve(path: Union[str, Path]) -> OnlineLossCurve:
    """Read an online/final loss curve from CSV with columns
    step,online_loss,final_loss."""
    path = Path(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 3:
        raise ValueError(f"{path}: expected 3 columns (step, online_loss, final_loss)")
    order = np.argsort(data[:, 0])
    return OnlineLossCurve(data[order, 1], data[order, 2])


def load_matrix(path: Union[str, Path]) -> np.ndarray:
    """Read a dense symmetric matrix from .npy or CSV."""
    path = Path(path)
    if path.suffix == ".npy":
        return np.load(path)
    return np.loadtxt(path, delimiter=",", ndmin=2)
