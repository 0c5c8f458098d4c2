"""Model checkpoints: one JSON header line + little-endian f32 blob."""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .distill import DistillConfig, MlpModel
from .errors import DataError
from .graph import Graph
from .scorer import ScorerConfig, ScorerModel

__all__ = [
    "save_checkpoint",
    "load_checkpoint",
    "save_scorer",
    "load_scorer",
    "save_student",
    "load_student",
]


def save_checkpoint(
    path: str | Path, kind: str, config: dict, arrays: dict[str, np.ndarray]
) -> None:
    header = {
        "kind": kind,
        "config": config,
        "arrays": [
            {"name": name, "shape": list(arr.shape)} for name, arr in arrays.items()
        ],
    }
    with Path(path).open("wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
        for arr in arrays.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    newline = raw.find(b"\n")
    if newline < 0:
        raise DataError(f"{path}: malformed checkpoint (no header line)")
    header = json.loads(raw[:newline].decode("utf-8"))
    blob = np.frombuffer(raw[newline + 1 :], dtype="<f4")
    arrays: dict[str, np.ndarray] = {}
    offset = 0
    for meta in header.get("arrays", []):
        shape = tuple(int(s) for s in meta["shape"])
        size = int(np.prod(shape)) if shape else 1
        if offset + size > blob.size:
            raise DataError(f"{path}: parameter blob shorter than header claims")
        arrays[meta["name"]] = blob[offset : offset + size].reshape(shape).astype(np.float64)
        offset += size
    if offset != blob.size:
        raise DataError(f"{path}: {blob.size - offset} unexplained trailing floats")
    return header, arrays


def save_scorer(path: str | Path, model: ScorerModel) -> None:
    arrays = {"x_prime": model.x_prime}
    if model.encoder_weights is not None:
        arrays["encoder_weights"] = model.encoder_weights
    save_checkpoint(path, "scorer", asdict(model.config), arrays)


def load_scorer(path: str | Path, g: Graph) -> ScorerModel:
    """Rehydrate a scorer; frozen features come from the graph."""
    header, arrays = load_checkpoint(path)
    if header.get("kind") != "scorer":
        raise DataError(f"{path}: expected a scorer checkpoint, got {header.get('kind')!r}")
    config = ScorerConfig(**header["config"])
    x_prime = arrays["x_prime"]
    if x_prime.shape[0] != g.num_nodes:
        raise DataError(
            f"{path}: checkpoint has {x_prime.shape[0]} node rows, graph has {g.num_nodes}"
        )
    return ScorerModel(
        config=config,
        x_prime=x_prime,
        encoder_weights=arrays.get("encoder_weights"),
        features=g.features,
    )


def save_student(path: str | Path, model: MlpModel) -> None:
    arrays = {
        "w1": model.w1,
        "b1": model.b1,
        "w2": model.w2,
        "b2": model.b2,
        "x_prime": model.x_prime,
    }
    save_checkpoint(path, "mlp", asdict(model.config), arrays)


def load_student(path: str | Path, g: Graph) -> MlpModel:
    header, arrays = load_checkpoint(path)
    if header.get("kind") != "mlp":
        raise DataError(f"{path}: expected an mlp checkpoint, got {header.get('kind')!r}")
    config = DistillConfig(**header["config"])
    if arrays["x_prime"].shape[0] != g.num_nodes:
        raise DataError(f"{path}: node count mismatch with graph")
    return MlpModel(
        config=config,
        w1=arrays["w1"],
        b1=arrays["b1"],
        w2=arrays["w2"],
        b2=arrays["b2"],
        x_prime=arrays["x_prime"],
        features=g.features,
    )
