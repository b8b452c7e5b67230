"""Model checkpoints: a JSON header line followed by raw tensor bytes.

The header is self-describing (encoder config, vocabulary with counts and
its hash, tensor names/shapes/dtypes); tensors follow in header order as
little-endian C-contiguous bytes.  Serialization is canonical, so
save -> load -> save reproduces the file byte for byte.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .corpus import Vocabulary
from .embeddings import EmbeddingStore
from .encoders import (
    GATES,
    BowParameters,
    EncoderConfig,
    LstmParameters,
    Model,
)
from .errors import FormatError

MAGIC = "defembed-checkpoint"
VERSION = 1


def vocab_hash(vocab: Vocabulary) -> str:
    payload = "\n".join(f"{tok}\t{vocab.counts[tok]}" for tok in vocab.id_to_token)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def save_checkpoint(model: Model, path: str | Path) -> None:
    tensors = list(model.params.named_tensors())
    header = {
        "format": MAGIC,
        "version": VERSION,
        "config": asdict(model.config),
        "vocab_hash": vocab_hash(model.vocab),
        "vocab": [[tok, model.vocab.counts[tok]] for tok in model.vocab.id_to_token],
        "tensors": [
            {"name": name, "shape": list(arr.shape), "dtype": str(arr.dtype)}
            for name, arr in tensors
        ],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(blob + b"\n")
        for _, arr in tensors:
            fh.write(np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("<")).tobytes())


def load_checkpoint(path: str | Path, input_store: EmbeddingStore | None = None) -> Model:
    with open(path, "rb") as fh:
        line = fh.readline()
        try:
            header = json.loads(line)
        except json.JSONDecodeError:
            raise FormatError("checkpoint header is not valid JSON", str(path), 1) from None
        if header.get("format") != MAGIC or header.get("version") != VERSION:
            raise FormatError("not a recognized checkpoint file", str(path), 1)
        config = EncoderConfig(**header["config"])
        tokens = [tok for tok, _ in header["vocab"]]
        vocab = Vocabulary(
            token_to_id={tok: i for i, tok in enumerate(tokens)},
            id_to_token=tokens,
            counts={tok: int(n) for tok, n in header["vocab"]},
        )
        if vocab_hash(vocab) != header["vocab_hash"]:
            raise FormatError("vocabulary hash mismatch", str(path))
        arrays: dict[str, np.ndarray] = {}
        for spec in header["tensors"]:
            dtype = np.dtype(spec["dtype"]).newbyteorder("<")
            shape = tuple(spec["shape"])
            nbytes = int(np.prod(shape)) * dtype.itemsize
            raw = fh.read(nbytes)
            if len(raw) != nbytes:
                raise FormatError(f"truncated tensor {spec['name']!r}", str(path))
            arrays[spec["name"]] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
        if fh.read(1):
            raise FormatError("trailing bytes after final tensor", str(path))
    params = _assemble(config, arrays, path)
    return Model(config=config, params=params, vocab=vocab, input_store=input_store)


def _assemble(config: EncoderConfig, arrays: dict[str, np.ndarray], path):
    emb = arrays.pop("input_embeddings", None)
    if (emb is None) != (config.input_mode == "pretrained_fixed"):
        raise FormatError("input_embeddings tensor inconsistent with input_mode", str(path))
    try:
        if config.arch == "bow":
            params = BowParameters(W=arrays.pop("W"), input_embeddings=emb)
        else:
            params = LstmParameters(
                W={s: arrays.pop(f"W_{s}") for s in GATES},
                U={s: arrays.pop(f"U_{s}") for s in GATES},
                b={s: arrays.pop(f"b_{s}") for s in GATES},
                P=arrays.pop("P"),
                p=arrays.pop("p"),
                input_embeddings=emb,
            )
    except KeyError as exc:
        raise FormatError(f"missing tensor {exc.args[0]!r}", str(path)) from None
    if arrays:
        raise FormatError(f"unexpected tensors: {', '.join(sorted(arrays))}", str(path))
    return params


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
