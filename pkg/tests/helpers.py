"""Shared fixture builders for the test suite.

Everything here is seeded, so any test can rebuild the exact same toy
corpus, store or model.
"""

from __future__ import annotations

import numpy as np

from defembed.corpus import DefinitionRecord, build_vocabulary
from defembed.embeddings import EmbeddingStore
from defembed.encoders import EncoderConfig, Model, init_parameters


def toy_records(n: int = 40, n_tokens: int = 30, seed: int = 0) -> list[DefinitionRecord]:
    """Random definitions of 3-6 tokens drawn from a small shared pool."""
    rng = np.random.default_rng(seed)
    pool = [f"tok{j:02d}" for j in range(n_tokens)]
    records = []
    for i in range(n):
        size = int(rng.integers(3, 7))
        toks = rng.choice(n_tokens, size=size, replace=False)
        records.append(DefinitionRecord(f"word{i:03d}", tuple(pool[j] for j in toks), "dictionary"))
    return records


def random_store(
    tokens: list[str], dim: int, seed: int = 0, language: str = "en", signed: bool = False
) -> EmbeddingStore:
    rng = np.random.default_rng(seed)
    if signed:
        matrix = rng.uniform(-1.0, 1.0, size=(len(tokens), dim))
    else:
        matrix = rng.normal(size=(len(tokens), dim))
    return EmbeddingStore(tokens, matrix.astype(np.float32), language=language)


def toy_model(
    arch: str = "bow",
    records: list[DefinitionRecord] | None = None,
    input_dim: int = 16,
    hidden_dim: int = 8,
    target_dim: int = 12,
    seed: int = 0,
    dtype=np.float64,
    input_mode: str = "learned",
    input_store: EmbeddingStore | None = None,
    output_nonlinearity: str = "tanh",
) -> tuple[Model, list[DefinitionRecord]]:
    if records is None:
        records = toy_records(seed=seed)
    vocab = build_vocabulary(records)
    config = EncoderConfig(
        arch=arch,
        input_mode=input_mode,
        input_dim=input_dim,
        hidden_dim=hidden_dim,
        target_dim=target_dim,
        output_nonlinearity=output_nonlinearity,
        seed=seed,
    )
    params = init_parameters(config, vocab, input_store=input_store, dtype=dtype)
    return Model(config=config, params=params, vocab=vocab, input_store=input_store), records


def memorization_fixture(seed: int = 42, n_heads: int = 200, n_def_tokens: int = 120, dim: int = 64):
    """200 distinct 5-token definitions with random target vectors.

    A BOW encoder has enough capacity to memorize these exactly, making
    the fixture a scaled stand-in for seen-definition recall.
    """
    rng = np.random.default_rng(seed)
    heads = [f"word{i:03d}" for i in range(n_heads)]
    def_pool = [f"def{i:03d}" for i in range(n_def_tokens)]
    records = []
    for head in heads:
        picks = rng.choice(n_def_tokens, size=5, replace=False)
        records.append(DefinitionRecord(head, tuple(def_pool[j] for j in picks), "dictionary"))
    all_tokens = heads + def_pool
    matrix = rng.normal(size=(len(all_tokens), dim)).astype(np.float32)
    store = EmbeddingStore(all_tokens, matrix, language="en")
    return records, store


def degenerate_mult_fixture(seed: int = 0, n_items: int = 100, dim: int = 32, n_desc: int = 4):
    """Mixed-sign store where addition composes well but multiplication
    scrambles signs: each description token is half signal, full noise."""
    rng = np.random.default_rng(seed)
    heads = [f"head{i:03d}" for i in range(n_items)]
    head_vecs = rng.uniform(-1.0, 1.0, size=(n_items, dim))
    tokens, rows, records = [], [], []
    suffixes = "abcdefgh"[:n_desc]
    for i, head in enumerate(heads):
        tokens.append(head)
        rows.append(head_vecs[i])
        desc = []
        for suffix in suffixes:
            tok = f"d{i:03d}{suffix}"
            tokens.append(tok)
            rows.append(0.5 * head_vecs[i] + rng.uniform(-1.0, 1.0, size=dim))
            desc.append(tok)
        records.append(DefinitionRecord(head, tuple(desc), "eval"))
    store = EmbeddingStore(tokens, np.array(rows, dtype=np.float32), language="en")
    return records, store
