"""Query modes over an encoder plus embedding stores.

Reverse dictionary: encode the description, return nearest target-space
words.  Crossword: same ranking restricted to purely alphabetic tokens of
the clue's answer length.  Unsupervised baselines compose raw word
vectors by addition or elementwise multiplication.  The bilingual mode
encodes with the monolingual-trained model and retrieves from the
other-language store only.
"""

from __future__ import annotations

import numpy as np

from .corpus import tokenize
from .embeddings import EmbeddingStore, Query, RankedCandidates, nearest_neighbors
from .encoders import Model
from .errors import DefembedError, NoKnownTokensError

MODES = ("revdict", "crossword", "bilingual")


def reverse_dictionary(model: Model, store: EmbeddingStore, text: str, k: int) -> RankedCandidates:
    """Encode the description and rank the whole target vocabulary."""
    if model.config.target_dim != store.dim:
        raise DefembedError(f"model target dim {model.config.target_dim} != store dim {store.dim}")
    vec, skipped = model.encode_text(text)
    result = nearest_neighbors(store, vec, k)
    result.query = Query(text=text, mode="revdict", k=k)
    result.skipped_tokens = skipped
    return result


def length_filter(answer_length: int):
    """Crossword candidates: purely alphabetic tokens of exactly this length."""
    return lambda token: len(token) == answer_length and token.isalpha()


def crossword_answer(
    model: Model, store: EmbeddingStore, clue: str, answer_length: int, k: int
) -> RankedCandidates:
    """Reverse-dictionary ranking restricted to length-matching words.

    An empty candidate list (no stored token of that length) is a valid
    result, not an error.
    """
    if answer_length < 1:
        raise ValueError("answer_length must be >= 1")
    if model.config.target_dim != store.dim:
        raise DefembedError(f"model target dim {model.config.target_dim} != store dim {store.dim}")
    vec, skipped = model.encode_text(clue)
    result = nearest_neighbors(store, vec, k, token_filter=length_filter(answer_length))
    result.query = Query(text=clue, mode="crossword", k=k, answer_length=answer_length)
    result.skipped_tokens = skipped
    return result


def compose_baseline(input_store: EmbeddingStore, text: str, how: str):
    """Compose known query-token vectors by "add" or "mult"; returns (vector, skipped)."""
    tokens = tokenize(text)
    known = [t for t in tokens if t in input_store]
    skipped = [t for t in tokens if t not in input_store]
    if not known:
        raise NoKnownTokensError("no known tokens in query")
    vecs = np.stack([input_store.vector(t).astype(np.float64) for t in known])
    if how == "add":
        return vecs.sum(axis=0), skipped
    prod = vecs[0].copy()
    for v in vecs[1:]:
        prod *= v
    if not np.any(prod):
        raise DefembedError("elementwise product of query vectors is all zero")
    return prod, skipped


def w2v_add_baseline(
    input_store: EmbeddingStore, target_store: EmbeddingStore, text: str, k: int
) -> RankedCandidates:
    """Pointwise addition of word vectors (equivalent to the mean under cosine)."""
    vec, skipped = compose_baseline(input_store, text, "add")
    result = nearest_neighbors(target_store, vec, k)
    result.query = Query(text=text, mode="revdict", k=k)
    result.skipped_tokens = skipped
    return result


def w2v_mult_baseline(
    input_store: EmbeddingStore, target_store: EmbeddingStore, text: str, k: int
) -> RankedCandidates:
    """Elementwise multiplication of word vectors."""
    vec, skipped = compose_baseline(input_store, text, "mult")
    result = nearest_neighbors(target_store, vec, k)
    result.query = Query(text=text, mode="revdict", k=k)
    result.skipped_tokens = skipped
    return result


def bilingual_query(
    model: Model,
    text: str,
    target_language_store: EmbeddingStore,
    k: int,
    source_language: str = "en",
) -> RankedCandidates:
    """Encode in the source language, retrieve from the other-language store."""
    if target_language_store.language == source_language:
        raise DefembedError(
            f"bilingual target store has source language {source_language!r}"
        )
    if model.config.target_dim != target_language_store.dim:
        raise DefembedError(
            f"model target dim {model.config.target_dim} != bilingual store dim "
            f"{target_language_store.dim}"
        )
    vec, skipped = model.encode_text(text)
    result = nearest_neighbors(target_language_store, vec, k)
    result.query = Query(
        text=text, mode="bilingual", k=k, target_language=target_language_store.language
    )
    result.skipped_tokens = skipped
    return result
