"""Fixed word-embedding tables and exact cosine nearest-neighbor search.

File format: a text header ``count dim`` (optionally ``count dim lang``),
then one ``token x1 ... x_dim`` row per word.  Vectors are stored
unnormalized in float32; norms are precomputed so a query is one fused
scan.  Search is exhaustive and therefore exact; ties are broken
lexicographically by token so results are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DefembedError, FormatError


@dataclass(frozen=True)
class Candidate:
    token: str
    score: float


@dataclass
class Query:
    """Metadata describing one retrieval request."""

    text: str | None = None
    mode: str = "revdict"
    k: int = 10
    answer_length: int | None = None
    target_language: str | None = None


@dataclass
class RankedCandidates:
    """Candidates ordered by non-increasing cosine score.

    Ties are already broken lexicographically; ``skipped_tokens`` lists
    query tokens the encoder or store did not know.
    """

    items: list[Candidate]
    query: Query | None = None
    skipped_tokens: list[str] = field(default_factory=list)

    def tokens(self) -> list[str]:
        return [c.token for c in self.items]


class EmbeddingStore:
    """Immutable token -> vector table with cached norms and lex ranks."""

    def __init__(self, tokens: Sequence[str], matrix: np.ndarray, language: str = "en"):
        matrix = np.asarray(matrix, dtype=np.float32)
        if matrix.ndim != 2 or matrix.shape[0] != len(tokens):
            raise ValueError("matrix must be (len(tokens), dim)")
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate tokens")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("non-finite embedding values")
        self.tokens = list(tokens)
        self.matrix = matrix
        self.language = language
        self.dim = matrix.shape[1]
        self._index = {tok: i for i, tok in enumerate(self.tokens)}
        self._norms = np.linalg.norm(matrix.astype(np.float64), axis=1)
        if np.any(self._norms == 0.0):
            bad = self.tokens[int(np.argmin(self._norms))]
            raise ValueError(f"zero-norm vector for token {bad!r}")
        # Position of each row in lexicographic token order, used to break
        # score ties deterministically.
        order = sorted(range(len(self.tokens)), key=lambda i: self.tokens[i])
        self._lex_rank = np.empty(len(self.tokens), dtype=np.int64)
        for rank, i in enumerate(order):
            self._lex_rank[i] = rank

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def vector(self, token: str) -> np.ndarray:
        try:
            return self.matrix[self._index[token]]
        except KeyError:
            raise KeyError(f"token {token!r} not in embedding store") from None

    def _scores(self, query: np.ndarray) -> np.ndarray:
        """Cosine similarity of the query against every stored vector."""
        q = np.asarray(query, dtype=np.float64).reshape(-1)
        if q.shape[0] != self.dim:
            raise ValueError(f"query dim {q.shape[0]} != store dim {self.dim}")
        qnorm = np.linalg.norm(q)
        if qnorm == 0.0 or not np.isfinite(qnorm):
            raise ValueError("query vector has zero or non-finite norm")
        scores = (self.matrix @ q) / (self._norms * qnorm)
        return np.clip(scores, -1.0, 1.0)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity in [-1, 1]; raises on zero-norm input."""
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine undefined for zero-norm vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def load_embeddings(path: str | Path) -> EmbeddingStore:
    """Parse an embedding text file; any format violation is fatal."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) not in (2, 3):
            raise FormatError("header must be 'count dim' or 'count dim lang'", str(path), 1)
        try:
            count, dim = int(header[0]), int(header[1])
        except ValueError:
            raise FormatError("header count/dim must be integers", str(path), 1) from None
        if count < 1 or dim < 1:
            raise FormatError("header count and dim must be positive", str(path), 1)
        language = header[2] if len(header) == 3 else "en"

        tokens: list[str] = []
        seen: set[str] = set()
        matrix = np.empty((count, dim), dtype=np.float32)
        row = 0
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            if row >= count:
                raise FormatError(f"more than {count} rows", str(path), lineno)
            if len(parts) != dim + 1:
                raise FormatError(
                    f"expected token + {dim} values, got {len(parts)} fields", str(path), lineno
                )
            token = parts[0]
            if token in seen:
                raise FormatError(f"duplicate token {token!r}", str(path), lineno)
            try:
                vec = np.array(parts[1:], dtype=np.float64)
            except ValueError:
                raise FormatError("non-numeric coordinate", str(path), lineno) from None
            if not np.all(np.isfinite(vec)):
                raise FormatError(f"non-finite value for token {token!r}", str(path), lineno)
            if np.linalg.norm(vec) == 0.0:
                raise FormatError(f"zero-norm vector for token {token!r}", str(path), lineno)
            seen.add(token)
            tokens.append(token)
            matrix[row] = vec.astype(np.float32)
            row += 1
        if row != count:
            raise FormatError(f"header promised {count} rows, found {row}", str(path))
    return EmbeddingStore(tokens, matrix, language=language)


def save_embeddings(store: EmbeddingStore, path: str | Path) -> None:
    """Write the store back in the text format (used for fixtures and demos)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(store)} {store.dim} {store.language}\n")
        for tok, vec in zip(store.tokens, store.matrix):
            coords = " ".join(repr(float(x)) for x in vec)
            fh.write(f"{tok} {coords}\n")


def nearest_neighbors(
    store: EmbeddingStore,
    query: np.ndarray,
    k: int,
    token_filter: Optional[Callable[[str], bool]] = None,
) -> RankedCandidates:
    """Top-k tokens by cosine similarity, exhaustively scanned.

    If fewer than k tokens pass the filter, all of them are returned.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = store._scores(query)
    if token_filter is None:
        idx = np.arange(len(store))
    else:
        idx = np.array([i for i, t in enumerate(store.tokens) if token_filter(t)], dtype=np.int64)
        if idx.size == 0:
            return RankedCandidates(items=[])
    # Primary key: descending score; tie-break: ascending lexicographic rank.
    order = np.lexsort((store._lex_rank[idx], -scores[idx]))
    top = idx[order[:k]]
    items = [Candidate(store.tokens[i], float(scores[i])) for i in top]
    return RankedCandidates(items=items)


def rank_of(
    store: EmbeddingStore,
    query: np.ndarray,
    target: str,
    token_filter: Optional[Callable[[str], bool]] = None,
) -> int:
    """1-based rank of the target token in the full cosine ranking.

    Equals 1 + the number of strictly closer tokens + the number of
    equal-score tokens that sort lexicographically earlier.
    """
    if target not in store:
        raise KeyError(f"target token {target!r} not in embedding store")
    scores = store._scores(query)
    if token_filter is not None:
        mask = np.array([token_filter(t) for t in store.tokens], dtype=bool)
        if not mask[store._index[target]]:
            raise DefembedError(f"target token {target!r} rejected by candidate filter")
    else:
        mask = np.ones(len(store), dtype=bool)
    ti = store._index[target]
    ts = scores[ti]
    closer = np.count_nonzero(mask & (scores > ts))
    tied_earlier = np.count_nonzero(
        mask & (scores == ts) & (store._lex_rank < store._lex_rank[ti])
    )
    return int(1 + closer + tied_earlier)
