"""Rank-based evaluation over labeled (word, description) sets.

For each item the headword's rank is computed under the encoding of its
description; items whose headword the store does not cover (or whose
description has no known tokens) are skipped and counted.  Ranks are
integers, so median, accuracy@k and population variance are computed
with exact integer arithmetic and rounded once at the end: they agree
bit for bit with any correctly rounded reference.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .corpus import DefinitionRecord
from .embeddings import EmbeddingStore, rank_of
from .errors import DefembedError, NoKnownTokensError

log = logging.getLogger(__name__)


def median_rank(ranks: Sequence[int]) -> float:
    """Middle value; mean of the two central values for even counts."""
    if not ranks:
        raise ValueError("median of empty rank list")
    s = sorted(ranks)
    n = len(s)
    if n % 2:
        return float(s[n // 2])
    return (s[n // 2 - 1] + s[n // 2]) / 2


def accuracy_at_k(ranks: Sequence[int], k: int) -> float:
    """Fraction of ranks <= k."""
    if not ranks:
        raise ValueError("accuracy over empty rank list")
    if k < 1:
        raise ValueError("k must be >= 1")
    return sum(1 for r in ranks if r <= k) / len(ranks)


def rank_variance(ranks: Sequence[int]) -> float:
    """Population variance (divide by n), exact for integer ranks.

    var = (n * sum(r^2) - (sum r)^2) / n^2 evaluated in exact integer
    arithmetic with a single correctly rounded float division.
    """
    if not ranks:
        raise ValueError("variance of empty rank list")
    n = len(ranks)
    s1 = sum(int(r) for r in ranks)
    s2 = sum(int(r) * int(r) for r in ranks)
    return (n * s2 - s1 * s1) / (n * n)


@dataclass
class EvalReport:
    n_items: int
    n_skipped: int
    median_rank: float
    accuracy_at_10: float
    accuracy_at_100: float
    rank_variance: float
    ranks: list[int]

    def to_record(self) -> dict:
        return {
            "n_items": self.n_items,
            "n_skipped": self.n_skipped,
            "median_rank": self.median_rank,
            "accuracy_at_10": self.accuracy_at_10,
            "accuracy_at_100": self.accuracy_at_100,
            "rank_variance": self.rank_variance,
        }

    def to_table(self) -> str:
        rows = [
            ("items scored", f"{self.n_items}"),
            ("items skipped", f"{self.n_skipped}"),
            ("median rank", f"{self.median_rank:g}"),
            ("accuracy@10", f"{self.accuracy_at_10:.4f}"),
            ("accuracy@100", f"{self.accuracy_at_100:.4f}"),
            ("rank variance", f"{self.rank_variance:.2f}"),
        ]
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def evaluate(
    encode: Callable[[Sequence[str]], np.ndarray],
    items: Sequence[DefinitionRecord],
    store: EmbeddingStore,
    candidate_filter: Optional[Callable[[DefinitionRecord], Callable[[str], bool]]] = None,
) -> EvalReport:
    """Score each item by the rank of its headword; assemble rank metrics.

    `encode` maps a token sequence to a target-space vector.  For
    length-constrained modes, `candidate_filter` builds the per-item
    token filter (e.g. crossword answer length).
    """
    if not items:
        raise ValueError("cannot evaluate an empty item list")
    ranks: list[int] = []
    skipped = 0
    for rec in items:
        if rec.headword not in store:
            log.warning("skipping eval item: headword %r not in store", rec.headword)
            skipped += 1
            continue
        try:
            vec = encode(rec.tokens)
        except NoKnownTokensError:
            log.warning("skipping eval item for %r: no known tokens", rec.headword)
            skipped += 1
            continue
        token_filter = candidate_filter(rec) if candidate_filter is not None else None
        ranks.append(rank_of(store, vec, rec.headword, token_filter=token_filter))
    if not ranks:
        raise DefembedError(f"all {len(items)} evaluation items were skipped")
    return EvalReport(
        n_items=len(ranks),
        n_skipped=skipped,
        median_rank=median_rank(ranks),
        accuracy_at_10=accuracy_at_k(ranks, 10),
        accuracy_at_100=accuracy_at_k(ranks, 100),
        rank_variance=rank_variance(ranks),
        ranks=ranks,
    )
