"""Corpus ingestion: (word, definition) pairs, tokenization, vocabularies, splits.

Dictionary and encyclopedia files are UTF-8 TSV, one ``headword<TAB>text``
pair per line; ``#``-prefixed comment lines and blank lines are ignored.
Encyclopedia rows are first-paragraph sentences treated as independent
pseudo-definitions of the article title.
"""

from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DefembedError, FormatError

log = logging.getLogger(__name__)

SOURCES = ("dictionary", "encyclopedia", "eval")

# Definitions longer than this are truncated; bounds the cost of
# backpropagation through time.
MAX_DEFINITION_TOKENS = 64

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on any character that is not a letter or digit.

    Empty fragments are dropped and no stemming is applied, so surface
    forms like "atonal" and "atonality" stay distinct tokens.
    """
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class DefinitionRecord:
    """One (headword, tokenized definition) unit for training or evaluation."""

    headword: str
    tokens: tuple[str, ...]
    source: str

    def __post_init__(self):
        if not self.headword:
            raise ValueError("headword must be nonempty")
        if not self.tokens:
            raise ValueError("tokens must be nonempty")
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        for tok in (self.headword, *self.tokens):
            if tok != tok.lower() or any(c.isspace() for c in tok):
                raise ValueError(f"token {tok!r} must be lowercase and whitespace-free")


@dataclass
class Vocabulary:
    """Dense, deterministic token<->id maps with per-token counts.

    Ids are assigned in sorted token order, so identical inputs always
    produce identical maps.
    """

    token_to_id: dict[str, int]
    id_to_token: list[str]
    counts: dict[str, int]

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id


@dataclass
class SplitSpec:
    """Which headwords to hold out of training, plus the seed that chose them."""

    heldout_words: set[str]
    seed: int = 0


def _iter_tsv(path: str | Path):
    """Yield (line_number, headword_field, text_field) for data lines."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            if "\t" not in line:
                raise FormatError("expected 'headword<TAB>text'", path=str(path), line=lineno)
            head, text = line.split("\t", 1)
            yield lineno, head, text


def _ingest(path: str | Path, source: str, max_tokens: int) -> list[DefinitionRecord]:
    records = []
    for lineno, head_field, text in _iter_tsv(path):
        head_tokens = tokenize(head_field)
        if len(head_tokens) != 1:
            log.warning("%s:%d: skipping multi-token headword %r", path, lineno, head_field)
            continue
        tokens = tokenize(text)
        if not tokens:
            log.warning("%s:%d: skipping empty definition for %r", path, lineno, head_field)
            continue
        if len(tokens) > max_tokens:
            log.warning(
                "%s:%d: truncating definition of %r from %d to %d tokens",
                path, lineno, head_field, len(tokens), max_tokens,
            )
            tokens = tokens[:max_tokens]
        records.append(DefinitionRecord(head_tokens[0], tuple(tokens), source))
    return records


def ingest_dictionary(path: str | Path, max_tokens: int = MAX_DEFINITION_TOKENS) -> list[DefinitionRecord]:
    """Read dictionary TSV; a word with n definition lines yields n records."""
    return _ingest(path, "dictionary", max_tokens)


def ingest_encyclopedia(path: str | Path, max_tokens: int = MAX_DEFINITION_TOKENS) -> list[DefinitionRecord]:
    """Read encyclopedia TSV; each sentence is a pseudo-definition of the title."""
    return _ingest(path, "encyclopedia", max_tokens)


def load_eval_records(path: str | Path, max_tokens: int = MAX_DEFINITION_TOKENS) -> list[DefinitionRecord]:
    """Read a labeled evaluation set in the same TSV format."""
    return _ingest(path, "eval", max_tokens)


def build_vocabulary(records: list[DefinitionRecord], min_count: int = 1) -> Vocabulary:
    """Collect definition tokens and headwords with count >= min_count."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    if not records:
        raise DefembedError("cannot build a vocabulary from an empty corpus")
    counts: Counter[str] = Counter()
    for rec in records:
        counts[rec.headword] += 1
        counts.update(rec.tokens)
    kept = sorted(tok for tok, n in counts.items() if n >= min_count)
    if not kept:
        raise DefembedError(f"no token reaches min_count={min_count}")
    return Vocabulary(
        token_to_id={tok: i for i, tok in enumerate(kept)},
        id_to_token=kept,
        counts={tok: counts[tok] for tok in kept},
    )


def split_seen_unseen(
    records: list[DefinitionRecord], spec: SplitSpec
) -> tuple[list[DefinitionRecord], list[DefinitionRecord]]:
    """Partition records so no training headword is held out.

    Returns (train, unseen_eval); every record lands in exactly one side.
    """
    train = [r for r in records if r.headword not in spec.heldout_words]
    unseen = [r for r in records if r.headword in spec.heldout_words]
    seen_heads = {r.headword for r in unseen}
    for word in sorted(spec.heldout_words - seen_heads):
        log.warning("held-out word %r has no records", word)
    return train, unseen


def sample_heldout_words(records: list[DefinitionRecord], n: int, seed: int) -> SplitSpec:
    """Pick n distinct headwords uniformly at random for an unseen split."""
    heads = sorted({r.headword for r in records})
    if n > len(heads):
        raise ValueError(f"cannot hold out {n} of {len(heads)} headwords")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(heads), size=n, replace=False)
    return SplitSpec(heldout_words={heads[i] for i in chosen}, seed=seed)
