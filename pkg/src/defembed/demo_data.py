"""Generate toy embedding files for the shipped demo corpus.

Real deployments consume large pre-trained embedding files; this module
fabricates small deterministic ones so the README walkthrough runs
self-contained.  Each token's vector is seeded from a hash of the token,
so regenerating never reshuffles the space.  The French store is aligned
to the English one (translation pairs sit close together), which is
enough geometry for the bilingual demo.

Usage: python -m defembed.demo_data [--dim 64] [--out data]
"""

from __future__ import annotations

import argparse
import hashlib
from pathlib import Path

import numpy as np

from . import corpus
from .embeddings import EmbeddingStore, save_embeddings

FRENCH_OF = {
    "dog": "chien",
    "cat": "chat",
    "house": "maison",
    "water": "eau",
    "king": "roi",
    "queen": "reine",
    "mountain": "montagne",
    "river": "fleuve",
    "bird": "oiseau",
    "fish": "poisson",
    "bread": "pain",
    "cheese": "fromage",
    "honey": "miel",
    "rain": "pluie",
    "snow": "neige",
    "winter": "hiver",
    "summer": "ete",
    "joy": "joie",
    "anger": "colere",
    "wisdom": "sagesse",
    "doctor": "medecin",
    "teacher": "professeur",
    "sailor": "marin",
    "island": "ile",
    "valley": "vallee",
    "castle": "chateau",
}

DATA_FILES = (
    "dictionary.tsv",
    "encyclopedia.tsv",
    "eval_seen.tsv",
    "eval_concepts.tsv",
    "crossword_long.tsv",
    "crossword_short.tsv",
    "crossword_single.tsv",
)


def token_vector(token: str, dim: int, scale: float = 1.0) -> np.ndarray:
    """Deterministic pseudo-random vector derived from the token itself."""
    digest = hashlib.sha256(token.encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    return scale * rng.normal(size=dim)


def collect_tokens(data_dir: Path) -> set[str]:
    tokens: set[str] = set()
    for name in DATA_FILES:
        path = data_dir / name
        if not path.is_file():
            continue
        for rec in corpus.ingest_dictionary(path):
            tokens.add(rec.headword)
            tokens.update(rec.tokens)
    heldout = data_dir / "heldout_words.txt"
    if heldout.is_file():
        tokens.update(w.strip().lower() for w in heldout.read_text().split() if w.strip())
    return tokens


def build_stores(data_dir: Path, dim: int) -> tuple[EmbeddingStore, EmbeddingStore]:
    tokens = sorted(collect_tokens(data_dir))
    matrix = np.stack([token_vector(tok, dim) for tok in tokens])
    english = EmbeddingStore(tokens, matrix.astype(np.float32), language="en")
    fr_tokens, fr_rows = [], []
    for en_word, fr_word in sorted(FRENCH_OF.items()):
        base = token_vector(en_word, dim)
        fr_tokens.append(fr_word)
        fr_rows.append(base + 0.1 * token_vector(fr_word, dim))
    french = EmbeddingStore(fr_tokens, np.stack(fr_rows).astype(np.float32), language="fr")
    return english, french


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--data", default="data", help="directory with the demo TSVs")
    parser.add_argument("--out", default="data", help="where to write the embedding files")
    args = parser.parse_args(argv)
    data_dir = Path(args.data)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    english, french = build_stores(data_dir, args.dim)
    save_embeddings(english, out_dir / "embeddings_en.txt")
    save_embeddings(french, out_dir / "embeddings_fr.txt")
    print(f"wrote {len(english)} english and {len(french)} french vectors (dim {args.dim})")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
