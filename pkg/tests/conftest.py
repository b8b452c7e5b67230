import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA_DIR = Path(__file__).parent.parent / "data"


@pytest.fixture(scope="session")
def service_env(tmp_path_factory):
    """A trained toy deployment: checkpoint, en/fr stores, config file."""
    from defembed.checkpoint import save_checkpoint
    from defembed.corpus import build_vocabulary, ingest_dictionary
    from defembed.demo_data import build_stores
    from defembed.embeddings import save_embeddings
    from defembed.encoders import EncoderConfig, Model, init_parameters
    from defembed.training import LossConfig, TrainConfig, train

    root = tmp_path_factory.mktemp("service_env")
    english, french = build_stores(DATA_DIR, dim=32)
    en_path = root / "embeddings_en.txt"
    fr_path = root / "embeddings_fr.txt"
    save_embeddings(english, en_path)
    save_embeddings(french, fr_path)

    records = ingest_dictionary(DATA_DIR / "dictionary.tsv")
    vocab = build_vocabulary(records)
    config = EncoderConfig(
        arch="bow", input_mode="learned", input_dim=24, hidden_dim=8,
        target_dim=english.dim, seed=7,
    )
    model = Model(config=config, params=init_parameters(config, vocab), vocab=vocab)
    train(
        model,
        records,
        TrainConfig(batch_size=16, max_epochs=40, shuffle_seed=7),
        LossConfig(kind="cosine"),
        english,
    )
    ckpt_path = root / "model.ckpt"
    save_checkpoint(model, ckpt_path)

    cfg_path = root / "service.cfg"
    cfg_path.write_text(
        f"checkpoint={ckpt_path}\n"
        f"target_embeddings={en_path}\n"
        f"bilingual_embeddings={fr_path}\n"
        "default_k=5\n"
        "max_query_tokens=32\n"
    )
    return {
        "root": root,
        "checkpoint": ckpt_path,
        "target_embeddings": en_path,
        "bilingual_embeddings": fr_path,
        "config": cfg_path,
        "model": model,
        "english": english,
        "french": french,
        "records": records,
    }
