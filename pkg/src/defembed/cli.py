"""Command-line interface: ingest, train, evaluate, query, serve, gradcheck.

`query` talks to a running service when --server is given, otherwise it
loads the checkpoint directly.  All other subcommands drive the library
in-process; `serve` hands the FastAPI app to uvicorn.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import corpus
from .checkpoint import file_sha256, load_checkpoint, save_checkpoint
from .config import load_service_config
from .embeddings import load_embeddings
from .encoders import EncoderConfig, Model, init_parameters
from .errors import DefembedError
from .evaluation import evaluate
from .query import (
    bilingual_query,
    compose_baseline,
    crossword_answer,
    length_filter,
    reverse_dictionary,
)
from .training import LossConfig, TrainConfig, gradient_check_suite, train

log = logging.getLogger(__name__)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="defembed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="normalize corpus TSVs, optionally split seen/unseen")
    p.add_argument("--dictionary", action="append", default=[], metavar="TSV")
    p.add_argument("--encyclopedia", action="append", default=[], metavar="TSV")
    p.add_argument("--max-tokens", type=int, default=corpus.MAX_DEFINITION_TOKENS)
    p.add_argument("--heldout-words", metavar="FILE", help="one headword per line to hold out")
    p.add_argument("--heldout-count", type=int, default=0, help="hold out N random headwords")
    p.add_argument("--heldout-seed", type=int, default=0)
    p.add_argument("--train-out", required=True, metavar="TSV")
    p.add_argument("--unseen-out", metavar="TSV")

    p = sub.add_parser("train", help="train an encoder on (word, definition) pairs")
    p.add_argument("--train", required=True, metavar="TSV")
    p.add_argument("--target-embeddings", required=True, metavar="FILE")
    p.add_argument("--input-embeddings", metavar="FILE")
    p.add_argument("--checkpoint-out", required=True, metavar="FILE")
    p.add_argument("--arch", choices=["bow", "lstm"], default="bow")
    p.add_argument("--input-mode", choices=["learned", "pretrained_fixed"], default="learned")
    p.add_argument("--input-dim", type=int, default=256)
    p.add_argument("--hidden-dim", type=int, default=512)
    p.add_argument("--output-nonlinearity", choices=["tanh", "identity"], default="tanh")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--loss", choices=["cosine", "rank"], default="cosine")
    p.add_argument("--margin", type=float, default=0.1)
    p.add_argument("--negative-sampling-seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--max-epochs", type=int, default=5)
    p.add_argument("--shuffle-seed", type=int, default=0)
    p.add_argument("--eval-every", type=int, default=0)
    p.add_argument("--eval", metavar="TSV", help="eval set for --eval-every reports")
    p.add_argument("--log-out", metavar="JSONL")

    p = sub.add_parser("evaluate", help="rank-based metrics on a labeled eval set")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--checkpoint", metavar="FILE")
    group.add_argument("--baseline", choices=["add", "mult"])
    p.add_argument("--target-embeddings", required=True, metavar="FILE")
    p.add_argument("--input-embeddings", metavar="FILE")
    p.add_argument("--eval", required=True, metavar="TSV")
    p.add_argument("--mode", choices=["revdict", "crossword"], default="revdict")
    p.add_argument("--report-out", metavar="JSONL")

    p = sub.add_parser("query", help="run one query, print TSV of rank, token, score")
    p.add_argument("--mode", choices=["revdict", "crossword", "bilingual"], default="revdict")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--length", type=int, help="crossword answer length")
    p.add_argument("--target-lang", help="bilingual target language tag")
    p.add_argument("--server", metavar="URL", help="query a running service instead")
    p.add_argument("--checkpoint", metavar="FILE")
    p.add_argument("--target-embeddings", metavar="FILE")
    p.add_argument("--input-embeddings", metavar="FILE")
    p.add_argument("--bilingual-embeddings", metavar="FILE")
    p.add_argument("text")

    p = sub.add_parser("serve", help="start the HTTP query service")
    p.add_argument("--config", metavar="FILE")
    p.add_argument("--checkpoint", metavar="FILE")
    p.add_argument("--target-embeddings", metavar="FILE")
    p.add_argument("--input-embeddings", metavar="FILE")
    p.add_argument("--bilingual-embeddings", metavar="FILE")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--default-k", type=int)
    p.add_argument("--max-query-tokens", type=int)

    p = sub.add_parser("gradcheck", help="verify analytic gradients against finite differences")
    p.add_argument("--epsilon", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=float, default=1e-4)

    return parser


def _write_records_tsv(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(f"{rec.headword}\t{' '.join(rec.tokens)}\n")


def _cmd_ingest(args) -> int:
    records = []
    for path in args.dictionary:
        records.extend(corpus.ingest_dictionary(path, max_tokens=args.max_tokens))
    for path in args.encyclopedia:
        records.extend(corpus.ingest_encyclopedia(path, max_tokens=args.max_tokens))
    if not records:
        raise DefembedError("no records ingested; pass --dictionary and/or --encyclopedia")
    if args.heldout_words:
        words = {w.strip().lower() for w in Path(args.heldout_words).read_text().split() if w.strip()}
        spec = corpus.SplitSpec(heldout_words=words, seed=args.heldout_seed)
    elif args.heldout_count > 0:
        spec = corpus.sample_heldout_words(records, args.heldout_count, args.heldout_seed)
    else:
        spec = corpus.SplitSpec(heldout_words=set(), seed=args.heldout_seed)
    train_recs, unseen_recs = corpus.split_seen_unseen(records, spec)
    _write_records_tsv(train_recs, args.train_out)
    print(f"ingested {len(records)} records: {len(train_recs)} train, {len(unseen_recs)} unseen")
    if args.unseen_out:
        _write_records_tsv(unseen_recs, args.unseen_out)
    elif unseen_recs:
        log.warning("%d unseen records discarded (no --unseen-out)", len(unseen_recs))
    return 0


def _cmd_train(args) -> int:
    records = corpus.ingest_dictionary(args.train)
    target_store = load_embeddings(args.target_embeddings)
    input_store = load_embeddings(args.input_embeddings) if args.input_embeddings else None
    if args.input_mode == "pretrained_fixed":
        if input_store is None:
            raise DefembedError("pretrained_fixed requires --input-embeddings")
        input_dim = input_store.dim
    else:
        input_dim = args.input_dim
    vocab = corpus.build_vocabulary(records, min_count=args.min_count)
    config = EncoderConfig(
        arch=args.arch,
        input_mode=args.input_mode,
        input_dim=input_dim,
        hidden_dim=args.hidden_dim,
        target_dim=target_store.dim,
        output_nonlinearity=args.output_nonlinearity,
        seed=args.seed,
    )
    model = Model(
        config=config,
        params=init_parameters(config, vocab, input_store=input_store),
        vocab=vocab,
        input_store=input_store,
    )
    train_cfg = TrainConfig(
        batch_size=args.batch_size,
        max_epochs=args.max_epochs,
        shuffle_seed=args.shuffle_seed,
        eval_every=args.eval_every,
    )
    loss_cfg = LossConfig(
        kind=args.loss, margin=args.margin, negative_sampling_seed=args.negative_sampling_seed
    )
    eval_fn = None
    if args.eval and args.eval_every > 0:
        eval_items = corpus.load_eval_records(args.eval)
        eval_fn = lambda m: evaluate(m.encode, eval_items, target_store).to_record()
    records_log = train(model, records, train_cfg, loss_cfg, target_store, eval_fn=eval_fn)
    for rec in records_log:
        print(f"epoch {rec['epoch']:>4}  mean_loss {rec['mean_loss']:.6f}  "
              f"skipped {rec['skipped_pairs']}  {rec['wall_time']:.2f}s")
    if args.log_out:
        with open(args.log_out, "w", encoding="utf-8") as fh:
            for rec in records_log:
                fh.write(json.dumps(rec) + "\n")
    save_checkpoint(model, args.checkpoint_out)
    print(f"checkpoint {args.checkpoint_out} sha256 {file_sha256(args.checkpoint_out)}")
    return 0


def _cmd_evaluate(args) -> int:
    target_store = load_embeddings(args.target_embeddings)
    items = corpus.load_eval_records(args.eval)
    if args.baseline:
        input_store = (
            load_embeddings(args.input_embeddings) if args.input_embeddings else target_store
        )

        def encode(tokens):
            vec, _ = compose_baseline(input_store, " ".join(tokens), args.baseline)
            return vec
    else:
        input_store = load_embeddings(args.input_embeddings) if args.input_embeddings else None
        model = load_checkpoint(args.checkpoint, input_store=input_store)
        if model.config.target_dim != target_store.dim:
            raise DefembedError(
                f"model target dim {model.config.target_dim} != store dim {target_store.dim}"
            )
        encode = model.encode
    candidate_filter = None
    if args.mode == "crossword":
        candidate_filter = lambda rec: length_filter(len(rec.headword))
    report = evaluate(encode, items, target_store, candidate_filter=candidate_filter)
    print(report.to_table())
    if args.report_out:
        with open(args.report_out, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(report.to_record()) + "\n")
    return 0


def _print_candidates(result) -> None:
    for i, cand in enumerate(result.items, start=1):
        print(f"{i}\t{cand.token}\t{cand.score:.6f}")
    if result.skipped_tokens:
        print(f"# unknown words ignored: {' '.join(result.skipped_tokens)}", file=sys.stderr)


def _cmd_query(args) -> int:
    if args.mode == "crossword" and args.length is None:
        raise DefembedError("crossword mode requires --length")
    if args.server:
        import httpx

        payload = {"text": args.text, "mode": args.mode, "k": args.k}
        if args.length is not None:
            payload["answer_length"] = args.length
        if args.target_lang:
            payload["target_lang"] = args.target_lang
        response = httpx.post(args.server.rstrip("/") + "/api/query", json=payload, timeout=30.0)
        if response.status_code != 200:
            raise DefembedError(f"server error {response.status_code}: {response.text}")
        body = response.json()
        for cand in body["candidates"]:
            print(f"{cand['rank']}\t{cand['word']}\t{cand['score']:.6f}")
        if body["skipped_tokens"]:
            print(f"# unknown words ignored: {' '.join(body['skipped_tokens'])}", file=sys.stderr)
        return 0
    if not args.checkpoint or not args.target_embeddings:
        raise DefembedError("query needs --server or both --checkpoint and --target-embeddings")
    target_store = load_embeddings(args.target_embeddings)
    input_store = load_embeddings(args.input_embeddings) if args.input_embeddings else None
    model = load_checkpoint(args.checkpoint, input_store=input_store)
    if args.mode == "revdict":
        result = reverse_dictionary(model, target_store, args.text, args.k)
    elif args.mode == "crossword":
        result = crossword_answer(model, target_store, args.text, args.length, args.k)
    else:
        if not args.bilingual_embeddings:
            raise DefembedError("bilingual mode requires --bilingual-embeddings")
        bi_store = load_embeddings(args.bilingual_embeddings)
        if args.target_lang and args.target_lang != bi_store.language:
            raise DefembedError(
                f"--target-lang {args.target_lang!r} but store is {bi_store.language!r}"
            )
        result = bilingual_query(
            model, args.text, bi_store, args.k, source_language=target_store.language
        )
    _print_candidates(result)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    overrides = {
        "checkpoint": args.checkpoint,
        "target_embeddings": args.target_embeddings,
        "input_embeddings": args.input_embeddings,
        "bilingual_embeddings": args.bilingual_embeddings,
        "host": args.host,
        "port": args.port,
        "default_k": args.default_k,
        "max_query_tokens": args.max_query_tokens,
    }
    config = load_service_config(args.config, overrides=overrides)
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return 0


def _cmd_gradcheck(args) -> int:
    results = gradient_check_suite(epsilon=args.epsilon, seed=args.seed)
    worst = 0.0
    for (arch, kind), err in sorted(results.items()):
        status = "ok" if err < args.threshold else "FAIL"
        print(f"{arch:<5} {kind:<7} max relative error {err:.3e}  {status}")
        worst = max(worst, err)
    print(f"worst {worst:.3e} (threshold {args.threshold:g})")
    return 0 if worst < args.threshold else 1


_COMMANDS = {
    "ingest": _cmd_ingest,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "query": _cmd_query,
    "serve": _cmd_serve,
    "gradcheck": _cmd_gradcheck,
}


def run_cli(argv: list[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except DefembedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
