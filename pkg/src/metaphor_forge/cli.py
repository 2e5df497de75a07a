"""Command-line entry point orchestrating every pipeline stage.

Subcommands: lexrep, build-corpus, train, generate, evaluate, score,
serve.  Values resolve with precedence flags > configuration file >
defaults; the effective configuration is printed to stderr before a stage
runs so runs can be reproduced from their logs.  All randomness flows
from --seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .embedding_store import (
    EmbeddingFormatError,
    EmbeddingTable,
    OutOfVocabularyError,
    load_binary_embeddings,
    load_text_embeddings,
)
from .eval_harness import (
    CandidateTooShortError,
    Comparison,
    ConstantInputError,
    Dimension,
    MetricConfig,
    RatingRecord,
    filter_workers,
    mean_scores,
    mpg_score,
    ngram_overlap,
    permutation_pvalue,
    read_ratings_delimited,
    read_ratings_log,
    spearman,
    write_summary_delimited,
)
from .lexrep import LexRepConfig, ParticlePolicy, run_batch
from .mask_corpus import (
    CorpusFormatError,
    MaskingConfig,
    TestSetContaminationError,
    build_dataset,
    encode,
    load_pairs,
    load_vocab,
    read_corpus,
    save_pairs,
    save_vocab,
)
from .transformer import (
    CheckpointError,
    ConfigError,
    NonFiniteLossError,
    SequenceError,
    TransformerConfig,
    generate_metaphor,
    init_optimizer,
    init_params,
    load_checkpoint,
    save_checkpoint,
    train_step,
)
from .text_core import EmptyInputError, tokenize
from .wordnet_store import (
    DanglingReferenceError,
    WordNetFormatError,
    load_wordnet,
)

_FAILURE_CLASSES = (
    FileNotFoundError,
    IsADirectoryError,
    PermissionError,
    EmptyInputError,
    WordNetFormatError,
    DanglingReferenceError,
    EmbeddingFormatError,
    OutOfVocabularyError,
    CorpusFormatError,
    TestSetContaminationError,
    ConfigError,
    SequenceError,
    NonFiniteLossError,
    CheckpointError,
    ConstantInputError,
    CandidateTooShortError,
    json.JSONDecodeError,
    ValueError,
)


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as handle:
        config = json.load(handle)
    if not isinstance(config, dict):
        raise ValueError("configuration file must hold a JSON object")
    return config


def _resolve(args: argparse.Namespace, config: dict, key: str, default):
    """Flag value if given, else configuration file value, else default."""
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in config:
        return config[key]
    return default


def _print_effective(stage: str, settings: dict) -> None:
    rendered = json.dumps(settings, sort_keys=True, default=str)
    print(f"effective-config {stage}: {rendered}", file=sys.stderr)


def _open_embeddings(path: str, fmt: str, vocab_filter=None) -> EmbeddingTable:
    loader = load_binary_embeddings if fmt == "binary" else load_text_embeddings
    with open(path, "rb") as source:
        return loader(source, vocab_filter)


def _load_graph(index_path: str, data_path: str):
    with open(index_path, "rb") as index, open(data_path, "rb") as data:
        return load_wordnet(index, data)


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------


def _cmd_lexrep(args: argparse.Namespace) -> int:
    config = _load_config_file(args.config)
    depth = int(_resolve(args, config, "depth", 1))
    fmt = _resolve(args, config, "embeddings_format", "text")
    policy = ParticlePolicy(_resolve(args, config, "particle_policy", "verb_only"))
    lex_config = LexRepConfig(
        depth=depth,
        include_multiword=bool(_resolve(args, config, "include_multiword", False)),
        inflect=not bool(_resolve(args, config, "no_inflect", False)),
        replace_particle=policy,
        worst_fit=bool(_resolve(args, config, "worst_fit", False)),
    )
    _print_effective(
        "lexrep",
        {
            "wordnet_index": args.wordnet_index,
            "wordnet_data": args.wordnet_data,
            "embeddings": args.embeddings,
            "embeddings_format": fmt,
            "depth": depth,
            "include_multiword": lex_config.include_multiword,
            "inflect": lex_config.inflect,
            "particle_policy": policy.value,
            "worst_fit": lex_config.worst_fit,
        },
    )
    graph = _load_graph(args.wordnet_index, args.wordnet_data)
    table = _open_embeddings(args.embeddings, fmt)
    with open(args.input, "r", encoding="utf-8") as lines:
        if args.output is None:
            ok, failed = run_batch(lines, graph, table, lex_config, sys.stdout)
        else:
            with open(args.output, "w", encoding="utf-8") as sink:
                ok, failed = run_batch(lines, graph, table, lex_config, sink)
    print(f"paraphrased={ok} failed={failed}", file=sys.stderr)
    return 0


def _cmd_build_corpus(args: argparse.Namespace) -> int:
    config = _load_config_file(args.config)
    window = int(_resolve(args, config, "window", 7))
    vocab_cap = int(_resolve(args, config, "vocab_cap", 30_000))
    _print_effective(
        "build-corpus",
        {"input": args.input, "window": window, "vocab_cap": vocab_cap,
         "output_dir": args.output_dir, "exclude_hashes": args.exclude_hashes},
    )
    with open(args.input, "rb") as source:
        instances = read_corpus(source)
    excluded: set[str] = set()
    if args.exclude_hashes is not None:
        with open(args.exclude_hashes, "r", encoding="utf-8") as handle:
            excluded = {line.strip() for line in handle if line.strip()}
    pairs, vocab, counts = build_dataset(
        instances, MaskingConfig(window=window, vocab_cap=vocab_cap), excluded_hashes=excluded
    )
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "pairs.tsv", "w", encoding="utf-8") as sink:
        save_pairs(pairs, vocab, sink)
    with open(out_dir / "vocab.txt", "w", encoding="utf-8") as sink:
        save_vocab(vocab, sink)
    print(counts)
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    config = _load_config_file(args.config)
    with open(args.vocab, "r", encoding="utf-8") as handle:
        vocab = load_vocab(handle)
    with open(args.pairs, "r", encoding="utf-8") as handle:
        pairs = load_pairs(handle)
    if not pairs:
        raise ValueError(f"no training pairs in {args.pairs}")
    longest = max(max(len(s), len(t)) for s, t in pairs)
    seed = int(_resolve(args, config, "seed", 0))
    model_config = TransformerConfig(
        vocab_size=len(vocab),
        encoder_layers=int(config.get("encoder_layers", 2)),
        decoder_layers=int(config.get("decoder_layers", 2)),
        heads=int(config.get("heads", 4)),
        d_model=int(config.get("d_model", 64)),
        d_ff=int(config.get("d_ff", 256)),
        max_len=int(config.get("max_len", max(64, longest + 1))),
        dropout_rate=float(config.get("dropout_rate", 0.0)),
        seed=seed,
    )
    steps = int(_resolve(args, config, "steps", 500))
    batch_size = int(_resolve(args, config, "batch_size", 32))
    base_rate = float(_resolve(args, config, "base_rate", 0.5))
    warmup_steps = int(_resolve(args, config, "warmup_steps", 4000))
    schedule = _resolve(args, config, "schedule", "warmup")
    _print_effective(
        "train",
        {
            "pairs": args.pairs, "vocab": args.vocab, "checkpoint": args.checkpoint,
            "steps": steps, "batch_size": batch_size, "base_rate": base_rate,
            "warmup_steps": warmup_steps, "schedule": schedule, "seed": seed,
            "model": {
                "vocab_size": model_config.vocab_size,
                "encoder_layers": model_config.encoder_layers,
                "decoder_layers": model_config.decoder_layers,
                "heads": model_config.heads,
                "d_model": model_config.d_model,
                "d_ff": model_config.d_ff,
                "max_len": model_config.max_len,
                "dropout_rate": model_config.dropout_rate,
            },
        },
    )
    params = init_params(model_config)
    state = init_optimizer(params, base_rate=base_rate, warmup_steps=warmup_steps, schedule=schedule)
    rng = np.random.default_rng(seed)
    log_sink = open(args.loss_log, "w", encoding="utf-8") if args.loss_log else None
    try:
        order = np.arange(len(pairs))
        position = len(pairs)  # forces a shuffle before the first batch
        last = float("nan")
        for step in range(1, steps + 1):
            if position + batch_size > len(order):
                rng.shuffle(order)
                position = 0
            batch = [pairs[i] for i in order[position : position + batch_size]]
            position += batch_size
            params, state, last = train_step(params, state, batch)
            if log_sink is not None:
                lr = state.learning_rate(model_config.d_model)
                log_sink.write(f"{step}\t{last:.6f}\t{lr:.6g}\n")
            if step % max(1, steps // 10) == 0 or step == steps:
                print(f"step {step}/{steps} loss {last:.4f}", file=sys.stderr)
    finally:
        if log_sink is not None:
            log_sink.close()
    with open(args.checkpoint, "wb") as sink:
        save_checkpoint(params, sink)
    print(f"final-loss {last:.6f}")
    return 0


def _cmd_generate(args: argparse.Namespace) -> int:
    config = _load_config_file(args.config)
    window = int(_resolve(args, config, "window", 7))
    _print_effective(
        "generate",
        {"checkpoint": args.checkpoint, "vocab": args.vocab, "input": args.input,
         "window": window, "output": args.output},
    )
    with open(args.checkpoint, "rb") as source:
        params = load_checkpoint(source)
    with open(args.vocab, "r", encoding="utf-8") as handle:
        vocab = load_vocab(handle)
    with open(args.input, "rb") as source:
        instances = read_corpus(source)
    sink = open(args.output, "w", encoding="utf-8") if args.output else sys.stdout
    try:
        for instance in instances:
            sentence = generate_metaphor(
                params,
                vocab,
                tokenize(" ".join(instance.tokens), verb_index=instance.verb_index),
                window=window,
            )
            sink.write(" ".join(sentence.tokens) + "\n")
    finally:
        if sink is not sys.stdout:
            sink.close()
    return 0


def _read_ratings(path: str) -> list[RatingRecord]:
    if path.endswith((".jsonl", ".log")):
        with open(path, "r", encoding="utf-8") as handle:
            return read_ratings_log(handle)
    with open(path, "r", encoding="utf-8", newline="") as handle:
        return read_ratings_delimited(handle)


def _cmd_evaluate(args: argparse.Namespace) -> int:
    from .annotation_service import load_items, load_test_items

    config = _load_config_file(args.config)
    min_tasks = int(_resolve(args, config, "min_tasks", 2))
    seed = int(_resolve(args, config, "seed", 0))
    _print_effective(
        "evaluate",
        {"ratings": args.ratings, "items": args.items, "test_items": args.test_items,
         "min_tasks": min_tasks, "seed": seed, "summary_out": args.summary_out},
    )
    records = _read_ratings(args.ratings)
    items = load_items(args.items) if args.items else []
    expected = {}
    if args.test_items:
        expected = {t.item_id: float(t.expected_score) for t in load_test_items(args.test_items)}
    kept = filter_workers(records, expected, min_tasks=min_tasks)
    means = mean_scores(kept, items)
    if args.summary_out:
        with open(args.summary_out, "w", encoding="utf-8", newline="") as sink:
            write_summary_delimited(means, sink)
    else:
        write_summary_delimited(means, sys.stdout)

    # correlations between per-item mean scores, dimension against dimension
    per_item: dict[tuple[str, Dimension], list[int]] = {}
    known = {item.item_id for item in items}
    for record in kept:
        if record.item_id in known:
            per_item.setdefault((record.item_id, record.dimension), []).append(record.score)
    item_means = {key: sum(scores) / len(scores) for key, scores in per_item.items()}
    pairs_of_interest = [
        (Dimension.FLUENCY, Dimension.PARAPHRASE),
        (Dimension.METAPHORICITY, Dimension.PARAPHRASE),
        (Dimension.METAPHORICITY, Dimension.FLUENCY),
    ]
    for dim_a, dim_b in pairs_of_interest:
        xs, ys = [], []
        for item_id in sorted(known):
            a = item_means.get((item_id, dim_a))
            b = item_means.get((item_id, dim_b))
            if a is not None and b is not None:
                xs.append(a)
                ys.append(b)
        if len(xs) < 2:
            continue
        try:
            rho = spearman(xs, ys)
            p = permutation_pvalue(xs, ys, seed=seed)
        except ConstantInputError:
            continue
        print(f"spearman {dim_a.value}~{dim_b.value} rho={rho:.4f} p={p:.4f} n={len(xs)}")
    return 0


def _cmd_score(args: argparse.Namespace) -> int:
    config = _load_config_file(args.config)
    fmt = _resolve(args, config, "embeddings_format", "text")
    lam = float(_resolve(args, config, "lambda_penalty", 0.25))
    _print_effective(
        "score",
        {"input": args.input, "embeddings": args.embeddings,
         "embeddings_format": fmt, "lambda": lam},
    )
    table = _open_embeddings(args.embeddings, fmt)
    metric = MetricConfig(lambda_penalty=lam)
    sink = open(args.output, "w", encoding="utf-8") if args.output else sys.stdout
    try:
        sink.write("x\ty_prime\tunigram_overlap\tmpg_score\n")
        with open(args.input, "r", encoding="utf-8") as handle:
            for line_number, raw in enumerate(handle, start=1):
                line = raw.rstrip("\n")
                if not line.strip():
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise ValueError(
                        f"line {line_number}: expected 'x TAB y_prime', got {line!r}"
                    )
                x_tokens = tokenize(parts[0]).tokens
                y_tokens = tokenize(parts[1]).tokens
                overlap = ngram_overlap(y_tokens, x_tokens, 1)
                score = mpg_score(x_tokens, y_tokens, table, metric)
                sink.write(f"{parts[0]}\t{parts[1]}\t{overlap:.6f}\t{score:.6f}\n")
    finally:
        if sink is not sys.stdout:
            sink.close()
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    from .annotation_service import (
        AnnotationStore,
        create_app,
        load_guidelines,
        load_items,
        load_test_items,
    )

    config = _load_config_file(args.config)
    port = int(_resolve(args, config, "port", 8000))
    host = _resolve(args, config, "host", "127.0.0.1")
    test_interval = int(_resolve(args, config, "test_interval", 10))
    _print_effective(
        "serve",
        {"items": args.items, "test_items": args.test_items, "guidelines": args.guidelines,
         "log": args.log, "static_dir": args.static_dir, "host": host, "port": port,
         "test_interval": test_interval},
    )
    store = AnnotationStore(
        items=load_items(args.items),
        test_items=load_test_items(args.test_items) if args.test_items else [],
        guidelines=load_guidelines(args.guidelines) if args.guidelines else {},
        log_path=args.log,
        test_interval=test_interval,
    )
    app = create_app(store, static_dir=args.static_dir)
    import uvicorn

    uvicorn.run(app, host=host, port=port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metaphor-forge",
        description="Generate and evaluate metaphoric paraphrases of literal sentences.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="JSON configuration file (flags win)")
    common.add_argument("--seed", type=int, default=None, help="seed for all randomness (default 0)")

    wordnet = argparse.ArgumentParser(add_help=False)
    wordnet.add_argument("--wordnet-index", required=True, help="path to index.verb")
    wordnet.add_argument("--wordnet-data", required=True, help="path to data.verb")

    embeddings = argparse.ArgumentParser(add_help=False)
    embeddings.add_argument("--embeddings", required=True, help="path to word vectors")
    embeddings.add_argument(
        "--embeddings-format", choices=("text", "binary"), default=None,
        help="vector file layout (default text)",
    )

    p = sub.add_parser(
        "lexrep", parents=[common, wordnet, embeddings],
        help="replace verbs with their best-fitting troponyms",
        description="Batch lexical replacement over 'sentence TAB verb_index' lines.",
    )
    p.add_argument("--input", required=True, help="sentence file, one 'sentence TAB verb_index' per line")
    p.add_argument("--output", default=None, help="JSON-lines output (default stdout)")
    p.add_argument("--depth", type=int, default=None, help="troponym descent depth (default 1)")
    p.add_argument("--include-multiword", action="store_true", default=None,
                   help="keep multiword candidate lemmas")
    p.add_argument("--no-inflect", action="store_true", default=None,
                   help="emit bare lemmas instead of re-inflected forms")
    p.add_argument("--particle-policy", choices=[p.value for p in ParticlePolicy], default=None,
                   help="what to do with a marked particle (default verb_only)")
    p.add_argument("--worst-fit", action="store_true", default=None,
                   help="pick the lowest-ranked candidate (ablation)")
    p.set_defaults(func=_cmd_lexrep)

    p = sub.add_parser(
        "build-corpus", parents=[common],
        help="build masked parallel pairs, vocabulary, and counts",
        description="Turn a labeled corpus into trimmed, masked training pairs.",
    )
    p.add_argument("--input", required=True, help="corpus file: 'label TAB verb_index TAB tokens'")
    p.add_argument("--output-dir", required=True, help="directory for pairs.tsv and vocab.txt")
    p.add_argument("--window", type=int, default=None, help="context tokens per side (default 7)")
    p.add_argument("--vocab-cap", type=int, default=None, help="vocabulary size cap (default 30000)")
    p.add_argument("--exclude-hashes", default=None,
                   help="file of sentence hashes that must not enter training")
    p.set_defaults(func=_cmd_build_corpus)

    p = sub.add_parser(
        "train", parents=[common],
        help="train the mask-conditioned transformer",
        description="Train on encoded pairs; model dimensions come from the configuration file.",
    )
    p.add_argument("--pairs", required=True, help="encoded pairs from build-corpus")
    p.add_argument("--vocab", required=True, help="vocabulary from build-corpus")
    p.add_argument("--checkpoint", required=True, help="output checkpoint path")
    p.add_argument("--steps", type=int, default=None, help="training steps (default 500)")
    p.add_argument("--batch-size", type=int, default=None, help="examples per step (default 32)")
    p.add_argument("--base-rate", type=float, default=None,
                   help="learning-rate scale (default 0.5)")
    p.add_argument("--warmup-steps", type=int, default=None,
                   help="warmup length for the schedule (default 4000)")
    p.add_argument("--schedule", choices=("warmup", "constant"), default=None,
                   help="learning-rate schedule (default warmup)")
    p.add_argument("--loss-log", default=None, help="write 'step TAB loss TAB lr' lines here")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser(
        "generate", parents=[common],
        help="decode literal sentences through a trained checkpoint",
        description="Mask each marked verb and greedy-decode the checkpointed model.",
    )
    p.add_argument("--checkpoint", required=True, help="trained model checkpoint")
    p.add_argument("--vocab", required=True, help="vocabulary the model was trained with")
    p.add_argument("--input", required=True, help="corpus file: 'label TAB verb_index TAB tokens'")
    p.add_argument("--output", default=None, help="decoded sentences (default stdout)")
    p.add_argument("--window", type=int, default=None, help="context tokens per side (default 7)")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser(
        "evaluate", parents=[common],
        help="aggregate ratings into means and correlations",
        description="Filter workers, average scores per cell, and correlate dimensions.",
    )
    p.add_argument("--ratings", required=True,
                   help="ratings file (.csv delimited, .jsonl/.log service log)")
    p.add_argument("--items", default=None, help="JSON file of items under evaluation")
    p.add_argument("--test-items", default=None, help="JSON file of attention checks")
    p.add_argument("--min-tasks", type=int, default=None,
                   help="minimum ratings per worker (default 2)")
    p.add_argument("--summary-out", default=None, help="means table path (default stdout)")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser(
        "score", parents=[common, embeddings],
        help="overlap and copy-penalized cosine for paraphrase pairs",
        description="Score 'x TAB y_prime' lines with unigram overlap and the proxy metric.",
    )
    p.add_argument("--input", required=True, help="pairs file, 'x TAB y_prime' per line")
    p.add_argument("--output", default=None, help="scored table (default stdout)")
    p.add_argument("--lambda", dest="lambda_penalty", type=float, default=None,
                   help="copy penalty weight (default 0.25)")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser(
        "serve", parents=[common],
        help="run the annotation service",
        description="Serve rating tasks over HTTP and append ratings durably to a log.",
    )
    p.add_argument("--items", required=True, help="JSON file of items under evaluation")
    p.add_argument("--test-items", default=None, help="JSON file of attention checks")
    p.add_argument("--guidelines", default=None, help="JSON file of per-dimension guidelines")
    p.add_argument("--log", required=True, help="append-only rating log path")
    p.add_argument("--static-dir", default=None, help="directory of UI assets to serve")
    p.add_argument("--port", type=int, default=None, help="listen port (default 8000)")
    p.add_argument("--host", default=None, help="bind address (default 127.0.0.1)")
    p.add_argument("--test-interval", type=int, default=None,
                   help="every k-th task is an attention check (default 10)")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _FAILURE_CLASSES as exc:
        name = type(exc).__name__
        message = str(exc).replace("\n", " ").strip() or name
        print(f"error ({name}): {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
