"""Command line entry point orchestrating all pipelines.

Every command validates flags before doing work, keeps all randomness
behind --seed (env fallback GRAMSCOPE_SEED), and writes a run manifest
next to its outputs. Exit codes: 0 success, 2 usage, 3 data error,
4 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

from . import __version__
from .errors import DataError, GramscopeError
from . import chat, labels, prep, synthetic, trends
from .classifiers import (
    GrammaticalityModel,
    TrainConfig,
    ensemble_vote,
    import_external_predictions,
    train_model,
    write_predictions_jsonl,
)
from .evaluation import (
    run_cross_validation,
    sweep_context_length,
    sweep_training_size,
    write_sweep_csv,
)
from .tokenization import BpeTokenizer

EXIT_DATA_ERROR = 3
EXIT_INTERNAL_ERROR = 4


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(
    anchor: Path,
    command: str,
    config: dict,
    seed: int | None,
    inputs: list[Path],
    outputs: list[Path],
) -> Path:
    """One manifest per command, next to its outputs."""
    if anchor.is_dir():
        path = anchor / "manifest.json"
    else:
        path = anchor.with_name(anchor.name + ".manifest.json")
    manifest = {
        "tool": "gramscope",
        "version": __version__,
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": [
            {"path": str(p), "sha256": _sha256(p)} for p in inputs if p.is_file()
        ],
        "outputs": [str(p) for p in outputs],
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    return path


def _resolve_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("GRAMSCOPE_SEED")
    return int(env) if env else 0


def _train_config(args, seed: int) -> TrainConfig:
    return TrainConfig(
        max_n=args.ngram,
        C=args.C,
        context_turns=args.context,
        bpe_vocab_size=args.vocab_size,
        early_stopping=args.early_stopping,
        seed=seed,
    )


def _load_tokenizer(args) -> BpeTokenizer | None:
    if getattr(args, "tokenizer", None):
        return BpeTokenizer.load(args.tokenizer)
    return None


def _public_config(args) -> dict:
    skip = {"func", "config"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_ingest(args) -> int:
    root = Path(args.in_path)
    if root.is_dir():
        files = sorted(root.rglob("*.cha"))
    else:
        files = [root]
    transcripts = [chat.parse_chat_file(f, corpus=args.corpus) for f in files]
    out = Path(args.out)
    n = chat.write_corpus_jsonl(transcripts, out)
    write_manifest(out, "ingest", _public_config(args), None, files, [out])
    print(f"ingested {len(transcripts)} transcripts, {n} utterances -> {out}")
    return 0


def cmd_screen_dialect(args) -> int:
    transcripts = chat.read_corpus_jsonl(Path(args.corpus))
    by_corpus: dict[str, list] = {}
    for t in transcripts:
        by_corpus.setdefault(t.corpus, []).append(t)
    bigrams = prep.DEFAULT_DIALECT_BIGRAMS
    if args.bigrams:
        bigrams = tuple(tuple(b.split()) for b in args.bigrams.split(","))
    reports = [
        prep.detect_dialect_divergence(group, bigrams=bigrams, threshold=args.threshold)
        for _, group in sorted(by_corpus.items())
    ]
    out = Path(args.out)
    out.write_text(
        json.dumps([vars(r) for r in reports], indent=2, sort_keys=True),
        encoding="utf-8",
    )
    write_manifest(out, "screen-dialect", _public_config(args), None, [Path(args.corpus)], [out])
    for r in reports:
        flag = "EXCLUDE" if r.excluded else "keep"
        print(f"{r.corpus}: {r.rate_per_10k:.2f}/10k caregiver utterances [{flag}]")
    return 0


def cmd_prepare(args) -> int:
    transcripts = chat.read_corpus_jsonl(Path(args.corpus))
    if args.exclude_corpora:
        excluded = set(args.exclude_corpora.split(","))
        transcripts = [t for t in transcripts if t.corpus not in excluded]
    chunks = prep.build_chunks(transcripts, chunk_size=args.chunk_size, n_context=args.context)
    items = [item for c in chunks for item in c.items]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    items_path = out_dir / "items.jsonl"
    chunks_path = out_dir / "chunks.json"
    prep.write_items_jsonl(items, items_path)
    prep.write_chunks_json(chunks, chunks_path)
    write_manifest(
        out_dir, "prepare", _public_config(args), None,
        [Path(args.corpus)], [items_path, chunks_path],
    )
    n_full = sum(1 for c in chunks if not c.partial)
    print(f"{len(items)} eligible items in {n_full} full chunks"
          f" (+{len(chunks) - n_full} partial) -> {out_dir}")
    return 0


def cmd_export_sheets(args) -> int:
    items = prep.read_items_jsonl(Path(args.items))
    chunks = prep.read_chunks_json(Path(args.chunks), items)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for chunk in chunks:
        if chunk.partial and not args.include_partial:
            continue
        path = out_dir / f"{chunk.chunk_id}.tsv"
        prep.export_annotation_sheet(chunk, path)
        outputs.append(path)
    write_manifest(
        out_dir, "export-sheets", _public_config(args), None,
        [Path(args.items), Path(args.chunks)], outputs,
    )
    print(f"wrote {len(outputs)} annotation sheets -> {out_dir}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ProjectState, create_app

    items = prep.read_items_jsonl(Path(args.items))
    chunks = prep.read_chunks_json(Path(args.chunks), items)
    data_dir = Path(args.data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    state = ProjectState(
        chunks=chunks,
        queue_policy=args.policy,
        quorum=args.quorum,
        log_path=data_dir / "events.jsonl",
    )
    app = create_app(state, static_dir=args.static)
    print(f"serving {len(items)} items on http://127.0.0.1:{args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_train_bpe(args) -> int:
    transcripts = chat.read_corpus_jsonl(Path(args.corpus))
    streams = [u.tokens for t in transcripts for u in t.utterances if u.tokens]
    tokenizer = BpeTokenizer(vocab_size=args.vocab_size).fit(streams)
    out = Path(args.out)
    tokenizer.save(out)
    write_manifest(out, "train-bpe", _public_config(args), None, [Path(args.corpus)], [out])
    print(f"tokenizer with {len(tokenizer.vocab_)} entries, "
          f"{len(tokenizer.merges_)} merges -> {out}")
    return 0


def cmd_train(args) -> int:
    seed = _resolve_seed(args)
    items = prep.read_items_jsonl(Path(args.items))
    gold = labels.read_gold_jsonl(Path(args.gold))
    by_id = {g.item_id: g for g in gold}
    items = [it for it in items if it.item_id in by_id]
    config = _train_config(args, seed)
    model = train_model(
        items, [by_id[it.item_id] for it in items], config,
        model=args.model, tokenizer=_load_tokenizer(args),
    )
    out = Path(args.out)
    model.save(out)
    write_manifest(
        out, "train", _public_config(args), seed,
        [Path(args.items), Path(args.gold)], [out],
    )
    print(f"trained {args.model} model on {len(items)} items -> {out}")
    return 0


def cmd_evaluate(args) -> int:
    seed = _resolve_seed(args)
    items = prep.read_items_jsonl(Path(args.items))
    gold = labels.read_gold_jsonl(Path(args.gold))
    annotations = (
        labels.read_gold_jsonl(Path(args.annotations)) if args.annotations else None
    )
    config = _train_config(args, seed)
    report = run_cross_validation(
        items, gold, config, model=args.model, n_folds=args.folds,
        tokenizer=_load_tokenizer(args), annotations=annotations,
    )
    out = Path(args.out)
    report.save(out)
    write_manifest(
        out, "evaluate", _public_config(args), seed,
        [Path(args.items), Path(args.gold)], [out],
    )
    print(f"{args.model}: PCC {report.pcc_mean:.3f} +/-{report.pcc_sd:.3f}, "
          f"accuracy {report.accuracy_mean:.3f} +/-{report.accuracy_sd:.3f} -> {out}")
    return 0


def cmd_sweep_context(args) -> int:
    seed = _resolve_seed(args)
    items = prep.read_items_jsonl(Path(args.items))
    gold = labels.read_gold_jsonl(Path(args.gold))
    lengths = [int(x) for x in args.lengths.split(",")]
    config = _train_config(args, seed)
    rows = sweep_context_length(
        items, gold, config, lengths=lengths, model=args.model, n_folds=args.folds
    )
    out = Path(args.out)
    write_sweep_csv(rows, out, x_name="context_turns")
    write_manifest(
        out, "sweep-context", _public_config(args), seed,
        [Path(args.items), Path(args.gold)], [out],
    )
    for row in rows:
        print(f"context {int(row.x):2d}: PCC {row.pcc_mean:.3f} +/-{row.pcc_sd:.3f}")
    return 0


def cmd_sweep_train_size(args) -> int:
    seed = _resolve_seed(args)
    items = prep.read_items_jsonl(Path(args.items))
    gold = labels.read_gold_jsonl(Path(args.gold))
    fractions = [float(x) for x in args.fractions.split(",")]
    config = _train_config(args, seed)
    rows = sweep_training_size(
        items, gold, config, fractions=fractions, model=args.model, n_folds=args.folds
    )
    out = Path(args.out)
    write_sweep_csv(rows, out, x_name="fraction")
    write_manifest(
        out, "sweep-train-size", _public_config(args), seed,
        [Path(args.items), Path(args.gold)], [out],
    )
    for row in rows:
        print(f"fraction {row.x:.1f}: PCC {row.pcc_mean:.3f} +/-{row.pcc_sd:.3f}")
    return 0


def cmd_predict(args) -> int:
    items = prep.read_items_jsonl(Path(args.items))
    models = [GrammaticalityModel.load(Path(p)) for p in args.models]
    per_model = [m.predict_items(items) for m in models]
    predictions = ensemble_vote(per_model) if len(per_model) > 1 else per_model[0]
    out = Path(args.out)
    write_predictions_jsonl(predictions, out)
    write_manifest(
        out, "predict", _public_config(args), None,
        [Path(p) for p in args.models] + [Path(args.items)], [out],
    )
    print(f"annotated {len(predictions)} items with {len(models)} model(s) -> {out}")
    return 0


def cmd_import_predictions(args) -> int:
    predictions = import_external_predictions(Path(args.in_path))
    out = Path(args.out)
    write_predictions_jsonl(predictions, out)
    write_manifest(
        out, "import-predictions", _public_config(args), None, [Path(args.in_path)], [out]
    )
    print(f"imported {len(predictions)} predictions -> {out}")
    return 0


def cmd_trends(args) -> int:
    seed = _resolve_seed(args)
    predictions = import_external_predictions(Path(args.predictions))
    items = prep.read_items_jsonl(Path(args.items))
    proportions, _skipped = trends.transcript_proportions(predictions, items)
    fits = trends.fit_all_labels(
        predictions, items, n_resamples=args.resamples, seed=seed
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prop_path = out_dir / "proportions.csv"
    curve_path = out_dir / "curves.csv"
    report_path = out_dir / "trend_report.json"
    trends.export_trend_csv(
        fits, proportions, prop_path, curve_path, min_items=args.min_items
    )
    trends.write_trend_report(fits, report_path)
    write_manifest(
        out_dir, "trends", _public_config(args), seed,
        [Path(args.predictions), Path(args.items)],
        [prop_path, curve_path, report_path],
    )
    for fit in fits:
        print(f"{fit.label.key}: beta={fit.beta_age:+.4f}/month se={fit.se_beta:.4f} "
              f"p={fit.p_value:.2g}")
    return 0


def cmd_gen_synthetic(args) -> int:
    seed = _resolve_seed(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    items_path = out_dir / "items.jsonl"
    outputs = [items_path]
    if args.mode == "classify":
        categories = synthetic.DEFAULT_PLANTED_CATEGORIES
        if args.categories:
            categories = tuple(
                labels.ErrorCategory(c.strip()) for c in args.categories.split(",")
            )
        items, gold = synthetic.gen_classification_corpus(
            n_items=args.items,
            n_transcripts=args.transcripts,
            p_ungrammatical=args.p_ungrammatical,
            p_ambiguous=args.p_ambiguous,
            categories=categories,
            seed=seed,
        )
        gold_path = out_dir / "gold.jsonl"
        labels.write_gold_jsonl(gold, gold_path)
        outputs.append(gold_path)
    elif args.mode == "context":
        items, gold = synthetic.gen_context_corpus(
            n_items=args.items, n_transcripts=args.transcripts, seed=seed
        )
        gold_path = out_dir / "gold.jsonl"
        labels.write_gold_jsonl(gold, gold_path)
        outputs.append(gold_path)
    else:  # trend
        items, predictions = synthetic.gen_trend_corpus(
            n_utterances=args.utterances,
            n_transcripts=args.transcripts or 200,
            beta_per_month=args.beta,
            seed=seed,
        )
        pred_path = out_dir / "predictions.jsonl"
        write_predictions_jsonl(predictions, pred_path)
        outputs.append(pred_path)
    prep.write_items_jsonl(items, items_path)
    write_manifest(out_dir, "gen-synthetic", _public_config(args), seed, [], outputs)
    print(f"generated {len(items)} synthetic items ({args.mode}) -> {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=["svm", "majority"], default="svm")
    p.add_argument("--ngram", type=int, default=5, help="max n-gram order")
    p.add_argument("--C", type=float, default=1.0, help="SVM cost parameter")
    p.add_argument("--context", type=int, default=0, help="context turns to featurize")
    p.add_argument("--vocab-size", dest="vocab_size", type=int, default=10000)
    p.add_argument("--early-stopping", dest="early_stopping", action="store_true")
    p.add_argument("--tokenizer", help="pretrained tokenizer artifact (JSON)")
    p.add_argument("--seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gramscope",
        description="Grammaticality annotation toolkit for child-caregiver conversations",
    )
    parser.add_argument("--version", action="version", version=f"gramscope {__version__}")
    parser.add_argument(
        "--config", help="TOML or JSON file providing defaults for flags"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse .cha files into corpus JSONL")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--corpus", default=None, help="override corpus name")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("screen-dialect", help="flag corpora with diverging dialects")
    p.add_argument("--corpus", required=True, help="corpus JSONL")
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=prep.DEFAULT_DIALECT_THRESHOLD)
    p.add_argument("--bigrams", default=None, help='comma list like "she don\'t,you was"')
    p.set_defaults(func=cmd_screen_dialect)

    p = sub.add_parser("prepare", help="filter, chunk, and build context windows")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--chunk-size", dest="chunk_size", type=int, default=200)
    p.add_argument("--context", type=int, default=10, help="context turns to store")
    p.add_argument("--exclude-corpora", dest="exclude_corpora", default=None)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("export-sheets", help="write per-chunk annotation TSVs")
    p.add_argument("--items", required=True)
    p.add_argument("--chunks", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--include-partial", dest="include_partial", action="store_true")
    p.set_defaults(func=cmd_export_sheets)

    p = sub.add_parser("serve", help="run the annotation service")
    p.add_argument("--items", required=True)
    p.add_argument("--chunks", required=True)
    p.add_argument("--data-dir", dest="data_dir", required=True)
    p.add_argument("--port", type=int, default=7171)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--policy", choices=["majority", "unanimity"], default="majority")
    p.add_argument("--quorum", type=int, default=3)
    p.add_argument("--static", default=None, help="built UI bundle directory")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("train-bpe", help="train the subword tokenizer")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--vocab-size", dest="vocab_size", type=int, default=10000)
    p.set_defaults(func=cmd_train_bpe)

    p = sub.add_parser("train", help="train one model on all labeled items")
    p.add_argument("--items", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="transcript-grouped cross-validation")
    p.add_argument("--items", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument(
        "--annotations", default=None,
        help="pre-adjudication multi-annotator gold JSONL for the agreement block",
    )
    _add_train_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep-context", help="validation PCC vs context length")
    p.add_argument("--items", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--lengths", default="0,1,2,3,4,5,6,7,8,9,10")
    _add_train_flags(p)
    p.set_defaults(func=cmd_sweep_context)

    p = sub.add_parser("sweep-train-size", help="test PCC vs training fraction")
    p.add_argument("--items", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--fractions", default="0.2,0.4,0.6,0.8,1.0")
    _add_train_flags(p)
    p.set_defaults(func=cmd_sweep_train_size)

    p = sub.add_parser("predict", help="batch-annotate items (ensemble votes)")
    p.add_argument("--models", nargs="+", required=True)
    p.add_argument("--items", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("import-predictions", help="validate external predictions")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_import_predictions)

    p = sub.add_parser("trends", help="proportions vs age and logistic fits")
    p.add_argument("--predictions", required=True)
    p.add_argument("--items", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--min-items", dest="min_items", type=int, default=100)
    p.add_argument("--resamples", type=int, default=500)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_trends)

    p = sub.add_parser("gen-synthetic", help="planted-error corpus generator")
    p.add_argument("--mode", choices=["classify", "context", "trend"], default="classify")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--items", type=int, default=10000)
    p.add_argument("--transcripts", type=int, default=None)
    p.add_argument("--utterances", type=int, default=50000, help="trend mode size")
    p.add_argument("--beta", type=float, default=0.014, help="trend mode slope per month")
    p.add_argument("--p-ungrammatical", dest="p_ungrammatical", type=float, default=0.3)
    p.add_argument("--p-ambiguous", dest="p_ambiguous", type=float, default=0.15)
    p.add_argument(
        "--categories", default=None,
        help="comma list of error categories to plant (default: determiner,subject,sv_agreement)",
    )
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_gen_synthetic)

    return parser


def _load_config_defaults(argv: list[str], parser: argparse.ArgumentParser) -> None:
    """Apply --config file values as subparser defaults (flags still win)."""
    if "--config" not in argv:
        return
    path = Path(argv[argv.index("--config") + 1])
    if path.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # python < 3.11
            import tomli as tomllib

        values = tomllib.loads(path.read_text(encoding="utf-8"))
    else:
        values = json.loads(path.read_text(encoding="utf-8"))
    flat = {k.replace("-", "_"): v for k, v in values.items()}
    for action in parser._subparsers._group_actions:  # noqa: SLF001
        for sub_parser in action.choices.values():
            known = {a.dest for a in sub_parser._actions}  # noqa: SLF001
            sub_parser.set_defaults(**{k: v for k, v in flat.items() if k in known})


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _load_config_defaults(argv, parser)
    except (OSError, ValueError) as exc:
        print(f"ConfigError: {exc}", file=sys.stderr)
        return 2
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA_ERROR
    except GramscopeError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL_ERROR
    except Exception as exc:  # invariant violations
        print(f"InternalError({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
