"""Command-line pipeline: synth, pool, cca-fit/eval, lstm-train/eval, report.

Exit codes: 0 on success, 1 on usage errors, 2 on data errors. Failures
print a single ``error: ...`` line to stderr. All artifacts are plain text
and byte-identical across runs with identical inputs, flags, and seeds.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .cca import fit_cca, load_cca_model, save_cca_model
from .data import (
    build_cca_training,
    build_lstm_examples,
    load_feature_store,
    parse_manifest,
    pool_store,
    read_report_jsonl,
    save_feature_store,
    write_manifest,
    write_report_jsonl,
)
from .errors import DataError, InvalidInputError, MadlibkitError, NoDecisionError
from .lstm import LstmConfig, load_checkpoint, predict, save_checkpoint, train
from .pooling import EmbeddingTable, tokenize
from .selection import (
    CATEGORIES,
    MadlibInstance,
    aggregate_outcomes,
    evaluate,
    merge_reports,
    render_report_table,
)
from .synth import SynthConfig, generate_synthetic

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    """Parser that exits 1 on usage errors with a single trailing error line."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: usage: {message}", file=sys.stderr)
        sys.exit(1)


def _slug(category: str) -> str:
    return category.replace(" ", "_")


def _by_category(instances: Sequence[MadlibInstance]) -> list[tuple[str, list[MadlibInstance]]]:
    groups: dict[str, list[MadlibInstance]] = {}
    for inst in instances:
        groups.setdefault(inst.category, []).append(inst)
    return sorted(groups.items(), key=lambda kv: CATEGORIES.index(kv[0]))


def _load_inputs(args):
    instances = [rec.to_instance() for rec in parse_manifest(args.manifest)]
    features = load_feature_store(args.features).global_map()
    table = EmbeddingTable.load_word2vec_text(args.embeddings)
    return instances, features, table


def cmd_synth(args) -> int:
    config = SynthConfig(
        concepts=args.concepts,
        images=args.images,
        vocab_size=args.vocab_size,
        sigma=args.sigma,
        seed=args.seed,
        feature_dim=args.feature_dim,
        word_dim=args.word_dim,
        category=args.category,
    )
    result = generate_synthetic(config)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(result.records, out / "manifest.jsonl")
    save_feature_store(result.store, out / "features.txt")
    result.table.save_word2vec_text(out / "embeddings.txt")
    print(f"wrote {len(result.records)} instances, {len(result.store)} images to {out}")
    return 0


def cmd_pool(args) -> int:
    store = load_feature_store(args.features)
    pooled = pool_store(store, beta=args.nms, top_k=args.top_k, mode=args.mode, l2_normalize=args.l2_normalize)
    save_feature_store(pooled, args.out)
    print(f"pooled {len(pooled)} images (nms={args.nms}, top-k={args.top_k}, {args.mode}) -> {args.out}")
    return 0


def cmd_cca_fit(args) -> int:
    instances, features, table = _load_inputs(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for category, insts in _by_category(instances):
        x, y, skipped = build_cca_training(insts, features, table)
        model = fit_cca(x, y, ridge=args.ridge, embed_dim=args.embed_dim, power_p=args.power)
        path = out / f"{_slug(category)}.ncca"
        save_cca_model(model, path)
        note = f" ({len(skipped)} pairs skipped)" if skipped else ""
        print(f"{category}: fit on {x.shape[0]} pairs, embed dim {model.embed_dim}{note} -> {path}")
    return 0


def cmd_cca_eval(args) -> int:
    instances, features, table = _load_inputs(args)
    models_dir = Path(args.models)
    reports = []
    for category, insts in _by_category(instances):
        path = models_dir / f"{_slug(category)}.ncca"
        if not path.exists():
            raise DataError(f"no model for category {category!r} at {path}")
        reports.append(evaluate(insts, load_cca_model(path), features, table))
    report = merge_reports(reports)
    write_report_jsonl(report, args.out)
    print(render_report_table(report))
    return 0


def cmd_lstm_train(args) -> int:
    instances, features, table = _load_inputs(args)
    config = LstmConfig(
        hidden_dim=args.hidden_dim,
        token_dim=args.token_dim,
        image_dim=args.image_dim,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        alpha=args.alpha,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    loss_rows = []
    for category, insts in _by_category(instances):
        examples, skipped = build_lstm_examples(insts, features, table)
        if not examples:
            raise DataError(f"no trainable examples for category {category!r}")
        trained = train(examples, config)
        path = out / f"{_slug(category)}.elstm"
        save_checkpoint(trained, path)
        for epoch, loss in enumerate(trained.epoch_losses, start=1):
            loss_rows.append({"category": category, "epoch": epoch, "mean_loss": loss})
        note = f" ({len(skipped)} skipped)" if skipped else ""
        print(f"{category}: trained on {len(examples)} examples for {config.epochs} epochs{note} -> {path}")
    loss_log = Path(args.loss_log) if args.loss_log else out / "losses.jsonl"
    with open(loss_log, "w", encoding="utf-8") as fh:
        for row in loss_rows:
            fh.write(json.dumps(row) + "\n")
    return 0


def cmd_lstm_eval(args) -> int:
    instances, features, table = _load_inputs(args)
    ckpt_dir = Path(args.checkpoints)
    reports = []
    for category, insts in _by_category(instances):
        path = ckpt_dir / f"{_slug(category)}.elstm"
        if not path.exists():
            raise DataError(f"no checkpoint for category {category!r} at {path}")
        trained = load_checkpoint(path)
        outcomes = []
        data_errors = []
        for inst in insts:
            feat = features.get(inst.image_id)
            if feat is None:
                data_errors.append((inst.image_id, "missing image feature"))
                continue
            try:
                chosen = predict(
                    trained.params,
                    trained.vocab,
                    feat,
                    inst.prompt,
                    [tokenize(c) for c in inst.candidates],
                    table,
                )
                correct = chosen == inst.truth_index
            except NoDecisionError:
                correct = False
            outcomes.append((inst.category, inst.task, correct))
        reports.append(aggregate_outcomes(outcomes, data_errors))
    report = merge_reports(reports)
    write_report_jsonl(report, args.out)
    print(render_report_table(report))
    return 0


def cmd_report(args) -> int:
    print(render_report_table(read_report_jsonl(args.input)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="madlibkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("synth", help="generate a synthetic manifest, features, and embeddings")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--concepts", type=int, default=8)
    p.add_argument("--images", type=int, default=400)
    p.add_argument("--vocab-size", type=int, default=64)
    p.add_argument("--sigma", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--feature-dim", type=int, default=32)
    p.add_argument("--word-dim", type=int, default=300)
    p.add_argument("--category", default="scenes")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pool", help="suppress, rank, and pool proposal features per image")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--nms", type=float, default=0.75)
    p.add_argument("--top-k", type=int, default=100)
    p.add_argument("--mode", choices=("mean", "max"), default="mean")
    p.add_argument("--l2-normalize", action="store_true")
    p.set_defaults(func=cmd_pool)

    p = sub.add_parser("cca-fit", help="fit one joint-embedding model per category")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--ridge", type=float, default=None)
    p.add_argument("--embed-dim", type=int, default=None)
    p.add_argument("--power", type=float, default=4.0)
    p.set_defaults(func=cmd_cca_fit)

    p = sub.add_parser("cca-eval", help="evaluate joint-embedding models on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--models", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cca_eval)

    p = sub.add_parser("lstm-train", help="train one embedded LSTM per category")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden-dim", type=int, default=256)
    p.add_argument("--token-dim", type=int, default=128)
    p.add_argument("--image-dim", type=int, default=128)
    p.add_argument("--alpha", type=float, default=0.001)
    p.add_argument("--loss-log", default=None)
    p.set_defaults(func=cmd_lstm_train)

    p = sub.add_parser("lstm-eval", help="evaluate LSTM checkpoints on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--checkpoints", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lstm_eval)

    p = sub.add_parser("report", help="render a report JSONL file as an aligned table")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except InvalidInputError as exc:
        # out-of-range flag values (beta, k, config sizes) are usage errors
        print(f"error: usage: {exc}", file=sys.stderr)
        return 1
    except (MadlibkitError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
