"""Command line interface: `pacte-hf-export export|finetune`."""

from __future__ import annotations

import argparse
import sys

from .export import export_embeddings
from .finetune import finetune_partisanship
from .jobs import ExportJob, FinetuneSettings, LABEL_MODES


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pacte-hf-export",
        description="Export contextualized word embeddings from a HuggingFace "
        "checkpoint in the embedding interchange format",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--model", required=True, help="model name or checkpoint directory")
        p.add_argument("--corpus", required=True, help="token-list JSONL (id/side/tokens)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--max-seq-len", type=int, default=512)

    p_export = sub.add_parser("export", help="write the embedding store")
    common(p_export)

    p_ft = sub.add_parser("finetune", help="finetune on side labels, then keep the best-F1 checkpoint")
    common(p_ft)
    p_ft.add_argument("--split", help="train/validation split JSON from the upstream pipeline")
    p_ft.add_argument("--label-mode", choices=LABEL_MODES, default="true_labels")
    p_ft.add_argument("--lr", type=float, default=1e-5)
    p_ft.add_argument("--weight-decay", type=float, default=5e-4)
    p_ft.add_argument("--batch-size", type=int, default=64)
    p_ft.add_argument("--epochs", type=int, default=30)
    p_ft.add_argument("--seed", type=int, default=0)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "export":
            job = ExportJob(
                model=args.model,
                corpus_path=args.corpus,
                output_dir=args.out,
                max_seq_len=args.max_seq_len,
            )
            result = export_embeddings(job)
            print(f"exported {result.n_docs} documents (dim {result.dim}) -> {result.index_path}")
            for doc_id, count in sorted(result.omitted.items()):
                print(f"  note: {doc_id}: {count} token(s) omitted by truncation")
        else:
            job = ExportJob(
                model=args.model,
                corpus_path=args.corpus,
                output_dir=args.out,
                max_seq_len=args.max_seq_len,
                finetune=FinetuneSettings(
                    learning_rate=args.lr,
                    weight_decay=args.weight_decay,
                    batch_size=args.batch_size,
                    epochs=args.epochs,
                    label_mode=args.label_mode,
                    seed=args.seed,
                    split_path=args.split,
                ),
            )
            result = finetune_partisanship(job)
            print(f"checkpoint -> {result.checkpoint_dir}")
            if result.best_val_f1 is not None:
                print(f"best validation F1: {result.best_val_f1:.4f}")
            for row in result.metrics:
                f1 = "-" if row["val_f1"] is None else f"{row['val_f1']:.4f}"
                print(f"  epoch {row['epoch']}: loss {row['train_loss']:.4f}  val F1 {f1}")
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
