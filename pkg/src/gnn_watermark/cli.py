"""``gnnwm`` command line.

Exit codes: 0 success / watermark verified, 2 watermark not verified,
1 any error (including bad arguments).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .attacks import finetune, prune
from .checkpoint import load_model, save_model
from .datasets import load_dataset, save_trigger
from .experiments import ExperimentConfig, run_report
from .graph import split_nodes
from .keyed_rand import derive_seed, seed_bytes
from .sage import SageModel, TrainConfig, accuracy, train
from .trigger import make_trigger
from .watermark import DEFAULT_ALPHA, ModelMismatchError, embed, extract, verify, watermark_accuracy

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_VERIFIED = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _probability(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return value


def _add_trigger_args(p, required=True):
    p.add_argument("--key", required=required, help="secret watermark key")
    p.add_argument("--n", type=int, default=10, help="trigger nodes")
    p.add_argument("--pg", type=_probability, default=0.0, help="trigger edge probability")
    p.add_argument("--pr", type=_probability, default=0.1, help="proportion of ones in trigger features")


def _add_dataset_args(p):
    p.add_argument("--dataset", required=True, help="cora, pubmed, or a GRAPH1 .json file")
    p.add_argument("--data-root", default=None, help="dataset root (default: $GNNWM_DATA_ROOT)")


def _split_seed(seed: int) -> int:
    return derive_seed(seed_bytes(seed), "split")


def _print_json(doc) -> None:
    print(json.dumps(doc, indent=2))


def cmd_generate_trigger(args) -> int:
    if args.dims:
        d, c = args.dims
    elif args.dataset:
        g = load_dataset(args.dataset, args.data_root)
        d, c = g.feature_dim, g.num_classes
    else:
        raise UsageError("give --dims D C or --dataset")
    t = make_trigger(args.key, args.n, args.pg, args.pr, d, c)
    sidecar = save_trigger(args.out, t)
    _print_json({
        "fingerprint": f"{t.params.fingerprint:016x}",
        "graph": str(args.out),
        "watermark": str(sidecar),
        "num_edges": t.graph.num_edges,
    })
    return EXIT_OK


def cmd_train(args) -> int:
    g = load_dataset(args.dataset, args.data_root)
    masks = split_nodes(g, (0.4, 0.2, 0.4), _split_seed(args.seed))
    overrides = {"seed": args.seed}
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.lr is not None:
        overrides["learning_rate"] = args.lr
    cfg = TrainConfig(**overrides)

    trigger_meta = None
    if args.no_watermark:
        init = SageModel.initialize(g.feature_dim, g.num_classes, cfg.hidden_dim, cfg.seed)
        model, history = train(init, g, masks, None, cfg)
        trigger_acc = None
    else:
        if not args.key:
            raise UsageError("--key is required unless --no-watermark is given")
        model, trigger, history = embed(g, masks, args.key, args.n, args.pg, args.pr, cfg)
        trigger_acc = watermark_accuracy(extract(model, trigger), trigger.watermark)
        trigger_meta = {"n": args.n, "p_g": args.pg, "p_r": args.pr}

    save_model(
        args.out, model, config=cfg, seed=args.seed, epoch=len(history),
        extra={"dataset": args.dataset, "split_seed": _split_seed(args.seed), "trigger": trigger_meta},
    )
    history_path = Path(args.history) if args.history else Path(args.out).with_suffix(".history.csv")
    with open(history_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "train_loss", "val_acc", "trigger_acc"])
        for rec in history:
            writer.writerow([rec.epoch, repr(rec.train_loss), repr(rec.val_accuracy), repr(rec.trigger_accuracy)])
    _print_json({
        "checkpoint": str(args.out),
        "history": str(history_path),
        "epochs_run": len(history),
        "test_accuracy": accuracy(model, g, masks.test_ids),
        "trigger_accuracy": trigger_acc,
    })
    return EXIT_OK


def _verify_and_report(model: SageModel, args) -> int:
    dims = tuple(args.dims) if getattr(args, "dims", None) else None
    report = verify(model, args.key, args.n, args.pg, args.pr, dims=dims, alpha=args.alpha)
    _print_json(report.to_dict())
    return EXIT_OK if report.decision else EXIT_NOT_VERIFIED


def cmd_verify(args) -> int:
    model, _ = load_model(args.checkpoint)
    return _verify_and_report(model, args)


def cmd_attack(args) -> int:
    model, doc = load_model(args.checkpoint)
    if args.attack == "prune":
        attacked = prune(model, args.rate)
    else:
        g = load_dataset(args.dataset, args.data_root)
        extra = doc.get("extra") or {}
        split_seed = extra.get("split_seed", _split_seed(args.seed))
        masks = split_nodes(g, (0.4, 0.2, 0.4), split_seed)
        cfg = TrainConfig(**{**(doc.get("config") or {}), "seed": args.seed})
        attacked = finetune(model, g, masks, args.epochs, cfg, test_fraction=args.test_fraction)
    if args.out:
        save_model(args.out, attacked, config=None, seed=args.seed, epoch=None, extra=doc.get("extra"))
    if args.key:
        return _verify_and_report(attacked, args)
    return EXIT_OK


def cmd_report(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    paths = run_report(cfg, args.out, workers=args.workers)
    _print_json({name: str(p) for name, p in paths.items()})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gnnwm", description="Watermark GraphSAGE models with random trigger graphs.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate-trigger", help="write a keyed trigger graph as GRAPH1 JSON")
    _add_trigger_args(p)
    p.add_argument(
        "--dims", "--dataset-dims", type=int, nargs=2, metavar=("D", "C"),
        help="host feature dim and class count",
    )
    p.add_argument("--dataset", default=None, help="take D and C from this dataset instead")
    p.add_argument("--data-root", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate_trigger)

    p = sub.add_parser("train", help="train a marked (or plain) model")
    _add_dataset_args(p)
    _add_trigger_args(p, required=False)
    p.add_argument("--no-watermark", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--history", default=None, help="history CSV (default: <out>.history.csv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("verify", help="test a checkpoint for the watermark")
    p.add_argument("--checkpoint", required=True)
    _add_trigger_args(p)
    p.add_argument("--dims", type=int, nargs=2, metavar=("D", "C"), default=None)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("attack", help="prune or fine-tune a checkpoint, then optionally re-verify")
    attacks = p.add_subparsers(dest="attack", required=True, parser_class=_Parser)
    for name in ("prune", "finetune"):
        a = attacks.add_parser(name)
        a.add_argument("--checkpoint", required=True)
        a.add_argument("--out", default=None)
        a.add_argument("--seed", type=int, default=0)
        _add_trigger_args(a, required=False)
        a.add_argument("--dims", type=int, nargs=2, metavar=("D", "C"), default=None)
        a.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
        if name == "prune":
            a.add_argument("--rate", type=_probability, required=True)
        else:
            _add_dataset_args(a)
            a.add_argument("--epochs", type=int, required=True)
            a.add_argument("--test-fraction", type=_probability, default=0.3)
        a.set_defaults(func=cmd_attack)

    p = sub.add_parser("report", help="run an experiment grid and write CSV tables")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_ERROR
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ModelMismatchError as exc:
        print(f"error: wrong model family: {exc}", file=sys.stderr)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
