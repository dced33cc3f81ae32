"""Command line entry point: preprocess, train, predict, ensemble, evaluate."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import checkpoint as ckpt
from .classifier import predict, train
from .data import Sample, Dataset, read_dataset, require_labels, write_dataset
from .ensemble import METHODS, combine, ensemble_report
from .errors import AlignmentError, ConfigError, SugmineError
from .experiment import build_manifest, experiment_from_dict, load_experiment, load_pipeline
from .metrics import error_report, format_confusion, format_table
from .predictions import read_predictions, write_predictions
from .preprocess import STAGES, PipelineConfig, run_stages

log = logging.getLogger("sugmine")


def _dump_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def cmd_preprocess(args) -> int:
    if args.config:
        cfg = load_pipeline(args.config)
    else:
        cfg = PipelineConfig(tuple(args.stages) if args.stages else STAGES)
    ds = read_dataset(args.input)
    if not ds:
        log.warning("%s contains no samples", args.input)
    changed = {stage: 0 for stage in cfg.enabled_stages}
    out = Dataset()
    for s in ds:
        prev = s.text
        for stage, text in run_stages(s.text, cfg):
            if text != prev:
                changed[stage] += 1
            prev = text
        out.append(Sample(s.id, " ".join(t.lower() for t in prev.split()), s.label))
    write_dataset(args.out, out, with_labels=bool(ds) and ds.labeled)
    print(f"preprocessed {len(ds)} samples -> {args.out}")
    for stage, n in changed.items():
        print(f"  {stage:<16} changed {n} samples")
    return 0


def _train_member(cfg_dict: dict, index: int):
    # paths in cfg_dict are already absolute
    cfg = experiment_from_dict({k: v for k, v in cfg_dict.items() if v is not None}, Path("."), check_paths=False)
    seed = cfg.member_seed(index)
    cfg.training.seed = seed
    train_ds = read_dataset(cfg.train)
    val_ds = read_dataset(cfg.val) if cfg.val else None
    checkpoint, history = train(train_ds, val_ds, cfg.model, cfg.training, cfg.pipeline, cfg.vectors)
    checkpoint.metadata["member"] = index
    checkpoint.metadata["config_hash"] = cfg.config_hash()
    return ckpt.dumps(checkpoint), history


def cmd_train(args) -> int:
    cfg = load_experiment(args.config, seed=args.seed)
    if args.members is not None:
        if args.members < 1:
            raise ConfigError("--members must be >= 1")
        cfg.members = args.members
    out = Path(args.out or Path("runs") / Path(args.config).stem)
    out.mkdir(parents=True, exist_ok=True)
    cfg_dict = cfg.to_dict()
    indices = list(range(cfg.members))
    if args.jobs > 1 and cfg.members > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_train_member, [cfg_dict] * len(indices), indices))
    else:
        results = [_train_member(cfg_dict, i) for i in indices]

    members = []
    with open(out / "train_log.jsonl", "w", encoding="utf-8") as fh:
        for i, (blob, history) in enumerate(results):
            name = "model.sgm" if cfg.members == 1 else f"member_{i}.sgm"
            (out / name).write_bytes(blob)
            for entry in history:
                fh.write(json.dumps({"member": i, **entry}, sort_keys=True) + "\n")
            meta = ckpt.loads(blob).metadata
            best = next((e for e in history if e["epoch"] == meta["selected_epoch"]), history[-1])
            members.append({
                "index": i,
                "seed": cfg.member_seed(i),
                "checkpoint": name,
                "checkpoint_sha256": hashlib.sha256(blob).hexdigest(),
                "selected_epoch": meta["selected_epoch"],
                "val_binary_f1": best.get("val_binary_f1"),
            })
            f1 = best.get("val_binary_f1")
            f1_txt = f"{f1:.4f}" if f1 is not None else "n/a"
            print(f"member {i}: seed {cfg.member_seed(i)}, epoch {meta['selected_epoch']}, val binary F1 {f1_txt} -> {out / name}")
    _dump_json(out / "manifest.json", build_manifest(cfg, members))
    print(f"manifest -> {out / 'manifest.json'}")
    return 0


def cmd_predict(args) -> int:
    checkpoint = ckpt.load(args.checkpoint)
    ds = read_dataset(args.data)
    ps = predict(ds, checkpoint)
    write_predictions(args.out, ps)
    print(f"{len(ps)} predictions ({int(ps.labels.sum())} suggestions) -> {args.out}")
    return 0


def cmd_ensemble(args) -> int:
    members = [read_predictions(p) for p in args.members]
    for path, m in zip(args.members, members):
        print(f"member {path}: {len(m)} samples, {int(m.labels.sum())} predicted suggestions")
    combined = combine(members, args.method)
    write_predictions(args.out, combined)
    _dump_json(Path(str(args.out) + ".meta.json"), {"calibrated": combined.calibrated, **combined.meta,
                                                    "sources": [str(p) for p in args.members]})
    print(f"{args.method} ensemble of {len(members)} -> {args.out}")
    if args.gold:
        gold = read_dataset(args.gold)
        require_labels(gold, "gold file")
        if gold.ids != members[0].ids:
            raise AlignmentError("gold ids do not match prediction ids", sorted(set(gold.ids) ^ set(members[0].ids)))
        rows = ensemble_report(members, gold.labels, [Path(p).stem for p in args.members])
        print(format_table([r for _, r in rows], [n for n, _ in rows]))
    return 0


def cmd_evaluate(args) -> int:
    preds = read_predictions(args.pred)
    gold = read_dataset(args.gold)
    require_labels(gold, "gold file")
    if preds.ids != gold.ids:
        offending = sorted(set(preds.ids) ^ set(gold.ids)) or [
            a for a, b in zip(preds.ids, gold.ids) if a != b
        ]
        raise AlignmentError("prediction ids do not match gold ids", offending)
    rep = error_report(preds, gold.labels, [s.text for s in gold], gold.ids)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(out / "metrics.json", rep.metrics.to_dict())
    _dump_json(out / "errors.json", {
        "false_positives": rep.to_dict()["false_positives"],
        "false_negatives": rep.to_dict()["false_negatives"],
    })
    table = format_table([rep.metrics], [Path(args.pred).stem]) + "\n" + format_confusion(rep.metrics.cm) + "\n"
    (out / "report.txt").write_text(table, encoding="utf-8")
    print(table, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sugmine", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="normalize and tokenize a dataset file")
    p.add_argument("input", help="CSV with header id,sentence[,label]")
    p.add_argument("--out", required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--stages", nargs="+", choices=STAGES, help="subset of stages (default: all)")
    group.add_argument("--config", help="take the stages from an experiment config or run manifest")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train one model or several ensemble members")
    p.add_argument("--config", required=True, help="experiment JSON or a previous run manifest")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory (default runs/<config name>)")
    p.add_argument("--members", type=int, help="number of ensemble members (overrides config)")
    p.add_argument("--jobs", type=int, default=1, help="members trained in parallel")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write class probabilities for a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("ensemble", help="combine prediction files")
    p.add_argument("members", nargs="+", help="prediction CSV files")
    p.add_argument("--method", choices=METHODS, default="mean")
    p.add_argument("--out", required=True)
    p.add_argument("--gold", help="labeled dataset; prints a per-member and ensemble score table")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("evaluate", help="score predictions against gold labels")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out", required=True, help="output directory for the report files")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (SugmineError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
