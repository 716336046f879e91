"""Command line entry point: synth, extract, train, eval, inspect-model."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .. import persons
from ..media import MediaError, load_sequence
from ..tracklets import TrackletParams, extract, write_dump
from .config import ConfigError, ExperimentConfig
from .experiment import (evaluate_from_config, run_experiment, run_rotation, train_from_config)
from .persist import ModelFileError, describe, load_model, save_model
from .synth import synth_generate


def _config(args) -> ExperimentConfig:
    overrides = "\n".join(args.set)
    if args.config:
        path = Path(args.config)
        text = path.read_text() + "\n" + overrides
        cfg = ExperimentConfig.from_text(text)
        root = Path(cfg.dataset_root)
        if not root.is_absolute():
            cfg = cfg.replace(dataset_root=str((path.parent / root).resolve()))
        return cfg
    return ExperimentConfig.from_text(overrides)


def _write_report(report, args):
    print(report.to_table())
    if args.csv:
        Path(args.csv).write_text(report.to_csv())
        print(f"per-sequence predictions written to {args.csv}")


def cmd_synth(args):
    recs = synth_generate(args.out, args.subjects, args.cameras, args.trajectories, args.frames,
                          args.seed, shared_signature=args.shared_signature)
    print(f"wrote {len(recs)} sequences under {args.out}")


def cmd_extract(args):
    seq = load_sequence(args.frames, args.camera)
    trs, descs = extract(seq, TrackletParams(n_scales=args.n_scales))
    if args.detections:
        dets = persons.read_detections(args.detections)
        per_frame = [dets.get(i, []) for i in range(len(seq))]
        tracks = persons.build_tracks([[b for b in d if b.kind != persons.UPPER_BODY] for d in per_frame])
        keep = {id(t) for t, _ in persons.filter_tracklets(trs, tracks, len(seq))}
        pairs = [(t, d) for t, d in zip(trs, descs) if id(t) in keep]
        trs, descs = [t for t, _ in pairs], [d for _, d in pairs]
    write_dump(args.out, trs, descs)
    print(f"{len(trs)} tracklets written to {args.out}")


def cmd_train(args):
    cfg = _config(args)
    bundle = train_from_config(cfg)
    save_model(bundle, args.model)
    print(describe(bundle))
    print(f"model written to {args.model}")


def cmd_eval(args):
    cfg = _config(args)
    if args.rotate:
        folds, pooled = run_rotation(cfg)
        for f in folds:
            print(f"--- test trajectory {f.sequences[0].trajectory}")
            print(f.to_table())
        print("--- pooled")
        _write_report(pooled, args)
        return
    if args.model:
        report = evaluate_from_config(load_model(args.model), cfg)
    else:
        report = run_experiment(cfg)
    _write_report(report, args)


def cmd_inspect(args):
    bundle = load_model(args.model)
    print(describe(bundle))
    if args.config_echo:
        print(bundle.config_text, end="")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pfm", description="Gait identification from dense motion descriptors.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic multi-camera gait dataset")
    p.add_argument("out")
    p.add_argument("--subjects", type=int, default=10)
    p.add_argument("--cameras", type=int, default=4)
    p.add_argument("--trajectories", type=int, default=3)
    p.add_argument("--frames", type=int, default=48)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shared-signature", action="store_true",
                   help="give every subject the same gait (ablation)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="dump tracklets and descriptors of one frame directory")
    p.add_argument("frames")
    p.add_argument("out")
    p.add_argument("--camera", default="c0")
    p.add_argument("--detections", help="detection file; keeps tracklets crossing a person track")
    p.add_argument("--n-scales", type=int, default=8)
    p.set_defaults(func=cmd_extract)

    for name, func, hlp in (("train", cmd_train, "fit a model bundle on the training split"),
                            ("eval", cmd_eval, "evaluate on the test split")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        p.set_defaults(func=func)
    sub.choices["train"].add_argument("--model", required=True, help="output model file")
    ev = sub.choices["eval"]
    ev.add_argument("--model", help="trained model file; trains from the config when absent")
    ev.add_argument("--rotate", action="store_true", help="leave-one-trajectory-out over all trajectories")
    ev.add_argument("--csv", help="write per-sequence predictions as CSV")

    p = sub.add_parser("inspect-model", help="summarize a saved model")
    p.add_argument("model")
    p.add_argument("--config-echo", action="store_true")
    p.set_defaults(func=cmd_inspect)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except (ConfigError, ModelFileError, MediaError, ValueError, OSError) as exc:
        print(f"pfm {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
