"""Command-line entry points for the sarcasm-recognition pipeline.

Subcommands: train, evaluate, split, ablate, extract-features, synth,
report. Every run is seeded; repeating a command with identical inputs
reproduces its output files byte for byte.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from vyang import synth as synth_mod
from vyang import vtf
from vyang.acoustic import AcousticBranch, load_waveform, utterance_feature_vector
from vyang.data import load_manifest
from vyang.experiment import (ExperimentConfig, MASK_ORDER, run_experiment,
                              write_table)
from vyang.fusion import ModalityMask, TrainConfig
from vyang.glossary import SpeakerTable, Vocabulary
from vyang.model import VARIANTS, ModelConfig, SarcasmModel, evaluate
from vyang.visual import VisualConfig

PRESETS = ("desk", "tiny")


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--modalities", default="g,v,a",
                   help="comma-separated subset of g,v,a (default all three)")
    p.add_argument("--variant", default="full", choices=VARIANTS)
    p.add_argument("--preset", default="desk", choices=PRESETS,
                   help="model size: desk defaults or tiny for quick runs")
    p.add_argument("--context-slots", type=int, default=None,
                   help="dialogue turns of context (default: preset value)")


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--dropout", type=float, default=0.4)


def _add_split_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--split", default="kfold",
                   choices=("kfold", "independent", "cross"))
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--stratify", action="store_true",
                   help="balance labels across k-fold test folds")
    p.add_argument("--test-manifest", default=None,
                   help="second corpus manifest (cross split only)")


def _infer_frame_shape(samples):
    for s in samples:
        if s.frames is not None:
            shape = vtf.read_header(s.frames)
            if len(shape) == 4:
                return shape[2], shape[3]
    return None


def _model_config(args, samples) -> ModelConfig:
    if args.preset == "tiny":
        visual = VisualConfig(height=12, width=12, channels=6, blocks=1,
                              d_v=16, sa_groups=1, context_slots=1)
        cfg = ModelConfig(d_g=32, d_h=16, tau_heads=2, context_slots=1,
                          visual=visual, d_f=16, fusion_heads=2,
                          variant=args.variant, seed=args.seed)
    else:
        cfg = ModelConfig(variant=args.variant, seed=args.seed)
    mask = ModalityMask.from_letters(args.modalities)
    if mask.use_v:
        shape = _infer_frame_shape(samples)
        if shape is not None and shape != (cfg.visual.height, cfg.visual.width):
            visual = dataclasses.replace(cfg.visual, height=shape[0], width=shape[1])
            cfg = dataclasses.replace(cfg, visual=visual)
    if args.context_slots is not None:
        cfg = dataclasses.replace(cfg, context_slots=args.context_slots)
    return cfg


def _train_config(args) -> TrainConfig:
    return TrainConfig(learning_rate=args.lr, batch_size=args.batch_size,
                       epochs=args.epochs, dropout=args.dropout, seed=args.seed)


def _report_line(name: str, report, loss=None) -> str:
    tail = f"  loss={loss:.4f}" if loss is not None else ""
    return (f"{name}: accuracy={report.accuracy:.2f} precision={report.precision:.2f} "
            f"recall={report.recall:.2f} f1={report.f1:.2f}{tail}")


def cmd_train(args) -> int:
    samples = load_manifest(args.manifest)
    test_samples = (load_manifest(args.test_manifest)
                    if args.test_manifest else None)
    exp_cfg = ExperimentConfig(split=args.split, folds=args.folds,
                               stratify=args.stratify,
                               masks=(args.modalities,), macro=args.macro)
    model_cfg = _model_config(args, samples)
    result = run_experiment(samples, model_cfg, _train_config(args), exp_cfg,
                            out_dir=args.out, test_samples=test_samples)
    print((Path(args.out) / "table.txt").read_text(), end="")
    return 0


def cmd_ablate(args) -> int:
    samples = load_manifest(args.manifest)
    test_samples = (load_manifest(args.test_manifest)
                    if args.test_manifest else None)
    out_root = Path(args.out)
    lines = ["variant,modalities,accuracy,precision,recall,f1"]
    for variant in VARIANTS:
        sub = argparse.Namespace(**{**vars(args), "variant": variant})
        exp_cfg = ExperimentConfig(split=args.split, folds=args.folds,
                                   stratify=args.stratify,
                                   masks=(args.modalities,), macro=args.macro)
        model_cfg = _model_config(sub, samples)
        result = run_experiment(samples, model_cfg, _train_config(args), exp_cfg,
                                out_dir=out_root / variant,
                                test_samples=test_samples)
        for letters in exp_cfg.masks:
            rep = result.summary[letters]
            lines.append(f"{variant},{letters},{rep.accuracy:.4f},"
                         f"{rep.precision:.4f},{rep.recall:.4f},{rep.f1:.4f}")
            print(_report_line(f"{variant} [{letters}]", rep))
    (out_root / "variants.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0


def cmd_evaluate(args) -> int:
    samples = load_manifest(args.manifest)
    ckpt = Path(args.checkpoint)
    stem = ckpt.with_suffix("")
    mask = ModalityMask.from_letters(args.modalities)
    vocab_path = Path(f"{stem}.vocab.tsv")
    vocab = Vocabulary.load(vocab_path) if vocab_path.exists() else None
    if mask.use_g and vocab is None:
        print(f"error: no vocabulary sidecar at {vocab_path}", file=sys.stderr)
        return 2
    speakers = SpeakerTable.load(f"{stem}.speakers.tsv")
    model_cfg = _model_config(args, samples)
    model = SarcasmModel(model_cfg, mask, vocab=vocab, speakers=speakers)
    model.load(ckpt)
    report, loss = evaluate(model, samples)
    print(_report_line(f"evaluate [{mask.letters}]", report, loss))
    return 0


def cmd_split(args) -> int:
    from vyang.experiment import make_folds

    samples = load_manifest(args.manifest, check_files=False)
    test_samples = (load_manifest(args.test_manifest, check_files=False)
                    if args.test_manifest else None)
    exp_cfg = ExperimentConfig(split=args.split, folds=args.folds,
                               stratify=args.stratify)
    folds = make_folds(samples, exp_cfg, args.seed, test_samples)
    lines = ["fold,phase,id"]
    for name, train, val, test in folds:
        parts = [("train", train), ("test", test)]
        if val is not None:
            parts.insert(1, ("val", val))
        counts = " ".join(f"{phase}={len(group)}" for phase, group in parts)
        print(f"{name}: {counts}")
        for phase, group in parts:
            lines.extend(f"{name},{phase},{s.id}" for s in group)
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"wrote {args.out}")
    return 0


def cmd_extract_features(args) -> int:
    samples = load_manifest(args.manifest)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    branch = AcousticBranch(SpeakerTable())
    for s in samples:
        if s.audio is None:
            continue
        vec = utterance_feature_vector(load_waveform(s.audio), branch.cfg)
        vtf.save_tensor(out_dir / f"{s.id}.vtf", vec)
    print(f"wrote {len([s for s in samples if s.audio])} vectors "
          f"({branch.cfg.d_a} dims) to {out_dir}")
    return 0


def cmd_synth(args) -> int:
    spec = synth_mod.SignalSpec(
        glossary=args.g_reliability, visual=args.v_reliability,
        acoustic=args.a_reliability, sentence_length=args.sentence_length,
        frame_size=args.frame_size, marker_tail_gap=args.marker_tail_gap,
        filler_pool=args.filler_pool,
    )
    manifest = synth_mod.generate_synthetic_dataset(args.out, n=args.n,
                                                    seed=args.seed, spec=spec)
    samples = load_manifest(manifest)
    pos = sum(s.label for s in samples)
    print(f"wrote {manifest} ({len(samples)} samples, {pos} positive)")
    return 0


def cmd_report(args) -> int:
    from vyang.report import render_report

    written = render_report(args.out)
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vyang",
        description="multimodal sarcasm recognition: train, evaluate, and inspect",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train and evaluate under a split protocol")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="directory for run artifacts")
    p.add_argument("--macro", action="store_true",
                   help="include macro-averaged metrics in the table")
    _add_model_flags(p)
    _add_train_flags(p)
    _add_split_flags(p)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("ablate", help="run every model variant on one mask")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--macro", action="store_true")
    _add_model_flags(p)
    _add_train_flags(p)
    _add_split_flags(p)
    p.set_defaults(handler=cmd_ablate)

    p = sub.add_parser("evaluate", help="score a manifest with a saved checkpoint")
    p.add_argument("--manifest", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_model_flags(p)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("split", help="print or save a split of a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="optional CSV of fold/phase/id rows")
    _add_split_flags(p)
    p.set_defaults(handler=cmd_split)

    p = sub.add_parser("extract-features",
                       help="write per-sample acoustic feature vectors")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_extract_features)

    p = sub.add_parser("synth", help="generate a planted-signal synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--g-reliability", type=float, default=1.0)
    p.add_argument("--v-reliability", type=float, default=1.0)
    p.add_argument("--a-reliability", type=float, default=1.0)
    p.add_argument("--sentence-length", type=int, default=18)
    p.add_argument("--frame-size", type=int, default=12)
    p.add_argument("--marker-tail-gap", type=int, default=6,
                   help="keep the marker at least this far from the end")
    p.add_argument("--filler-pool", type=int, default=0,
                   help="filler vocabulary size, 0 for all")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("report", help="render figures from a run directory")
    p.add_argument("--out", required=True, help="run directory holding the CSVs")
    p.set_defaults(handler=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
