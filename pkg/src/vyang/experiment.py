"""Experiment driver: split, train per fold, aggregate, and write artifacts.

A run covers one or more modality masks under one model variant. Output
files are fully deterministic for fixed inputs: floats use fixed-width
formatting, rows follow the canonical mask order, and nothing records
wall-clock time.

Artifacts under the output directory:
  metrics.csv   one row per (mask, fold) plus a mean row per mask
  table.txt     aligned per-mask summary in canonical mask order
  curves.csv    per-epoch loss/metrics for every mask and fold
  checkpoints/  weights plus vocabulary/speaker sidecars per run
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from vyang.data import Sample
from vyang.fusion import ModalityMask, TrainConfig
from vyang.metrics import MetricsReport, aggregate_folds, macro_metrics
from vyang.model import ModelConfig, SarcasmModel, evaluate, train
from vyang.splits import (cross_dataset_split, speaker_dependent_splits,
                          speaker_independent_split)

MASK_ORDER = ("g", "v", "a", "gv", "va", "ga", "gva")

SPLIT_KINDS = ("kfold", "independent", "cross")


class ExperimentError(RuntimeError):
    """A run failed; the message carries (mask, variant, fold) context."""


@dataclass(frozen=True)
class ExperimentConfig:
    split: str = "kfold"
    folds: int = 5
    stratify: bool = False
    masks: Tuple[str, ...] = ("gva",)
    macro: bool = False

    def __post_init__(self):
        if self.split not in SPLIT_KINDS:
            raise ValueError(f"unknown split {self.split!r}; use one of {SPLIT_KINDS}")
        canonical = []
        for letters in self.masks:
            mask = ModalityMask.from_letters(letters)
            if mask.letters not in canonical:
                canonical.append(mask.letters)
        ordered = tuple(m for m in MASK_ORDER if m in canonical)
        object.__setattr__(self, "masks", ordered)


@dataclass
class RunRow:
    modalities: str
    variant: str
    fold: str
    report: MetricsReport
    loss: float
    macro: Tuple[float, float, float]
    curves: List[dict]


@dataclass
class ExperimentResult:
    rows: List[RunRow]
    summary: Dict[str, MetricsReport]
    macro_summary: Dict[str, Tuple[float, float, float]]
    out_dir: Optional[Path]

    def summary_row(self, letters: str) -> MetricsReport:
        return self.summary[ModalityMask.from_letters(letters).letters]


def make_folds(samples: Sequence[Sample], cfg: ExperimentConfig, seed: int,
               test_samples: Optional[Sequence[Sample]] = None):
    """(name, train, val, test) splits for the configured protocol."""
    if cfg.split == "kfold":
        pairs = speaker_dependent_splits(samples, k=cfg.folds, seed=seed,
                                         stratify=cfg.stratify)
        return [(f"fold{i + 1}", tr, None, te) for i, (tr, te) in enumerate(pairs)]
    if cfg.split == "independent":
        tr, te = speaker_independent_split(samples)
        return [("heldout", tr, None, te)]
    if test_samples is None:
        raise ValueError("cross split needs a second corpus (test_samples)")
    tr, val, te = cross_dataset_split(samples, test_samples, seed=seed)
    return [("cross", tr, val, te)]


def _run_one(model_cfg: ModelConfig, mask: ModalityMask, train_cfg: TrainConfig,
             fold_index: int, fold_name: str, train_samples, val_samples,
             test_samples, log=None) -> Tuple[SarcasmModel, RunRow]:
    run_seed = train_cfg.seed + fold_index
    cfg = dataclasses.replace(model_cfg, seed=run_seed)
    tcfg = dataclasses.replace(train_cfg, seed=run_seed)
    model = SarcasmModel.build(cfg, mask, train_samples)
    curves = train(model, train_samples, tcfg, val_samples=val_samples, log=log)
    report, loss = evaluate(model, test_samples)
    preds = model.predict(test_samples)
    macro = macro_metrics(preds, [s.label for s in test_samples])
    row = RunRow(modalities=mask.letters, variant=cfg.variant, fold=fold_name,
                 report=report, loss=loss, macro=macro, curves=curves)
    return model, row


def run_experiment(samples: Sequence[Sample], model_cfg: ModelConfig,
                   train_cfg: TrainConfig, exp_cfg: ExperimentConfig,
                   out_dir=None, test_samples: Optional[Sequence[Sample]] = None,
                   log=None) -> ExperimentResult:
    """Train and evaluate every (mask, fold) pair; optionally write artifacts."""
    folds = make_folds(samples, exp_cfg, train_cfg.seed, test_samples)
    out_path = Path(out_dir) if out_dir is not None else None
    rows: List[RunRow] = []
    summary: Dict[str, MetricsReport] = {}
    macro_summary: Dict[str, Tuple[float, float, float]] = {}
    for letters in exp_cfg.masks:
        mask = ModalityMask.from_letters(letters)
        mask_rows: List[RunRow] = []
        for i, (fold_name, tr, val, te) in enumerate(folds):
            try:
                model, row = _run_one(model_cfg, mask, train_cfg, i, fold_name,
                                      tr, val, te, log=log)
            except Exception as exc:
                raise ExperimentError(
                    f"mask {letters!r} variant {model_cfg.variant!r} "
                    f"{fold_name}: {exc}"
                ) from exc
            mask_rows.append(row)
            if out_path is not None:
                _save_run(out_path, model, row)
        rows.extend(mask_rows)
        summary[letters] = aggregate_folds([r.report for r in mask_rows])
        macro_summary[letters] = tuple(
            float(np.mean([r.macro[j] for r in mask_rows])) for j in range(3)
        )
    result = ExperimentResult(rows=rows, summary=summary,
                              macro_summary=macro_summary, out_dir=out_path)
    if out_path is not None:
        write_metrics_csv(out_path / "metrics.csv", result)
        write_table(out_path / "table.txt", result, macro=exp_cfg.macro)
        write_curves_csv(out_path / "curves.csv", result)
    return result


def _save_run(out_path: Path, model: SarcasmModel, row: RunRow) -> None:
    ckpt_dir = out_path / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    tag = f"{row.modalities}-{row.variant}-{row.fold}"
    model.save(ckpt_dir / f"{tag}.ckpt")
    if model.glossary is not None:
        model.glossary.vocab.save(ckpt_dir / f"{tag}.vocab.tsv")
    model.speakers.save(ckpt_dir / f"{tag}.speakers.tsv")


METRIC_COLUMNS = ("accuracy", "precision", "recall", "f1")


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def write_metrics_csv(path: Path, result: ExperimentResult) -> None:
    lines = ["modalities,variant,fold,accuracy,precision,recall,f1,"
             "macro_precision,macro_recall,macro_f1,tp,fp,tn,fn,loss"]
    by_mask: Dict[str, List[RunRow]] = {}
    for row in result.rows:
        by_mask.setdefault(row.modalities, []).append(row)
    for letters, mask_rows in by_mask.items():
        for r in mask_rows:
            rep = r.report
            lines.append(",".join([
                letters, r.variant, r.fold,
                _fmt(rep.accuracy), _fmt(rep.precision), _fmt(rep.recall),
                _fmt(rep.f1), _fmt(r.macro[0]), _fmt(r.macro[1]), _fmt(r.macro[2]),
                str(rep.tp), str(rep.fp), str(rep.tn), str(rep.fn), _fmt(r.loss),
            ]))
        agg = result.summary[letters]
        magg = result.macro_summary[letters]
        mean_loss = float(np.mean([r.loss for r in mask_rows]))
        lines.append(",".join([
            letters, mask_rows[0].variant, "mean",
            _fmt(agg.accuracy), _fmt(agg.precision), _fmt(agg.recall),
            _fmt(agg.f1), _fmt(magg[0]), _fmt(magg[1]), _fmt(magg[2]),
            str(agg.tp), str(agg.fp), str(agg.tn), str(agg.fn), _fmt(mean_loss),
        ]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_table(path: Path, result: ExperimentResult, macro: bool = False) -> None:
    headers = ["modalities", "accuracy", "precision", "recall", "f1"]
    if macro:
        headers += ["macro_p", "macro_r", "macro_f1"]
    table = [headers]
    for letters in MASK_ORDER:
        if letters not in result.summary:
            continue
        rep = result.summary[letters]
        row = [letters, _fmt(rep.accuracy), _fmt(rep.precision),
               _fmt(rep.recall), _fmt(rep.f1)]
        if macro:
            row += [_fmt(v) for v in result.macro_summary[letters]]
        table.append(row)
    widths = [max(len(r[c]) for r in table) for c in range(len(headers))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
             for row in table]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_curves_csv(path: Path, result: ExperimentResult) -> None:
    lines = ["modalities,variant,fold,epoch,split,loss,accuracy,precision,recall,f1"]
    for row in result.rows:
        for rec in row.curves:
            lines.append(",".join([
                row.modalities, row.variant, row.fold, str(rec["epoch"]),
                rec["split"], _fmt(rec["loss"]), _fmt(rec["accuracy"]),
                _fmt(rec["precision"]), _fmt(rec["recall"]), _fmt(rec["f1"]),
            ]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
