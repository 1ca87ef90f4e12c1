"""The assembled sarcasm recognizer and its training/evaluation loops.

A model owns only the branches its modality mask activates; a masked-out
branch is neither built nor evaluated. Training is single-threaded and
fully seeded: batch order, dropout masks, and parameter initialization
all derive from the configured seed, so identical inputs give identical
curves and checkpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional, Sequence

import numpy as np

from vyang import tensor as T
from vyang import vtf
from vyang.acoustic import AcousticBranch, AcousticConfig
from vyang.data import Sample
from vyang.fusion import FusionHead, ModalityMask, TrainConfig, cross_entropy
from vyang.glossary import GlossaryBranch, SpeakerTable, Vocabulary
from vyang.metrics import MetricsReport, compute_metrics
from vyang.params import Adam, ParameterStore, _rng_for
from vyang.tensor import Tensor
from vyang.visual import VisualBranch, VisualConfig

VARIANTS = ("full", "no-tokenizer-attn", "no-depth-attn", "no-mha")


@dataclass(frozen=True)
class ModelConfig:
    d_g: int = 300
    d_h: int = 64
    tau_heads: int = 4
    context_slots: int = 3
    visual: VisualConfig = field(default_factory=VisualConfig)
    acoustic: AcousticConfig = field(default_factory=AcousticConfig)
    acoustic_dim: int = 0      # nonzero when features arrive precomputed
    d_f: int = 64
    fusion_heads: int = 4
    token_fusion: bool = True
    variant: str = "full"
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; use one of {VARIANTS}")
        if self.visual.context_slots != self.context_slots:
            object.__setattr__(self, "visual",
                               VisualConfig(**{**asdict(self.visual),
                                               "context_slots": self.context_slots}))
        if self.variant == "no-depth-attn" and self.visual.use_shuffle_attention:
            object.__setattr__(self, "visual",
                               VisualConfig(**{**asdict(self.visual),
                                               "use_shuffle_attention": False}))


class SarcasmModel:
    """Branches plus fusion head for one modality mask and variant."""

    def __init__(self, cfg: ModelConfig, mask: ModalityMask,
                 vocab: Optional[Vocabulary] = None,
                 speakers: Optional[SpeakerTable] = None):
        self.cfg = cfg
        self.mask = mask
        self.speakers = speakers if speakers is not None else SpeakerTable()
        self.store = ParameterStore(cfg.seed)
        self.glossary: Optional[GlossaryBranch] = None
        self.visual: Optional[VisualBranch] = None
        self.acoustic: Optional[AcousticBranch] = None
        segments: Dict[str, tuple] = {}
        if mask.use_g:
            if vocab is None:
                raise ValueError("glossary modality requires a vocabulary")
            self.glossary = GlossaryBranch(
                self.store, vocab, self.speakers, d_g=cfg.d_g, d_h=cfg.d_h,
                heads=cfg.tau_heads, context_slots=cfg.context_slots,
                use_tokenizer_attention=(cfg.variant != "no-tokenizer-attn"),
            )
            segments["g"] = (1 + cfg.context_slots, self.glossary.utterance_dim)
        if mask.use_v:
            self.visual = VisualBranch(self.store, self.speakers, cfg=cfg.visual)
            segments["v"] = (1 + cfg.context_slots, self.visual.utterance_dim)
        if mask.use_a:
            self.acoustic = AcousticBranch(self.speakers, cfg.acoustic)
            d_a = cfg.acoustic_dim if cfg.acoustic_dim else cfg.acoustic.d_a
            segments["a"] = (1, d_a + self.speakers.dim)
        self.head = FusionHead(
            self.store, mask, segments, d_f=cfg.d_f, heads=cfg.fusion_heads,
            token_mode=cfg.token_fusion, use_attention=(cfg.variant != "no-mha"),
        )

    @classmethod
    def build(cls, cfg: ModelConfig, mask: ModalityMask,
              train_samples: Sequence[Sample]) -> "SarcasmModel":
        """Fit vocabulary and speaker table on the training set, then build."""
        vocab = None
        if mask.use_g:
            texts = []
            for s in train_samples:
                if s.text is not None:
                    texts.append(s.text)
                texts.extend(t.text for t in s.context if t.text is not None)
            vocab = Vocabulary.from_texts(texts)
        names = [s.speaker for s in train_samples if s.speaker is not None]
        for s in train_samples:
            names.extend(t.speaker for t in s.context if t.speaker is not None)
        return cls(cfg, mask, vocab=vocab, speakers=SpeakerTable(names))

    def branch_features(self, sample: Sample) -> Dict[str, Tensor]:
        feats: Dict[str, Tensor] = {}
        if self.mask.use_g:
            feats["g"] = self.glossary.features(sample)
        if self.mask.use_v:
            feats["v"] = self.visual.features(sample)
        if self.mask.use_a:
            feats["a"] = self.acoustic.features(sample)
        return feats

    def forward(self, sample: Sample, train: bool = False, dropout: float = 0.0,
                rng: Optional[np.random.Generator] = None) -> Tensor:
        """Per-sample class probabilities (index 1 = sarcastic)."""
        feats = self.branch_features(sample)
        pooled = {
            m: self.head.modality_head(feats[m], m) for m in self.mask.letters
        }
        if train and dropout > 0:
            pooled = {m: T.dropout(v, dropout, True, rng) for m, v in pooled.items()}
        gva = self.head.fuse(pooled)
        if train and dropout > 0:
            gva = T.dropout(gva, dropout, True, rng)
        return self.head.classify(gva)

    def predict(self, samples: Sequence[Sample]) -> List[int]:
        with T.no_grad():
            return [int(np.argmax(self.forward(s).data)) for s in samples]

    def state_arrays(self) -> Dict[str, np.ndarray]:
        return self.store.state_arrays()

    def save(self, path) -> None:
        vtf.save_checkpoint(path, self.state_arrays())

    def load(self, path) -> None:
        self.store.load_state_arrays(vtf.load_checkpoint(path))


def _epoch_metrics(preds: List[int], labels: List[int]) -> MetricsReport:
    return compute_metrics(preds, labels)


def evaluate(model: SarcasmModel, samples: Sequence[Sample]):
    """(report, mean loss) on a frozen model."""
    if not samples:
        raise ValueError("cannot evaluate an empty sample list")
    preds, losses = [], []
    with T.no_grad():
        for s in samples:
            probs = model.forward(s)
            preds.append(int(np.argmax(probs.data)))
            losses.append(cross_entropy(probs, s.label).item())
    report = compute_metrics(preds, [s.label for s in samples])
    return report, float(np.mean(losses))


def train(model: SarcasmModel, samples: Sequence[Sample], config: TrainConfig,
          val_samples: Optional[Sequence[Sample]] = None,
          log: Optional[callable] = None) -> List[dict]:
    """Seeded mini-batch training; returns per-epoch curve records."""
    if not samples:
        raise ValueError("cannot train on an empty sample list")
    params = list(model.store)
    opt = Adam(params, lr=config.learning_rate)
    shuffle_rng = _rng_for(config.seed, "batch-order")
    dropout_rng = _rng_for(config.seed, "dropout")
    curves: List[dict] = []
    n = len(samples)
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n)
        epoch_losses: List[float] = []
        preds: List[int] = []
        labels: List[int] = []
        for start in range(0, n, config.batch_size):
            batch = [samples[i] for i in order[start : start + config.batch_size]]
            opt.zero_grad()
            terms = []
            for s in batch:
                probs = model.forward(s, train=True, dropout=config.dropout,
                                      rng=dropout_rng)
                terms.append(cross_entropy(probs, s.label))
                preds.append(int(np.argmax(probs.data)))
                labels.append(s.label)
            loss = terms[0] if len(terms) == 1 else T.concat(
                [t.reshape(1) for t in terms], axis=0
            ).mean()
            loss.backward(params=params)
            opt.step()
            epoch_losses.append(loss.item())
        report = _epoch_metrics(preds, labels)
        row = {
            "epoch": epoch, "split": "train",
            "loss": float(np.mean(epoch_losses)),
            "accuracy": report.accuracy, "precision": report.precision,
            "recall": report.recall, "f1": report.f1,
        }
        curves.append(row)
        if val_samples:
            val_report, val_loss = evaluate(model, val_samples)
            curves.append({
                "epoch": epoch, "split": "val", "loss": val_loss,
                "accuracy": val_report.accuracy, "precision": val_report.precision,
                "recall": val_report.recall, "f1": val_report.f1,
            })
        if log is not None:
            log(row)
    return curves
