"""Cross-modal fusion head: per-modality attention, fusion, classification.

Each modality's concatenated feature vector is viewed as segment tokens
(utterance block plus context slots), projected to a shared width d_f,
self-attended, and mean-pooled into L_x. Active L_x vectors are fused the
same way into GVA, which a linear-softmax classifier turns into the
two-class probability (class 1 = sarcastic).

Two layout variants exist beside the default:
  flat mode      one token per modality (the whole vector projected at once)
  no-attention   flat layout with every attention stage bypassed, leaving
                 direct concatenation into the existing linears
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from vyang import tensor as T
from vyang.attention import MultiHeadAttentionLayer
from vyang.params import ParameterStore
from vyang.tensor import ShapeError, Tensor

LOG_CLAMP = 1e-12

MODALITIES = ("g", "v", "a")


@dataclass(frozen=True)
class ModalityMask:
    use_g: bool = True
    use_v: bool = True
    use_a: bool = True

    def __post_init__(self):
        if not (self.use_g or self.use_v or self.use_a):
            raise ValueError("at least one modality must be active")

    @classmethod
    def from_letters(cls, letters: str) -> "ModalityMask":
        """Parse "g,v,a", "g v", or the compact "gva" form."""
        parts = set()
        for chunk in letters.replace(",", " ").split():
            parts.update(chunk.lower())
        unknown = parts - set(MODALITIES)
        if unknown:
            raise ValueError(f"unknown modalities {sorted(unknown)}; use g, v, a")
        return cls("g" in parts, "v" in parts, "a" in parts)

    @property
    def letters(self) -> str:
        return "".join(m for m in MODALITIES if getattr(self, f"use_{m}"))

    @property
    def count(self) -> int:
        return len(self.letters)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 32
    epochs: int = 200
    dropout: float = 0.4
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size <= 0 or self.epochs < 0:
            raise ValueError("learning rate and batch size must be positive, epochs >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")


class FusionHead:
    """Projection, attention, and classifier parameters over masked modalities.

    ``segments`` maps each active modality letter to (token count, token
    dim); the shared projection for a modality maps token dim to d_f.
    """

    def __init__(self, store: ParameterStore, mask: ModalityMask,
                 segments: Dict[str, Tuple[int, int]], d_f: int = 64,
                 heads: int = 4, token_mode: bool = True,
                 use_attention: bool = True, prefix: str = "fusion"):
        self.mask = mask
        self.d_f = d_f
        self.token_mode = token_mode and use_attention
        self.use_attention = use_attention
        self.segments = {m: segments[m] for m in mask.letters}
        self.proj: Dict[str, tuple] = {}
        self.heads: Dict[str, MultiHeadAttentionLayer] = {}
        for m in mask.letters:
            count, dim = self.segments[m]
            in_dim = dim if self.token_mode else count * dim
            self.proj[m] = (
                store.weight(f"{prefix}.{m}.w", in_dim, d_f),
                store.zeros(f"{prefix}.{m}.b", (d_f,)),
            )
            if use_attention:
                self.heads[m] = MultiHeadAttentionLayer(store, f"{prefix}.{m}.mha", d_f, heads)
        fuse_in = d_f if self.token_mode else mask.count * d_f
        self.fuse_w = store.weight(f"{prefix}.fuse.w", fuse_in, d_f)
        self.fuse_b = store.zeros(f"{prefix}.fuse.b", (d_f,))
        if use_attention:
            self.fuse_mha = MultiHeadAttentionLayer(store, f"{prefix}.fuse.mha", d_f, heads)
        self.cls_w = store.weight(f"{prefix}.cls.w", d_f, 2)
        self.cls_b = store.zeros(f"{prefix}.cls.b", (2,))

    def modality_head(self, x_cat: Tensor, which: str) -> Tensor:
        """L_x for one modality's concatenated feature vector."""
        if which not in self.segments:
            raise ValueError(f"modality {which!r} is not active in this head")
        count, dim = self.segments[which]
        if x_cat.shape != (count * dim,):
            raise ShapeError(
                f"modality {which!r} expects {count * dim} dims "
                f"({count} segments of {dim}), got {x_cat.shape}"
            )
        w, b = self.proj[which]
        if not self.use_attention:
            return T.linear(x_cat, w, b)
        if not self.token_mode:
            projected = T.reshape(T.linear(x_cat, w, b), (1, self.d_f))
            return T.reshape(self.heads[which](projected), (self.d_f,))
        tokens = T.linear(T.reshape(x_cat, (count, dim)), w, b)
        attended = self.heads[which](tokens)
        return T.reshape(T.mean(attended, axis=0), (self.d_f,))

    def fuse(self, features: Dict[str, Tensor]) -> Tensor:
        """GVA from the active modality features."""
        letters = self.mask.letters
        if sorted(features) != sorted(letters):
            raise ValueError(
                f"fuse needs exactly the active modalities {list(letters)}, "
                f"got {sorted(features)}"
            )
        ordered = [features[m] for m in letters]
        if not self.use_attention:
            flat = T.concat(ordered, axis=0) if len(ordered) > 1 else ordered[0]
            return T.linear(flat, self.fuse_w, self.fuse_b)
        if not self.token_mode:
            flat = T.concat(ordered, axis=0) if len(ordered) > 1 else ordered[0]
            projected = T.reshape(T.linear(flat, self.fuse_w, self.fuse_b), (1, self.d_f))
            return T.reshape(self.fuse_mha(projected), (self.d_f,))
        tokens = [T.reshape(f, (1, self.d_f)) for f in ordered]
        stacked = T.concat(tokens, axis=0) if len(tokens) > 1 else tokens[0]
        projected = T.linear(stacked, self.fuse_w, self.fuse_b)
        attended = self.fuse_mha(projected)
        return T.reshape(T.mean(attended, axis=0), (self.d_f,))

    def classify(self, gva: Tensor) -> Tensor:
        """Two-class probabilities; index 1 is the sarcastic class."""
        logits = T.linear(gva, self.cls_w, self.cls_b)
        return T.softmax(logits, axis=-1)


def cross_entropy(probabilities: Tensor, label: int) -> Tensor:
    """-log p[label], with the log input floored for numerical safety."""
    if label not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {label}")
    p = probabilities[label]
    return T.neg(T.log(T.clamp_min(p, LOG_CLAMP)))
