"""Visual pathway: self-regulated convolutional frame encoder.

Frames flow through a stem convolution and t gated blocks that thread a
hidden-state map alongside the features, each block ending in shuffle
attention. A global average pool and a linear head produce the d_v frame
feature; frames of an utterance are mean-pooled with pairwise summation
so the result does not depend on frame order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from vyang import tensor as T
from vyang import vtf
from vyang.attention import ShuffleAttentionBlock, shuffle_attention_forward
from vyang.glossary import SpeakerTable, append_speaker
from vyang.params import ParameterStore
from vyang.tensor import ShapeError, Tensor


@dataclass(frozen=True)
class VisualConfig:
    height: int = 32
    width: int = 32
    channels: int = 8          # feature-map depth inside the encoder
    blocks: int = 2            # t
    kernel: int = 3
    d_v: int = 64              # output feature dim (paper-scale preset: 2048)
    sa_groups: int = 2
    context_slots: int = 3
    use_shuffle_attention: bool = True

    def __post_init__(self):
        if self.kernel % 2 == 0:
            raise ValueError("kernel must be odd for same-padding blocks")


def load_frames(path, cfg: VisualConfig) -> np.ndarray:
    """Read an (N, 3, H, W) frame stack from a tensor file, clamped to [0,1]."""
    arr = vtf.load_tensor(path)
    if arr.ndim != 4 or arr.shape[1] != 3:
        raise ShapeError(f"frame file {path} has shape {arr.shape}, expected (N, 3, H, W)")
    if arr.shape[2] != cfg.height or arr.shape[3] != cfg.width:
        raise ShapeError(
            f"frame file {path} is {arr.shape[2]}x{arr.shape[3]}, "
            f"config expects {cfg.height}x{cfg.width}"
        )
    return np.clip(arr.astype(np.float64), 0.0, 1.0)


def mean_pairwise(vectors: Sequence[Tensor]) -> Tensor:
    """Mean with balanced pairwise summation: order changes stay < 1e-12."""
    if not vectors:
        raise ValueError("mean_pairwise needs at least one vector")
    items = list(vectors)
    while len(items) > 1:
        merged = []
        for i in range(0, len(items) - 1, 2):
            merged.append(items[i] + items[i + 1])
        if len(items) % 2:
            merged.append(items[-1])
        items = merged
    return items[0] * (1.0 / len(vectors))


class SelfRegulatedEncoder:
    """Stem conv, t gated blocks with a threaded hidden map, pooled head."""

    def __init__(self, store: ParameterStore, cfg: VisualConfig, prefix: str = "visual"):
        self.cfg = cfg
        c, k = cfg.channels, cfg.kernel
        self.pad = k // 2
        self.stem_w = store.conv_kernel(f"{prefix}.stem.w", c, 3, k)
        self.stem_b = store.zeros(f"{prefix}.stem.b", (c,))
        self.block_params = []
        for i in range(cfg.blocks):
            b = f"{prefix}.block{i}"
            self.block_params.append({
                "conv_w": store.conv_kernel(f"{b}.conv.w", c, c, k),
                "conv_b": store.zeros(f"{b}.conv.b", (c,)),
                "gate_w": store.conv_kernel(f"{b}.gate.w", c, c, k),
                "gate_b": store.zeros(f"{b}.gate.b", (c,)),
                "mix_w": store.conv_kernel(f"{b}.mix.w", c, 2 * c, k),
                "mix_b": store.zeros(f"{b}.mix.b", (c,)),
                "attention": ShuffleAttentionBlock(store, f"{b}.sa", c, cfg.sa_groups),
            })
        self.head_w = store.weight(f"{prefix}.head.w", c, cfg.d_v)
        self.head_b = store.zeros(f"{prefix}.head.b", (cfg.d_v,))

    def _conv(self, x: Tensor, w, b) -> Tensor:
        out = T.conv2d(x, w, stride=1, padding=self.pad)
        return out + T.reshape(b.tensor, (out.shape[0], 1, 1))

    def block(self, x: Tensor, h_in: Tensor, params: dict):
        """One self-regulated step: gated update plus hidden-state mixing."""
        if x.shape != h_in.shape:
            raise ShapeError(f"hidden state {h_in.shape} does not match features {x.shape}")
        u = T.relu(self._conv(x, params["conv_w"], params["conv_b"]))
        g = T.sigmoid(self._conv(h_in, params["gate_w"], params["gate_b"]))
        pre = u * g + x
        if self.cfg.use_shuffle_attention:
            y = shuffle_attention_forward(pre, params["attention"])
        else:
            y = pre
        h_out = T.tanh(self._conv(T.concat([u, h_in], axis=0), params["mix_w"], params["mix_b"]))
        return y, h_out

    def encode_frame(self, frame) -> Tensor:
        x = frame if isinstance(frame, Tensor) else T.constant(frame)
        if x.shape != (3, self.cfg.height, self.cfg.width):
            raise ShapeError(
                f"frame shape {x.shape} does not match configured "
                f"(3, {self.cfg.height}, {self.cfg.width})"
            )
        x = self._conv(x, self.stem_w, self.stem_b)
        h = T.constant(np.zeros(x.shape))
        for params in self.block_params:
            x, h = self.block(x, h, params)
        pooled = T.reshape(T.global_avg_pool(x), (self.cfg.channels,))
        return T.relu(T.linear(pooled, self.head_w, self.head_b))


class VisualBranch:
    """Frame encoder plus utterance/context pooling and speaker append."""

    def __init__(self, store: ParameterStore, speakers: SpeakerTable,
                 cfg: Optional[VisualConfig] = None, prefix: str = "visual"):
        self.cfg = cfg or VisualConfig()
        self.speakers = speakers
        self.encoder = SelfRegulatedEncoder(store, self.cfg, prefix=prefix)
        self._frame_cache: dict = {}

    def _resolve(self, frames):
        """Frame stacks arrive as arrays or as tensor-file paths."""
        if isinstance(frames, (str, bytes)) or hasattr(frames, "__fspath__"):
            key = str(frames)
            if key not in self._frame_cache:
                self._frame_cache[key] = load_frames(key, self.cfg)
            return self._frame_cache[key]
        return frames

    @property
    def utterance_dim(self) -> int:
        return self.cfg.d_v + self.speakers.dim

    @property
    def feature_dim(self) -> int:
        return self.utterance_dim * (1 + self.cfg.context_slots)

    def utterance_feature(self, frames, speaker: Optional[str]) -> Tensor:
        stack = list(self._resolve(frames))
        if not stack:
            raise ValueError("utterance needs at least one frame")
        feats = [self.encoder.encode_frame(f) for f in stack]
        return append_speaker(mean_pairwise(feats), self.speakers.encode(speaker))

    def context_feature(self, context: Sequence) -> Tensor:
        """Most recent N turns with frames; zero slots where absent."""
        n = self.cfg.context_slots
        recent = list(context)[-n:] if n else []
        slots: List[Tensor] = []
        for _ in range(n - len(recent)):
            slots.append(T.constant(np.zeros(self.utterance_dim)))
        for turn in recent:
            frames = self._resolve(getattr(turn, "frames", None))
            if frames is None or len(frames) == 0:
                slots.append(T.constant(np.zeros(self.utterance_dim)))
            else:
                slots.append(self.utterance_feature(frames, turn.speaker))
        if not slots:
            return T.constant(np.zeros(0))
        return T.concat(slots, axis=0) if len(slots) > 1 else slots[0]

    def features(self, sample) -> Tensor:
        """V_cat: pooled utterance frames plus N context slots."""
        if sample.frames is None or len(sample.frames) == 0:
            raise ValueError(f"sample {sample.id!r} has no frames")
        utt = self.utterance_feature(sample.frames, sample.speaker)
        if self.cfg.context_slots == 0:
            return utt
        return T.concat([utt, self.context_feature(sample.context)], axis=0)
