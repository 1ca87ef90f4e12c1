"""Lightweight shuffle attention over feature maps and multi-head attention.

The shuffle block partitions a (D, H, W) map into P channel groups, splits
each group into a gated per-channel half and a group-normalized spatial
half, concatenates the halves back, and interleaves groups with a channel
shuffle. Output shape always equals input shape.

Blocks are immutable after construction and their forward passes are pure,
so a trained model can serve concurrent readers.
"""

from __future__ import annotations

from typing import List, Tuple

from vyang import tensor as T
from vyang.tensor import ShapeError, Tensor
from vyang.params import ParameterStore


def _per_channel(vec, channels: int, what: str) -> Tensor:
    t = vec.tensor if hasattr(vec, "tensor") else vec
    if t.shape != (channels,):
        raise ShapeError(f"{what} must have one value per channel ({channels}), got {t.shape}")
    return T.reshape(t, (channels, 1, 1))


def feature_group(x: Tensor, groups: int) -> List[Tuple[Tensor, Tensor]]:
    """Split (D, H, W) into P contiguous groups, each halved along depth."""
    if x.ndim != 3:
        raise ShapeError(f"feature_group expects a 3-D map, got {x.shape}")
    d = x.shape[0]
    if groups < 1 or d % (2 * groups) != 0:
        raise ShapeError(f"depth {d} not divisible by 2x{groups} groups")
    half = d // (2 * groups)
    pairs = []
    for k in range(groups):
        base = k * 2 * half
        pairs.append((x[base : base + half], x[base + half : base + 2 * half]))
    return pairs


def depth_attention(x2: Tensor, v1, b1) -> Tensor:
    """Gate each channel by a sigmoid of its global average."""
    if x2.ndim != 3:
        raise ShapeError(f"depth_attention expects a 3-D map, got {x2.shape}")
    c = x2.shape[0]
    t = T.global_avg_pool(x2)
    scale = T.sigmoid(_per_channel(v1, c, "V1") * t + _per_channel(b1, c, "b1"))
    return scale * x2


def spatial_attention(x2: Tensor, gamma, beta, v2, b2, gn_groups: int = 0) -> Tensor:
    """Gate each position by a sigmoid of its group-normalized value.

    ``gn_groups`` of 0 selects per-channel normalization, the granularity
    the block's reference design uses for this branch.
    """
    if x2.ndim != 3:
        raise ShapeError(f"spatial_attention expects a 3-D map, got {x2.shape}")
    c = x2.shape[0]
    groups = c if gn_groups == 0 else gn_groups
    gamma_t = gamma.tensor if hasattr(gamma, "tensor") else gamma
    beta_t = beta.tensor if hasattr(beta, "tensor") else beta
    normed = T.group_norm(x2, groups, gamma_t, beta_t)
    gate = T.sigmoid(_per_channel(v2, c, "V2") * normed + _per_channel(b2, c, "b2"))
    return gate * x2


class ShuffleAttentionBlock:
    """Per-group gating parameters for the shuffle attention module.

    Each of the P groups owns its own depth-gate (v1, b1), spatial-gate
    (v2, b2), and normalization (gamma, beta) vectors, one value per
    channel of the group's half.
    """

    def __init__(self, store: ParameterStore, prefix: str, channels: int, groups: int):
        if groups < 1 or channels % (2 * groups) != 0:
            raise ShapeError(f"depth {channels} not divisible by 2x{groups} groups")
        self.channels = channels
        self.groups = groups
        half = channels // (2 * groups)
        self.group_params = []
        for k in range(groups):
            g = f"{prefix}.g{k}"
            self.group_params.append({
                "v1": store.zeros(f"{g}.v1", (half,)),
                "b1": store.zeros(f"{g}.b1", (half,)),
                "gamma": store.ones(f"{g}.gamma", (half,)),
                "beta": store.zeros(f"{g}.beta", (half,)),
                "v2": store.zeros(f"{g}.v2", (half,)),
                "b2": store.zeros(f"{g}.b2", (half,)),
            })


def shuffle_attention_forward(x: Tensor, block: ShuffleAttentionBlock) -> Tensor:
    """Apply both attention branches per group, then shuffle channels."""
    if x.ndim != 3 or x.shape[0] != block.channels:
        raise ShapeError(
            f"input {x.shape} does not match block depth {block.channels}"
        )
    outputs = []
    for (x1, x2), p in zip(feature_group(x, block.groups), block.group_params):
        gated = depth_attention(x1, p["v1"], p["b1"])
        spatial = spatial_attention(x2, p["gamma"], p["beta"], p["v2"], p["b2"])
        outputs.append(T.concat([gated, spatial], axis=0))
    merged = T.concat(outputs, axis=0) if len(outputs) > 1 else outputs[0]
    return T.channel_shuffle(merged, block.groups)


def scaled_dot_product_attention(q: Tensor, k: Tensor, v: Tensor,
                                 return_weights: bool = False):
    """softmax(Q Kᵀ / sqrt(d)) V over (n, d) token matrices."""
    if q.ndim != 2 or k.ndim != 2 or v.ndim != 2:
        raise ShapeError(
            f"attention expects 2-D Q/K/V, got {q.shape}, {k.shape}, {v.shape}"
        )
    if q.shape[1] != k.shape[1] or k.shape[0] != v.shape[0]:
        raise ShapeError(
            f"attention shapes incompatible: Q{q.shape} K{k.shape} V{v.shape}"
        )
    d = q.shape[1]
    scores = (q @ k.transpose()) * (1.0 / d**0.5)
    weights = T.softmax(scores, axis=-1)
    out = weights @ v
    return (out, weights) if return_weights else out


class MultiHeadAttentionLayer:
    """h-head self-attention over (n, d_f) tokens, no biases, no positions."""

    def __init__(self, store: ParameterStore, prefix: str, dim: int, heads: int):
        if heads < 1 or dim % heads != 0:
            raise ShapeError(f"model dim {dim} not divisible by {heads} heads")
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.wq = [store.weight(f"{prefix}.h{i}.wq", dim, self.head_dim)
                   for i in range(heads)]
        self.wk = [store.weight(f"{prefix}.h{i}.wk", dim, self.head_dim)
                   for i in range(heads)]
        self.wv = [store.weight(f"{prefix}.h{i}.wv", dim, self.head_dim)
                   for i in range(heads)]
        self.wo = store.weight(f"{prefix}.wo", dim, dim)

    def __call__(self, tokens: Tensor) -> Tensor:
        return multi_head_attention(tokens, self)


def multi_head_attention(tokens: Tensor, layer: MultiHeadAttentionLayer) -> Tensor:
    if tokens.ndim != 2 or tokens.shape[1] != layer.dim:
        raise ShapeError(
            f"tokens {tokens.shape} do not match attention dim {layer.dim}"
        )
    heads = []
    for wq, wk, wv in zip(layer.wq, layer.wk, layer.wv):
        q = tokens @ wq.tensor
        k = tokens @ wk.tensor
        v = tokens @ wv.tensor
        heads.append(scaled_dot_product_attention(q, k, v))
    merged = T.concat(heads, axis=1) if len(heads) > 1 else heads[0]
    return merged @ layer.wo.tensor
