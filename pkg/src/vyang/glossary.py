"""Text pathway: tokenize, embed, contextualize, recurrently encode.

An utterance is tokenized into lowercase word and punctuation tokens,
embedded, passed through one residual self-attention layer (the
"attentional tokenizer" stage), then summarized by a bidirectional tanh
recurrence. The utterance feature is the hidden state at the final word
position, both directions concatenated, with the speaker's one-hot
appended. Context turns get the same treatment into N fixed slots.
"""

from __future__ import annotations

import re
from typing import Dict, List, Optional, Sequence

import numpy as np

from vyang import tensor as T
from vyang.attention import MultiHeadAttentionLayer
from vyang.params import ParameterStore
from vyang.tensor import Tensor

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"


def tokenize(text: str) -> List[str]:
    """Lowercase word/punctuation tokens; empty text yields the unknown token."""
    tokens = _TOKEN_RE.findall(text.lower())
    return tokens if tokens else [UNK_TOKEN]


class Vocabulary:
    """Token to dense id map with reserved PAD=0 and UNK=1 entries.

    Ids are assigned in sorted token order, so the same corpus always
    produces the same table regardless of sample order.
    """

    PAD = 0
    UNK = 1

    def __init__(self, tokens: Sequence[str] = ()):
        self.token_to_id: Dict[str, int] = {PAD_TOKEN: self.PAD, UNK_TOKEN: self.UNK}
        for tok in sorted(set(tokens) - {PAD_TOKEN, UNK_TOKEN}):
            self.token_to_id[tok] = len(self.token_to_id)

    @classmethod
    def from_texts(cls, texts: Sequence[str]) -> "Vocabulary":
        seen = set()
        for text in texts:
            seen.update(tokenize(text))
        return cls(sorted(seen))

    def encode(self, tokens: Sequence[str]) -> List[int]:
        return [self.token_to_id.get(tok, self.UNK) for tok in tokens]

    def __len__(self) -> int:
        return len(self.token_to_id)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def save(self, path) -> None:
        items = sorted(self.token_to_id.items(), key=lambda kv: kv[1])
        with open(path, "w", encoding="utf-8") as fh:
            for tok, idx in items:
                fh.write(f"{tok}\t{idx}\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        vocab = cls.__new__(cls)
        vocab.token_to_id = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                tok, idx = line.rstrip("\n").split("\t")
                vocab.token_to_id[tok] = int(idx)
        ids = sorted(vocab.token_to_id.values())
        if ids != list(range(len(ids))) or vocab.token_to_id.get(PAD_TOKEN) != cls.PAD:
            raise ValueError(f"vocabulary file {path} is not a dense id table")
        return vocab


class SpeakerTable:
    """One-hot speaker encoding over known names plus an unknown slot.

    ``encode(None)`` returns all zeros: a missing speaker carries no
    information but keeps feature dimensions stable.
    """

    UNKNOWN = "<unknown>"

    def __init__(self, speakers: Sequence[str] = ()):
        names = sorted(set(speakers) - {self.UNKNOWN})
        self.index: Dict[str, int] = {name: i for i, name in enumerate(names)}
        self.dim = len(names) + 1

    def encode(self, speaker: Optional[str]) -> np.ndarray:
        hot = np.zeros(self.dim)
        if speaker is None:
            return hot
        hot[self.index.get(speaker, self.dim - 1)] = 1.0
        return hot

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for name in sorted(self.index, key=self.index.get):
                fh.write(f"{name}\t{self.index[name]}\n")
            fh.write(f"{self.UNKNOWN}\t{self.dim - 1}\n")

    @classmethod
    def load(cls, path) -> "SpeakerTable":
        table = cls.__new__(cls)
        table.index = {}
        dim = 0
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                name, idx = line.rstrip("\n").split("\t")
                dim = max(dim, int(idx) + 1)
                if name != cls.UNKNOWN:
                    table.index[name] = int(idx)
        table.dim = dim
        return table


def append_speaker(feat: Tensor, speaker_hot: np.ndarray) -> Tensor:
    return T.concat([feat, T.constant(speaker_hot)], axis=0)


class GlossaryBranch:
    """Embedding table, tokenizer attention, and bidirectional recurrence."""

    def __init__(self, store: ParameterStore, vocab: Vocabulary,
                 speakers: SpeakerTable, d_g: int = 300, d_h: int = 64,
                 heads: int = 4, context_slots: int = 3,
                 use_tokenizer_attention: bool = True, prefix: str = "glossary"):
        self.vocab = vocab
        self.speakers = speakers
        self.d_g = d_g
        self.d_h = d_h
        self.context_slots = context_slots
        self.use_tokenizer_attention = use_tokenizer_attention
        self.embedding = store.weight(f"{prefix}.embedding", len(vocab), d_g)
        self.embedding.data[Vocabulary.PAD] = 0.0  # PAD row stays zero: never gathered
        self.tau = MultiHeadAttentionLayer(store, f"{prefix}.tau", d_g, heads)
        self.rnn = {}
        for direction in ("fwd", "bwd"):
            self.rnn[direction] = {
                "w_ih": store.weight(f"{prefix}.rnn.{direction}.w_ih", d_g, d_h),
                "w_hh": store.weight(f"{prefix}.rnn.{direction}.w_hh", d_h, d_h),
                "b": store.zeros(f"{prefix}.rnn.{direction}.b", (d_h,)),
            }

    @property
    def utterance_dim(self) -> int:
        return 2 * self.d_h + self.speakers.dim

    @property
    def feature_dim(self) -> int:
        return self.utterance_dim * (1 + self.context_slots)

    def attention_tokenize(self, token_ids: Sequence[int]) -> Tensor:
        """Embed tokens; contextualize with residual self-attention."""
        if not token_ids:
            raise ValueError("attention_tokenize needs at least one token")
        embedded = T.take_rows(self.embedding.tensor, token_ids)
        if not self.use_tokenizer_attention:
            return embedded
        return embedded + self.tau(embedded)

    def encode_utterance(self, r_u: Tensor) -> Tensor:
        """Bidirectional recurrence; read out both states at the last word.

        At the final word the backward direction has taken exactly one
        step, so its contribution there reflects that word alone.
        """
        g = r_u.shape[0]
        fwd = self._states(r_u, "fwd")
        bwd = self._states(r_u, "bwd")
        return T.concat([fwd[g - 1], bwd[g - 1]], axis=0)

    def _states(self, r_u: Tensor, direction: str) -> Dict[int, Tensor]:
        g = r_u.shape[0]
        order = range(g) if direction == "fwd" else range(g - 1, -1, -1)
        w = self.rnn[direction]
        h = T.constant(np.zeros(self.d_h))
        states = {}
        for t in order:
            h = T.tanh(T.linear(r_u[t], w["w_ih"], w["b"]) + T.linear(h, w["w_hh"]))
            states[t] = h
        return states

    def encode_text(self, text: str) -> Tensor:
        ids = self.vocab.encode(tokenize(text))
        return self.encode_utterance(self.attention_tokenize(ids))

    def utterance_feature(self, text: str, speaker: Optional[str]) -> Tensor:
        return append_speaker(self.encode_text(text), self.speakers.encode(speaker))

    def context_feature(self, context: Sequence) -> Tensor:
        """Most recent N turns, front-padded with zero slots, oldest first."""
        recent = list(context)[-self.context_slots:] if self.context_slots else []
        slots: List[Tensor] = []
        for _ in range(self.context_slots - len(recent)):
            slots.append(T.constant(np.zeros(self.utterance_dim)))
        for turn in recent:
            if turn.text is None:
                slots.append(T.constant(np.zeros(self.utterance_dim)))
            else:
                slots.append(self.utterance_feature(turn.text, turn.speaker))
        if not slots:
            return T.constant(np.zeros(0))
        return T.concat(slots, axis=0) if len(slots) > 1 else slots[0]

    def features(self, sample) -> Tensor:
        """G_cat: speaker-aware utterance block plus N context slots."""
        if sample.text is None:
            raise ValueError(f"sample {sample.id!r} has no glossary text")
        utt = self.utterance_feature(sample.text, sample.speaker)
        if self.context_slots == 0:
            return utt
        return T.concat([utt, self.context_feature(sample.context)], axis=0)
