"""Synthetic audiovisual-dialogue corpus with planted class signals.

Each sample plants one signal per modality: a marker word buried in the
utterance text, a bright patch in one color channel of the frames, and a tone
frequency in the audio. A per-modality reliability in [0, 1] controls how
often the planted signal agrees with the label, so corpora can be built
where one modality is perfect, all are partially informative, or a
modality is pure noise. Generation is fully seeded and byte-stable:
the same (n, seed, spec) always produces identical files.
"""

from __future__ import annotations

import json
import wave
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Sequence, Tuple

import numpy as np

from vyang import vtf
from vyang.data import Sample, load_manifest
from vyang.params import _rng_for

MARKER_WORDS = {1: "brilliant", 0: "ordinary"}

FILLER_WORDS = (
    "the", "a", "so", "and", "then", "well", "you", "know", "just", "like",
    "really", "kind", "of", "it", "was", "thing", "today", "again", "maybe",
    "anyway", "right", "still", "went", "said", "some",
)

TONE_HZ = {1: 880.0, 0: 220.0}

SHOWS = ("FRIENDS", "SHOWA", "SHOWB")

CASTS: Dict[str, Tuple[str, ...]] = {
    "FRIENDS": ("ross", "monica", "chandler"),
    "SHOWA": ("ana", "ben"),
    "SHOWB": ("cara", "dev"),
}


@dataclass(frozen=True)
class SignalSpec:
    """Reliabilities and artifact sizes for one generated corpus."""

    glossary: float = 1.0
    visual: float = 1.0
    acoustic: float = 1.0
    sentence_length: int = 18
    marker_tail_gap: int = 6   # marker lands >= this many words before the end
    filler_pool: int = 0       # 0 = all filler words; small pools curb lexical identity
    frame_size: int = 12
    frames_per_utterance: int = 2
    tone_seconds: float = 0.05
    sample_rate: int = 16000
    context_turns: int = 1

    def __post_init__(self):
        for field_name in ("glossary", "visual", "acoustic"):
            value = getattr(self, field_name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{field_name} reliability must be in [0, 1], got {value}")
        if self.sentence_length < 9:
            raise ValueError("sentences need at least 9 words to bury the marker")
        if not 0 <= self.marker_tail_gap <= self.sentence_length - 3:
            raise ValueError("marker tail gap must leave at least two marker slots")
        if not 0 <= self.filler_pool <= len(FILLER_WORDS):
            raise ValueError(f"filler pool must be 0..{len(FILLER_WORDS)}")
        if self.frame_size < 6:
            raise ValueError("frames need at least 6 pixels per side")


def _signal_bit(label: int, reliability: float, rng) -> int:
    return label if rng.random() < reliability else 1 - label


def _pool(spec: SignalSpec) -> int:
    return spec.filler_pool or len(FILLER_WORDS)


def _sentence(bit: int, spec: SignalSpec, rng) -> str:
    length = spec.sentence_length
    words = [FILLER_WORDS[i] for i in rng.integers(0, _pool(spec), size=length)]
    # by default the marker stays away from the sentence tail so position
    # alone cannot reveal it to a final-state readout; tail_gap=0 lets it
    # land anywhere
    slot = int(rng.integers(1, length - spec.marker_tail_gap))
    words[slot] = MARKER_WORDS[bit]
    return " ".join(words)


def _filler_sentence(spec: SignalSpec, rng, length: int = 6) -> str:
    words = [FILLER_WORDS[i] for i in rng.integers(0, _pool(spec), size=length)]
    return " ".join(words)


PATCH_CHANNEL = {1: 0, 0: 2}


def _frames(bit: int, spec: SignalSpec, rng) -> np.ndarray:
    # the signal lives in which color channel the bright patch occupies;
    # patch position is noise, so pooled (position-free) statistics still
    # carry the class
    size = spec.frame_size
    span = size // 3
    stack = rng.uniform(0.0, 0.25, size=(spec.frames_per_utterance, 3, size, size))
    for frame in stack:
        r0 = int(rng.integers(0, size - span + 1))
        c0 = int(rng.integers(0, size - span + 1))
        frame[PATCH_CHANNEL[bit], r0 : r0 + span, c0 : c0 + span] = rng.uniform(0.85, 1.0)
    return stack.astype(np.float32)


def _tone(bit: int, spec: SignalSpec, rng) -> np.ndarray:
    count = int(round(spec.tone_seconds * spec.sample_rate))
    t = np.arange(count) / spec.sample_rate
    phase = rng.uniform(0.0, 2 * np.pi)
    wavef = 0.5 * np.sin(2 * np.pi * TONE_HZ[bit] * t + phase)
    wavef = wavef + rng.normal(0.0, 0.01, size=count)
    return np.clip(wavef, -1.0, 1.0)


def _write_wav(path: Path, samples: np.ndarray, rate: int) -> None:
    pcm = np.clip(samples * 32767.0, -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(rate)
        fh.writeframes(pcm.tobytes())


def generate_synthetic_dataset(out_dir, n: int = 200, seed: int = 0,
                               spec: SignalSpec = SignalSpec()) -> Path:
    """Write manifest.jsonl plus media files under out_dir; returns the manifest path."""
    if n < 10:
        raise ValueError(f"need at least 10 samples for a usable corpus, got {n}")
    out_dir = Path(out_dir)
    media = out_dir / "media"
    media.mkdir(parents=True, exist_ok=True)
    rng = _rng_for(seed, "synth")
    manifest = out_dir / "manifest.jsonl"
    with open(manifest, "w", encoding="utf-8") as fh:
        for i in range(n):
            label = i % 2
            sid = f"s{i:04d}"
            show = SHOWS[i % len(SHOWS)]
            cast = CASTS[show]
            # speakers are drawn independently of the label so the speaker
            # one-hot cannot shortcut the planted per-modality signals
            speaker = cast[int(rng.integers(0, len(cast)))]
            g_bit = _signal_bit(label, spec.glossary, rng)
            v_bit = _signal_bit(label, spec.visual, rng)
            a_bit = _signal_bit(label, spec.acoustic, rng)
            frames_rel = f"media/{sid}.vtf"
            audio_rel = f"media/{sid}.wav"
            vtf.save_tensor(out_dir / frames_rel, _frames(v_bit, spec, rng))
            _write_wav(out_dir / audio_rel, _tone(a_bit, spec, rng), spec.sample_rate)
            context = [
                {"text": _filler_sentence(spec, rng),
                 "speaker": cast[int(rng.integers(0, len(cast)))]}
                for _ in range(spec.context_turns)
            ]
            record = {
                "id": sid, "show": show,
                "text": _sentence(g_bit, spec, rng),
                "speaker": speaker, "label": label,
                "frames": frames_rel, "audio": audio_rel,
                "context": context,
            }
            fh.write(json.dumps(record) + "\n")
    return manifest


def decode_planted_signals(sample: Sample, spec: SignalSpec = SignalSpec()) -> Tuple[int, int, int]:
    """(text, frame, tone) bits recovered from the sample's artifacts.

    Reads the generated files the same way a hand oracle would: marker
    word lookup, channel brightness comparison, and dominant-frequency
    distance to the two planted tones.
    """
    g_bit = 1 if MARKER_WORDS[1] in (sample.text or "").split() else 0
    frames = vtf.load_tensor(sample.frames)
    v_bit = 1 if frames[:, PATCH_CHANNEL[1]].mean() > frames[:, PATCH_CHANNEL[0]].mean() else 0
    with wave.open(str(sample.audio), "rb") as fh:
        raw = np.frombuffer(fh.readframes(fh.getnframes()), dtype="<i2")
        rate = fh.getframerate()
    spectrum = np.abs(np.fft.rfft(raw.astype(np.float64)))
    peak_hz = np.argmax(spectrum) * rate / len(raw)
    a_bit = 1 if abs(peak_hz - TONE_HZ[1]) < abs(peak_hz - TONE_HZ[0]) else 0
    return g_bit, v_bit, a_bit


def oracle_accuracy(samples: Sequence[Sample], spec: SignalSpec = SignalSpec()) -> float:
    """Accuracy of majority-voting the three decoded bits, as a percentage."""
    correct = 0
    for s in samples:
        bits = decode_planted_signals(s, spec)
        vote = 1 if sum(bits) >= 2 else 0
        correct += int(vote == s.label)
    return 100.0 * correct / len(samples)


def load_synthetic(out_dir):
    return load_manifest(Path(out_dir) / "manifest.jsonl")
