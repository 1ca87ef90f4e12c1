"""Acoustic pathway: windowed spectral features, mean-pooled per utterance.

Nothing here is learned. A waveform is cut into overlapping frames, each
frame yields log-mel energies plus optional RMS and spectral-centroid
scalars, and the frame features are mean-pooled. A precomputed feature
vector (read from a tensor file) can stand in for the extractor output.
The utterance feature gets the speaker one-hot appended; the acoustic
context is always empty by design, so A_cat equals the utterance block.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from vyang import vtf
from vyang.glossary import SpeakerTable
from vyang.tensor import Tensor

LOG_EPS = 1e-10


@dataclass(frozen=True)
class Waveform:
    sample_rate: int
    samples: np.ndarray  # mono, values in [-1, 1]

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate}")
        if len(self.samples) < 1:
            raise ValueError("waveform needs at least one sample")


@dataclass(frozen=True)
class AcousticConfig:
    window_ms: float = 25.0
    hop_ms: float = 10.0
    mel_bands: int = 26
    include_rms: bool = True
    include_spectral_centroid: bool = True

    def __post_init__(self):
        if self.window_ms < self.hop_ms:
            raise ValueError("window must be at least one hop long")

    @property
    def d_a(self) -> int:
        return self.mel_bands + int(self.include_rms) + int(self.include_spectral_centroid)

    def window_samples(self, sample_rate: int) -> int:
        return int(round(sample_rate * self.window_ms / 1000.0))

    def hop_samples(self, sample_rate: int) -> int:
        return int(round(sample_rate * self.hop_ms / 1000.0))


def load_waveform(path) -> Waveform:
    """Read mono 16-bit PCM WAV into [-1, 1] floats."""
    with wave.open(str(path), "rb") as wav:
        if wav.getnchannels() != 1 or wav.getsampwidth() != 2:
            raise ValueError(
                f"{path}: expected mono 16-bit PCM, got "
                f"{wav.getnchannels()} channels, {8 * wav.getsampwidth()}-bit"
            )
        rate = wav.getframerate()
        raw = wav.readframes(wav.getnframes())
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return Waveform(rate, samples)


def frame_signal(w: Waveform, cfg: AcousticConfig) -> np.ndarray:
    """Slice into hop-spaced windows; a zero-padded tail covers leftovers."""
    window = cfg.window_samples(w.sample_rate)
    hop = cfg.hop_samples(w.sample_rate)
    n = len(w.samples)
    if n < window:
        raise ValueError(f"waveform of {n} samples shorter than {window}-sample window")
    full = (n - window) // hop + 1
    covered = (full - 1) * hop + window
    count = full + (1 if covered < n else 0)
    frames = np.zeros((count, window))
    for i in range(count):
        chunk = w.samples[i * hop : i * hop + window]
        frames[i, : len(chunk)] = chunk
    return frames


def mel_scale(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel) / 2595.0) - 1.0)


def mel_filterbank(num_bands: int, window: int, sample_rate: int) -> np.ndarray:
    """Triangular filters over rfft bins, evenly spaced on the mel scale."""
    n_bins = window // 2 + 1
    points_mel = np.linspace(0.0, mel_scale(sample_rate / 2.0), num_bands + 2)
    points_hz = mel_to_hz(points_mel)
    bin_hz = np.arange(n_bins) * sample_rate / window
    bank = np.zeros((num_bands, n_bins))
    for b in range(num_bands):
        lo, mid, hi = points_hz[b], points_hz[b + 1], points_hz[b + 2]
        rising = (bin_hz - lo) / max(mid - lo, 1e-12)
        falling = (hi - bin_hz) / max(hi - mid, 1e-12)
        bank[b] = np.clip(np.minimum(rising, falling), 0.0, None)
    return bank


def band_centers_hz(num_bands: int, sample_rate: int) -> np.ndarray:
    points = mel_to_hz(np.linspace(0.0, mel_scale(sample_rate / 2.0), num_bands + 2))
    return points[1:-1]


def extract_frame_features(frame: np.ndarray, cfg: AcousticConfig,
                           sample_rate: int) -> np.ndarray:
    window = len(frame)
    spectrum = np.abs(np.fft.rfft(frame * np.hanning(window)))
    bank = mel_filterbank(cfg.mel_bands, window, sample_rate)
    feats = [np.log(bank @ spectrum + LOG_EPS)]
    if cfg.include_rms:
        feats.append([np.sqrt(np.mean(frame * frame))])
    if cfg.include_spectral_centroid:
        # expressed as a fraction of Nyquist so it shares the scale of RMS
        bin_frac = np.arange(len(spectrum)) / (window / 2.0)
        feats.append([float((bin_frac * spectrum).sum() / (spectrum.sum() + LOG_EPS))])
    return np.concatenate(feats)


def _mean_pairwise(rows: np.ndarray) -> np.ndarray:
    # balanced pairwise summation keeps the mean frame-order invariant
    items = [rows[i] for i in range(len(rows))]
    while len(items) > 1:
        merged = [items[i] + items[i + 1] for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            merged.append(items[-1])
        items = merged
    return items[0] / len(rows)


def utterance_feature_vector(w: Waveform, cfg: AcousticConfig) -> np.ndarray:
    frames = frame_signal(w, cfg)
    feats = np.stack([extract_frame_features(f, cfg, w.sample_rate) for f in frames])
    return _mean_pairwise(feats)


class AcousticBranch:
    """Feature extraction with per-sample caching (nothing trains here)."""

    def __init__(self, speakers: SpeakerTable, cfg: Optional[AcousticConfig] = None):
        self.cfg = cfg or AcousticConfig()
        self.speakers = speakers
        self._cache: Dict[str, np.ndarray] = {}
        self._d_a: Optional[int] = None

    @property
    def feature_dim(self) -> Optional[int]:
        return None if self._d_a is None else self._d_a + self.speakers.dim

    def _utterance_vector(self, sample) -> np.ndarray:
        if sample.id in self._cache:
            return self._cache[sample.id]
        path = Path(sample.audio)
        if path.suffix == ".vtf":
            vec = vtf.load_tensor(path).astype(np.float64).reshape(-1)
        else:
            vec = utterance_feature_vector(load_waveform(path), self.cfg)
        if self._d_a is None:
            self._d_a = len(vec)
        elif len(vec) != self._d_a:
            raise ValueError(
                f"sample {sample.id!r} yields {len(vec)} acoustic dims, "
                f"other samples yield {self._d_a}"
            )
        self._cache[sample.id] = vec
        return vec

    def features(self, sample) -> Tensor:
        """A_cat: utterance feature with speaker one-hot, never any context."""
        if sample.audio is None:
            raise ValueError(f"sample {sample.id!r} has no audio")
        vec = self._utterance_vector(sample)
        return Tensor(np.concatenate([vec, self.speakers.encode(sample.speaker)]))
