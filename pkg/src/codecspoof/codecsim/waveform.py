from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

RATES = (8000, 16000)


class WaveformError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Waveform:
    """Mono float64 samples in [-1, 1] at 8 or 16 kHz."""

    samples: np.ndarray
    rate: int = 16000

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise WaveformError(f"expected mono samples, got shape {x.shape}")
        if self.rate not in RATES:
            raise WaveformError(f"unsupported rate {self.rate}")
        if not np.all(np.isfinite(x)):
            raise WaveformError("non-finite samples")
        x.flags.writeable = False
        object.__setattr__(self, "samples", x)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.rate

    def with_samples(self, samples, rate=None) -> "Waveform":
        return Waveform(samples, self.rate if rate is None else rate)


def to_pcm16(x: np.ndarray) -> np.ndarray:
    return np.clip(np.round(np.asarray(x) * 32768.0), -32768, 32767).astype("<i2")


def from_pcm16(pcm: np.ndarray) -> np.ndarray:
    return np.asarray(pcm, dtype=np.float64) / 32768.0


def read_wav(path) -> Waveform:
    with wave.open(str(path), "rb") as f:
        if f.getnchannels() != 1 or f.getsampwidth() != 2:
            raise WaveformError(f"{path}: expected mono PCM16")
        rate = f.getframerate()
        data = f.readframes(f.getnframes())
    return Waveform(from_pcm16(np.frombuffer(data, dtype="<i2")), rate)


def write_wav(w: Waveform, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(w.rate)
        f.writeframes(to_pcm16(w.samples).tobytes())


def snr_db(ref: np.ndarray, test: np.ndarray) -> float:
    ref = np.asarray(ref, dtype=np.float64)
    err = np.asarray(test, dtype=np.float64) - ref
    num = np.sum(ref**2)
    den = np.sum(err**2)
    if den == 0:
        return float("inf")
    return float(10 * np.log10(num / den))
