"""Transmission-channel stages: packet loss and discontinuous transmission."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .waveform import Waveform

FRAME_MS = 20.0
COMFORT_NOISE_DBFS = -60.0
DTX_THRESHOLD_DB = -45.0
DTX_HANGOVER = 4


@dataclass(frozen=True)
class PacketModel:
    packet_ms: float = 20.0
    loss_rate: float = 0.0
    seed: int = 0
    concealment: str = "zero_fill"

    def __post_init__(self):
        if self.packet_ms <= 0:
            raise ValueError("packet_ms must be positive")
        if not 0.0 <= self.loss_rate <= 1.0:
            raise ValueError(f"loss_rate must be in [0, 1], got {self.loss_rate}")
        if self.concealment not in ("zero_fill", "repeat_previous"):
            raise ValueError(f"unknown concealment {self.concealment!r}")


def packet_size(rate: int, packet_ms: float) -> int:
    return max(1, int(round(rate * packet_ms / 1000.0)))


def drop_mask(n_packets: int, loss_rate: float, seed: int) -> np.ndarray:
    """Independent Bernoulli losses, True where the packet is lost."""
    rng = np.random.default_rng(seed)
    return rng.random(n_packets) < loss_rate


def apply_packet_loss(w: Waveform, model: PacketModel) -> Waveform:
    if model.loss_rate == 0.0:
        return w
    p = packet_size(w.rate, model.packet_ms)
    x = w.samples
    n_packets = -(-len(x) // p)
    lost = drop_mask(n_packets, model.loss_rate, model.seed)
    y = x.copy()
    prev = np.zeros(p)
    for i in range(n_packets):
        seg = slice(i * p, min((i + 1) * p, len(x)))
        width = seg.stop - seg.start
        if lost[i]:
            if model.concealment == "zero_fill":
                y[seg] = 0.0
            else:
                y[seg] = prev[:width]
        if width == p:
            prev = y[seg].copy()
    return w.with_samples(y)


def frame_levels_db(x: np.ndarray, frame_len: int) -> np.ndarray:
    """Mean-square level of consecutive frames in dB re full scale (last frame may be short)."""
    n = len(x)
    n_frames = -(-n // frame_len)
    levels = np.empty(n_frames)
    for i in range(n_frames):
        seg = x[i * frame_len : (i + 1) * frame_len]
        levels[i] = 10.0 * np.log10(np.mean(seg**2) + 1e-20)
    return levels


def vad(levels_db: np.ndarray, threshold_db: float, hangover: int) -> np.ndarray:
    active = np.zeros(len(levels_db), dtype=bool)
    hang = 0
    for i, level in enumerate(levels_db):
        if level > threshold_db:
            active[i] = True
            hang = hangover
        elif hang > 0:
            active[i] = True
            hang -= 1
    return active


def apply_dtx(
    w: Waveform,
    energy_threshold_db: float = DTX_THRESHOLD_DB,
    hangover_frames: int = DTX_HANGOVER,
    seed: int = 0,
) -> tuple[Waveform, int]:
    """Replace inactive 20 ms frames with comfort noise; returns (waveform, active frame count)."""
    frame_len = packet_size(w.rate, FRAME_MS)
    x = w.samples
    active = vad(frame_levels_db(x, frame_len), energy_threshold_db, hangover_frames)
    if active.all():
        return w, int(active.sum())
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(len(x)) * 10.0 ** (COMFORT_NOISE_DBFS / 20.0)
    gate = np.repeat(active, frame_len)[: len(x)]
    y = np.where(gate, x, noise)
    return w.with_samples(y), int(active.sum())
