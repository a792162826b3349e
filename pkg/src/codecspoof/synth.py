"""Seeded two-class toy corpus: harmonic "speech" with natural vs vocoder-like traits.

Bonafide utterances carry aspiration noise between harmonics, pitch jitter
and sharp formants. Spoofed ones come from a mock vocoder: over-smoothed
formants, near-noiseless harmonics, a steadier pitch and a high-frequency
roll-off. Each pseudo-speaker
has its own f0 range and formant positions.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .codecsim.waveform import Waveform, write_wav
from .manifest import TrialManifest, TrialRecord, write_manifest

RATE = 16000
ATTACKS = ("A01", "A02", "A03")
ROLLOFF_HZ = 2000.0
SPOOF_ROLLOFF_DB = -6.0  # per octave above ROLLOFF_HZ


@dataclass(frozen=True)
class SynthConfig:
    n_utts: int = 200
    n_speakers: int = 4
    spoof_fraction: float = 0.5
    min_dur: float = 1.0
    max_dur: float = 2.0
    seed: int = 0
    prefix: str = "T"


@dataclass(frozen=True)
class _Speaker:
    token: str
    f0: float
    formants: tuple[float, ...]


@dataclass(frozen=True)
class _Style:
    bandwidth: float  # formant bandwidth scale
    noise_db: float  # aspiration level re voiced signal
    jitter: float  # relative f0 perturbation
    rolloff: float = 0.0  # dB/octave above ROLLOFF_HZ


def _speakers(n: int, rng: np.random.Generator) -> list[_Speaker]:
    base_f0 = np.linspace(95.0, 240.0, max(n, 1))
    out = []
    for i in range(n):
        formants = (
            rng.uniform(500, 800),
            rng.uniform(1100, 1700),
            rng.uniform(2300, 2900),
            rng.uniform(3300, 3900),
        )
        out.append(_Speaker(f"SPK{i + 1:03d}", float(base_f0[i]), tuple(float(f) for f in formants)))
    return out


def _style(key: str, attack: str | None, rng) -> _Style:
    if key == "bonafide":
        return _Style(bandwidth=1.0, noise_db=rng.uniform(-18, -12), jitter=rng.uniform(0.01, 0.02))
    bw = {"A01": 3.5, "A02": 2.5, "A03": 3.0}[attack]
    noise = {"A01": -36.0, "A02": -46.0, "A03": -40.0}[attack]
    return _Style(
        bandwidth=bw * rng.uniform(0.9, 1.1),
        noise_db=noise + rng.uniform(-3, 3),
        jitter=rng.uniform(0.0, 0.004),
        rolloff=SPOOF_ROLLOFF_DB,
    )


def _envelope_db(f: np.ndarray, spk: _Speaker, style: _Style) -> np.ndarray:
    """Log-spectral envelope: -6 dB/octave tilt, Gaussian formant bumps, optional roll-off."""
    env = -6.0 * np.log2(np.maximum(f, 50.0) / 100.0)
    env += style.rolloff * np.log2(np.maximum(f, ROLLOFF_HZ) / ROLLOFF_HZ)
    for i, F in enumerate(spk.formants):
        bw = (70.0 + 30.0 * i) * style.bandwidth
        env += (18.0 - 3.0 * i) * np.exp(-0.5 * ((f - F) / bw) ** 2)
    return env


def _smooth_noise(n: int, rng, smooth: int) -> np.ndarray:
    raw = rng.standard_normal(n // smooth + 2)
    return np.interp(np.arange(n) / smooth, np.arange(len(raw)), raw)


def _voiced(n: int, spk: _Speaker, style: _Style, rng) -> np.ndarray:
    t = np.arange(n) / RATE
    f0_mean = spk.f0 * rng.uniform(0.9, 1.1)
    glide = rng.uniform(-0.15, 0.15)
    f0 = f0_mean * (1.0 + glide * (t / t[-1] - 0.5)) * (1.0 + style.jitter * _smooth_noise(n, rng, 40))
    phase = 2 * np.pi * np.cumsum(f0) / RATE
    k = np.arange(1, int(7600 // (f0_mean * 1.2)) + 1)
    amps = 10.0 ** (_envelope_db(k * f0_mean, spk, style) / 20.0)
    offsets = rng.uniform(0, 2 * np.pi, size=len(k))
    x = (amps[:, None] * np.sin(k[:, None] * phase[None, :] + offsets[:, None])).sum(axis=0)
    x /= np.sqrt(np.mean(x**2)) + 1e-12
    # aspiration noise shaped by the same envelope
    spec = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, 1.0 / RATE)
    noise = np.fft.irfft(spec * 10.0 ** (_envelope_db(freqs, spk, style) / 20.0), n)
    noise /= np.sqrt(np.mean(noise**2)) + 1e-12
    x = x + 10.0 ** (style.noise_db / 20.0) * noise
    env = np.sin(np.pi * np.arange(n) / n) ** 0.5  # syllable-like amplitude contour
    return x * env


def synth_utterance(spk: _Speaker, key: str, attack: str | None, rng: np.random.Generator, dur: float) -> np.ndarray:
    n_total = int(dur * RATE)
    style = _style(key, attack, rng)
    out = np.zeros(n_total)
    pos = int(rng.uniform(0.02, 0.08) * RATE)
    while pos < n_total:
        seg = int(rng.uniform(0.15, 0.3) * RATE)
        seg = min(seg, n_total - pos)
        if seg > 200:
            out[pos : pos + seg] = _voiced(seg, spk, style, rng) * rng.uniform(0.6, 1.0)
        pos += seg + int(rng.uniform(0.03, 0.08) * RATE)
    out *= 10.0 ** (rng.uniform(-20.0, -8.0) / 20.0) / (np.sqrt(np.mean(out**2)) + 1e-12)
    out += 10.0 ** (-55.0 / 20.0) * rng.standard_normal(n_total)  # background floor
    return np.clip(out, -1.0, 1.0)


def synth_corpus(cfg: SynthConfig) -> tuple[TrialManifest, dict[str, Waveform]]:
    rng = np.random.default_rng(cfg.seed)
    speakers = _speakers(cfg.n_speakers, rng)
    n_spoof = int(round(cfg.n_utts * cfg.spoof_fraction))
    keys = ["spoof"] * n_spoof + ["bonafide"] * (cfg.n_utts - n_spoof)
    keys = [keys[i] for i in rng.permutation(cfg.n_utts)]
    records, audio = [], {}
    for i, key in enumerate(keys):
        spk = speakers[i % len(speakers)]
        attack = ATTACKS[int(rng.integers(len(ATTACKS)))] if key == "spoof" else None
        utt = f"{cfg.prefix}_{i:05d}"
        dur = rng.uniform(cfg.min_dur, cfg.max_dur)
        audio[utt] = Waveform(synth_utterance(spk, key, attack, rng, dur), RATE)
        records.append(TrialRecord(spk.token, utt, key, attack))
    return TrialManifest(tuple(records)), audio


def write_corpus(manifest: TrialManifest, audio: dict[str, Waveform], out_dir) -> None:
    out = Path(out_dir)
    for utt, w in audio.items():
        write_wav(w, out / "wav" / f"{utt}.wav")
    write_manifest(manifest, out / "manifest.txt")
