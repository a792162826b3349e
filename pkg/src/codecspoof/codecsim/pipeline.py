from __future__ import annotations

import hashlib
import os
import shlex
import subprocess

import numpy as np

from .adpcm import g726
from .channel import PacketModel, apply_dtx, apply_packet_loss
from .companding import g711
from .config import CodecConfig
from .cvsd import cvsd
from .resample import resample
from .waveform import Waveform, WaveformError, from_pcm16, to_pcm16

RATE_ENV = "CODECSIM_RATE"

# sub-seed offsets for the stochastic stages
_DTX_STREAM = 1
_LOSS_STREAM = 2


class ExternalCodecError(RuntimeError):
    pass


def utterance_seed(global_seed: int, utt_id: str) -> int:
    """Stable 63-bit seed from (global seed, utterance id); independent of PYTHONHASHSEED."""
    h = hashlib.blake2b(f"{global_seed}\0{utt_id}".encode(), digest_size=8).digest()
    return int.from_bytes(h, "little") >> 1


def _stage_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, stream]).generate_state(1)[0])


def run_external(w: Waveform, cmd: str, timeout: float | None = 600) -> Waveform:
    """Pipe raw PCM16 through ``cmd``; the sample rate is passed in $CODECSIM_RATE."""
    env = dict(os.environ, **{RATE_ENV: str(w.rate)})
    try:
        proc = subprocess.run(
            shlex.split(cmd), input=to_pcm16(w.samples).tobytes(), capture_output=True, env=env, timeout=timeout
        )
    except (OSError, subprocess.TimeoutExpired) as e:
        raise ExternalCodecError(f"{cmd!r}: {e}") from e
    if proc.returncode != 0:
        raise ExternalCodecError(f"{cmd!r} exited with {proc.returncode}: {proc.stderr.decode(errors='replace')[:200]}")
    if len(proc.stdout) % 2:
        raise ExternalCodecError(f"{cmd!r} produced an odd number of bytes")
    y = from_pcm16(np.frombuffer(proc.stdout, dtype="<i2"))
    n = len(w)
    # codecs with framing may pad or trim; align to the input length
    y = y[:n] if len(y) >= n else np.concatenate([y, np.zeros(n - len(y))])
    return w.with_samples(y)


def codec_kernel(w: Waveform, cfg: CodecConfig) -> Waveform:
    if cfg.kind == "g711":
        return g711(w, cfg.law)
    if cfg.kind == "g726":
        return g726(w, cfg.bitrate_bps)
    if cfg.kind == "cvsd":
        return cvsd(w, cfg.bitrate_bps)
    if cfg.kind == "external":
        return run_external(w, cfg.external_cmd)
    return w


def degrade(w: Waveform, cfg: CodecConfig, seed: int = 0) -> Waveform:
    """Bandwidth -> DTX -> codec -> packet loss -> back to 16 kHz."""
    if w.rate != 16000:
        raise WaveformError(f"degrade expects 16 kHz input, got {w.rate}")
    n = len(w)
    x = resample(w, 8000) if cfg.band == "narrow" else w
    if cfg.dtx:
        x, _ = apply_dtx(x, seed=_stage_seed(seed, _DTX_STREAM))
    x = codec_kernel(x, cfg)
    if cfg.loss_rate > 0:
        x = apply_packet_loss(x, PacketModel(loss_rate=cfg.loss_rate, seed=_stage_seed(seed, _LOSS_STREAM)))
    x = resample(x, 16000)
    if len(x) == n:
        return x
    y = x.samples[:n] if len(x) > n else np.concatenate([x.samples, np.zeros(n - len(x))])
    return Waveform(y, 16000)
