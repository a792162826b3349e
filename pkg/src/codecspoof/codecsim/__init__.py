"""Codec and channel simulation for building degraded corpora."""

from .adpcm import g726
from .channel import PacketModel, apply_dtx, apply_packet_loss
from .companding import g711
from .config import CodecConfig, CodecConfigError, format_codec, parse_codec
from .cvsd import cvsd
from .pipeline import ExternalCodecError, degrade, run_external, utterance_seed
from .resample import resample
from .waveform import Waveform, WaveformError, read_wav, snr_db, write_wav

__all__ = [
    "CodecConfig",
    "CodecConfigError",
    "ExternalCodecError",
    "PacketModel",
    "Waveform",
    "WaveformError",
    "apply_dtx",
    "apply_packet_loss",
    "cvsd",
    "degrade",
    "format_codec",
    "g711",
    "g726",
    "parse_codec",
    "read_wav",
    "resample",
    "run_external",
    "snr_db",
    "utterance_seed",
    "write_wav",
]
