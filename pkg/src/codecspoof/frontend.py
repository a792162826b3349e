"""LFCC front-end: linear triangular filterbank cepstra with deltas."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.fft import dct

from .codecsim.waveform import Waveform

FRAME_MS = 20
HOP_MS = 10
LOG_FLOOR = 1e-30
DELTA_WIDTH = 2


class FrontendError(ValueError):
    pass


@dataclass(frozen=True)
class LfccConfig:
    n_filters: int = 20
    n_ceps: int = 20
    fft_size: int = 512
    fmin: float = 0.0
    fmax: float | None = None  # None means Nyquist
    window: str = "hamming"

    def __post_init__(self):
        if self.n_ceps > self.n_filters:
            raise FrontendError("n_ceps must not exceed n_filters")
        if self.window != "hamming":
            raise FrontendError(f"unsupported window {self.window!r}")


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    coeffs: np.ndarray  # T x 3*n_ceps
    source_utt: str = ""
    frame_ms: int = FRAME_MS
    hop_ms: int = HOP_MS

    @property
    def n_frames(self) -> int:
        return self.coeffs.shape[0]


def frame_signal(w: Waveform, frame_ms: float = FRAME_MS, hop_ms: float = HOP_MS) -> np.ndarray:
    """Unpadded frames as a (T, L) view, T = floor((N - L) / H) + 1."""
    L = int(round(frame_ms * w.rate / 1000))
    H = int(round(hop_ms * w.rate / 1000))
    x = w.samples
    if len(x) < L:
        raise FrontendError(f"signal of {len(x)} samples is shorter than one {L}-sample frame")
    return np.lib.stride_tricks.sliding_window_view(x, L)[::H]


def linear_filterbank(n_filters: int, fft_size: int, rate: int, fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    """(n_filters, fft_size//2 + 1) triangles with linearly spaced centres."""
    fmax = rate / 2 if fmax is None else fmax
    edges = np.linspace(fmin, fmax, n_filters + 2)
    freqs = np.arange(fft_size // 2 + 1) * rate / fft_size
    fb = np.zeros((n_filters, len(freqs)))
    for m in range(n_filters):
        lo, c, hi = edges[m : m + 3]
        rising = (freqs - lo) / (c - lo)
        falling = (hi - freqs) / (hi - c)
        fb[m] = np.maximum(0.0, np.minimum(rising, falling))
    return fb


def filterbank_energies(w: Waveform, cfg: LfccConfig = LfccConfig()) -> np.ndarray:
    frames = frame_signal(w)
    L = frames.shape[1]
    if cfg.fft_size < L:
        raise FrontendError(f"fft_size {cfg.fft_size} shorter than frame length {L}")
    spec = np.fft.rfft(frames * np.hamming(L), n=cfg.fft_size, axis=1)
    power = spec.real**2 + spec.imag**2
    fb = linear_filterbank(cfg.n_filters, cfg.fft_size, w.rate, cfg.fmin, cfg.fmax)
    return power @ fb.T


def lfcc_static(w: Waveform, cfg: LfccConfig = LfccConfig()) -> np.ndarray:
    energies = filterbank_energies(w, cfg)
    logs = np.log(np.maximum(energies, LOG_FLOOR))
    return dct(logs, type=2, norm="ortho", axis=1)[:, : cfg.n_ceps]


def deltas(m: np.ndarray, width: int = DELTA_WIDTH) -> np.ndarray:
    """Regression deltas over +-width frames with edge replication."""
    m = np.asarray(m, dtype=np.float64)
    T = m.shape[0]
    padded = np.pad(m, ((width, width), (0, 0)), mode="edge")
    num = np.zeros_like(m)
    for n in range(1, width + 1):
        num += n * (padded[width + n : width + n + T] - padded[width - n : width - n + T])
    return num / (2 * sum(n * n for n in range(1, width + 1)))


def extract(w: Waveform, cfg: LfccConfig = LfccConfig(), utt_id: str = "") -> FeatureMatrix:
    static = lfcc_static(w, cfg)
    d1 = deltas(static)
    d2 = deltas(d1)
    return FeatureMatrix(np.hstack([static, d1, d2]), utt_id)


# Feature cache: one binary file per utterance plus a text index.
# Layout: magic, version, len(utt_id), utt_id bytes, T, D, frame_ms, hop_ms, then float32 rows.
_MAGIC = b"LFCC"
_VERSION = 1
_HEAD = struct.Struct("<4sHH")
_DIMS = struct.Struct("<IIHH")


def write_features(fm: FeatureMatrix, path) -> None:
    uid = fm.source_utt.encode("utf-8")
    T, D = fm.coeffs.shape
    with open(path, "wb") as f:
        f.write(_HEAD.pack(_MAGIC, _VERSION, len(uid)))
        f.write(uid)
        f.write(_DIMS.pack(T, D, fm.frame_ms, fm.hop_ms))
        f.write(np.ascontiguousarray(fm.coeffs, dtype="<f4").tobytes())


def read_features(path) -> FeatureMatrix:
    data = Path(path).read_bytes()
    magic, version, ulen = _HEAD.unpack_from(data, 0)
    if magic != _MAGIC or version != _VERSION:
        raise FrontendError(f"{path}: not a feature file (version {version})")
    off = _HEAD.size
    uid = data[off : off + ulen].decode("utf-8")
    off += ulen
    T, D, frame_ms, hop_ms = _DIMS.unpack_from(data, off)
    off += _DIMS.size
    coeffs = np.frombuffer(data, dtype="<f4", count=T * D, offset=off).reshape(T, D).astype(np.float64)
    return FeatureMatrix(coeffs, uid, frame_ms, hop_ms)


class FeatureCache:
    """Directory of feature files with an ``index.txt`` of ``utt_id<TAB>file<TAB>T``."""

    def __init__(self, root):
        self.root = Path(root)
        self.index_path = self.root / "index.txt"
        self._index: dict[str, tuple[str, int]] = {}
        if self.index_path.exists():
            for line in self.index_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    utt, fname, T = line.split("\t")
                    self._index[utt] = (fname, int(T))

    def __contains__(self, utt_id):
        return utt_id in self._index and (self.root / self._index[utt_id][0]).exists()

    def get(self, utt_id: str) -> FeatureMatrix:
        return read_features(self.root / self._index[utt_id][0])

    def put(self, fm: FeatureMatrix) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        fname = fm.source_utt + ".lfcc"
        write_features(fm, self.root / fname)
        self._index[fm.source_utt] = (fname, fm.n_frames)

    def save_index(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        lines = [f"{u}\t{f}\t{T}\n" for u, (f, T) in sorted(self._index.items())]
        self.index_path.write_text("".join(lines), encoding="utf-8")
