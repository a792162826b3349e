"""Mini-batching strategies and length-alignment ("data feeding") of waveforms."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .codecsim.waveform import Waveform
from .manifest import TrialManifest

STRATEGIES = ("random", "custom_class", "custom_speak", "custom_sim")
FEEDS = ("one_sec", "mean_len", "max_len")
CHUNK_SAMPLES = 16000


class BatchError(ValueError):
    pass


@dataclass(frozen=True)
class FeedStrategy:
    kind: str = "one_sec"
    chunk_samples: int = CHUNK_SAMPLES

    def __post_init__(self):
        if self.kind not in FEEDS:
            raise BatchError(f"unknown feed strategy {self.kind!r}")
        if self.kind == "one_sec" and self.chunk_samples != CHUNK_SAMPLES:
            raise BatchError("one_sec feeding uses 16000-sample chunks")


@dataclass(frozen=True)
class BatchPlan:
    batches: tuple[tuple[str, ...], ...]
    strategy: str
    batch_size: int
    seed: int

    def __iter__(self):
        return iter(self.batches)

    def __len__(self):
        return len(self.batches)


class _Cycler:
    """Endless draws from a pool, one fresh shuffle per pass."""

    def __init__(self, pool: Sequence[str], rng: np.random.Generator):
        self.pool = list(pool)
        self.rng = rng
        self.queue: list[str] = []

    def next(self) -> str:
        if not self.queue:
            self.queue = [self.pool[i] for i in self.rng.permutation(len(self.pool))]
        return self.queue.pop()


def _random(manifest, batch_size, rng):
    ids = manifest.utt_ids
    order = [ids[i] for i in rng.permutation(len(ids))]
    return [tuple(order[i : i + batch_size]) for i in range(0, len(order), batch_size)]


def _custom_class(manifest, batch_size, rng):
    half = batch_size // 2
    bona = [r.utt_id for r in manifest if r.label == 0]
    spoof = [r.utt_id for r in manifest if r.label == 1]
    # the larger class is covered once per epoch, the smaller one is reused
    major, minor = (spoof, bona) if len(spoof) >= len(bona) else (bona, spoof)
    major = [major[i] for i in rng.permutation(len(major))]
    cyc = _Cycler(minor, rng)
    batches = []
    for start in range(0, len(major) - half + 1, half):
        batches.append(tuple(major[start : start + half]) + tuple(cyc.next() for _ in range(half)))
    return batches


def _custom_paired(manifest, batch_size, rng, attr):
    half = batch_size // 2
    groups: dict[str, list[str]] = {}
    for r in manifest:
        if r.label == 0:
            groups.setdefault(getattr(r, attr), []).append(r.utt_id)
    spoofs = [r for r in manifest if r.label == 1]
    for r in spoofs:
        token = getattr(r, attr)
        if token not in groups:
            what = "speaker" if attr == "speaker_id" else "codec"
            raise BatchError(f"{what} {token!r} has spoofed trials but no bonafide partner")
    cyclers = {k: _Cycler(v, rng) for k, v in sorted(groups.items())}
    order = [spoofs[i] for i in rng.permutation(len(spoofs))]
    pairs = [(r.utt_id, cyclers[getattr(r, attr)].next()) for r in order]
    batches = []
    for start in range(0, len(pairs) - half + 1, half):
        chunk = pairs[start : start + half]
        batches.append(tuple(s for s, _ in chunk) + tuple(b for _, b in chunk))
    return batches


def make_batches(manifest: TrialManifest, strategy: str, batch_size: int, seed: int) -> BatchPlan:
    """Plan one epoch of mini-batches.

    Custom strategies put the spoofs (or, for custom_class, the larger class)
    in the first half of each batch and the bonafide partners in the second,
    position by position, and drop the last partial batch.
    """
    if strategy not in STRATEGIES:
        raise BatchError(f"unknown batching strategy {strategy!r}")
    if batch_size < 1:
        raise BatchError("batch_size must be positive")
    rng = np.random.default_rng(seed)
    if strategy == "random":
        return BatchPlan(tuple(_random(manifest, batch_size, rng)), strategy, batch_size, seed)
    if batch_size % 2:
        raise BatchError(f"{strategy} needs an even batch size, got {batch_size}")
    counts = manifest.counts
    if not counts["bonafide"] or not counts["spoof"]:
        raise BatchError(f"{strategy} needs both classes, got {counts}")
    if strategy == "custom_class":
        batches = _custom_class(manifest, batch_size, rng)
    elif strategy == "custom_speak":
        batches = _custom_paired(manifest, batch_size, rng, "speaker_id")
    else:
        if any(r.codec_tag is None for r in manifest):
            raise BatchError("custom_sim needs codec tags on every record")
        batches = _custom_paired(manifest, batch_size, rng, "codec_tag")
    return BatchPlan(tuple(batches), strategy, batch_size, seed)


def format_batch_plan(plan: BatchPlan) -> str:
    return "".join(",".join(b) + "\n" for b in plan.batches)


def parse_batch_plan(text: str, strategy: str = "random", batch_size: int = 0, seed: int = 0) -> BatchPlan:
    batches = tuple(tuple(line.split(",")) for line in text.splitlines() if line.strip())
    return BatchPlan(batches, strategy, batch_size, seed)


def write_batch_plan(plan: BatchPlan, path) -> None:
    Path(path).write_text(format_batch_plan(plan), encoding="utf-8")


def repeat_pad(x: np.ndarray, length: int) -> np.ndarray:
    """Tile ``x`` and truncate to ``length``."""
    reps = -(-length // len(x))
    return np.tile(x, reps)[:length]


def _slice(x, length, rng):
    offset = int(rng.integers(0, len(x) - length + 1))
    return x[offset : offset + length]


def feed(batch: Sequence[Waveform], strategy: FeedStrategy, seed: int) -> np.ndarray:
    """Align a batch of waveforms to a common length; returns an (N, L) array."""
    if not batch:
        raise BatchError("empty batch")
    rates = {w.rate for w in batch}
    if len(rates) > 1:
        raise BatchError(f"mixed sample rates {sorted(rates)}")
    xs = [w.samples for w in batch]
    if any(len(x) == 0 for x in xs):
        raise BatchError("zero-length waveform in batch")
    rng = np.random.default_rng(seed)
    if strategy.kind == "max_len":
        L = max(len(x) for x in xs)
    elif strategy.kind == "mean_len":
        L = int(np.floor(np.mean([len(x) for x in xs])))
    else:
        L = strategy.chunk_samples
    rows = []
    for x in xs:
        if len(x) < L:
            x = repeat_pad(x, L)
        if len(x) > L:
            x = _slice(x, L, rng)
        rows.append(x)
    return np.stack(rows)


def chunks(x: np.ndarray, length: int = CHUNK_SAMPLES) -> np.ndarray:
    """All full non-overlapping chunks; shorter inputs are repeat-padded to one chunk."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) < length:
        return repeat_pad(x, length)[None, :]
    n = len(x) // length
    return x[: n * length].reshape(n, length)
