from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .. import blob
from ..batcher import FeedStrategy, chunks, feed, make_batches
from ..codecsim import Waveform, degrade, utterance_seed
from ..frontend import FrontendError, LfccConfig, extract
from ..losses import LossHead, head_from_blob, head_to_blob, loss
from ..losses import scores as head_scores
from ..manifest import DegradationPlan, TrialManifest, tag_manifest
from ..metrics import ScoreFile
from .adam import AdamState, adam_step
from .encoder import Encoder, EncoderConfig

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
AudioLoader = Callable[[str], Waveform]


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainRunConfig:
    epochs: int = 10
    batch_size: int = 32
    feed: str = "one_sec"
    batching: str = "random"
    loss_kind: str = "oc_softmax"
    alpha: float = 20.0
    m: float = 0.3
    m0: float = 0.9
    m1: float = 0.2
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    checkpoint_every: int = 0  # epochs; 0 disables intermediate checkpoints

    def to_dict(self) -> dict:
        d = asdict(self)
        d["encoder"] = self.encoder.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainRunConfig":
        d = dict(d)
        if "encoder" in d and isinstance(d["encoder"], dict):
            d["encoder"] = EncoderConfig.from_dict(d["encoder"])
        return cls(**d)


@dataclass
class Checkpoint:
    encoder: Encoder
    head: LossHead
    run: TrainRunConfig
    trace: list[tuple[int, float, int]] = field(default_factory=list)

    def save(self, path) -> None:
        head_meta, head_arrays = head_to_blob(self.head)
        arrays = {f"enc.{k}": v for k, v in self.encoder.params.items()}
        arrays.update({f"head.{k}": v for k, v in head_arrays.items()})
        meta = {"run": self.run.to_dict(), "head": head_meta, "trace": [list(t) for t in self.trace]}
        blob.save(path, "checkpoint", CHECKPOINT_VERSION, meta, arrays)

    @classmethod
    def load(cls, path) -> "Checkpoint":
        meta, arrays = blob.load(path, "checkpoint", CHECKPOINT_VERSION)
        run = TrainRunConfig.from_dict(meta["run"])
        enc = Encoder(run.encoder, {k[4:]: v for k, v in arrays.items() if k.startswith("enc.")})
        head = head_from_blob(meta["head"], {k[5:]: v for k, v in arrays.items() if k.startswith("head.")})
        return cls(enc, head, run, [tuple(t) for t in meta["trace"]])


def init_checkpoint(run: TrainRunConfig) -> Checkpoint:
    enc = Encoder.init(run.encoder)
    head = LossHead.init(
        run.loss_kind, run.encoder.embed_dim, seed=run.seed + 1, alpha=run.alpha, m=run.m, m0=run.m0, m1=run.m1
    )
    return Checkpoint(enc, head, run)


def features_for(rows: np.ndarray, rate: int = 16000, cfg: LfccConfig = LfccConfig()) -> np.ndarray:
    """(N, L) aligned samples -> (N, T, 60) features."""
    return np.stack([extract(Waveform(r, rate), cfg).coeffs for r in rows])


class DegradedAudio:
    """Memoized ``degrade(load(u), plan[u], seed(u))``."""

    def __init__(self, load: AudioLoader, plan: DegradationPlan):
        self.load = load
        self.plan = plan
        self._cache: dict[str, Waveform] = {}

    def __call__(self, utt_id: str) -> Waveform:
        w = self._cache.get(utt_id)
        if w is None:
            w = degrade(self.load(utt_id), self.plan[utt_id], utterance_seed(self.plan.seed, utt_id))
            self._cache[utt_id] = w
        return w


def _sub_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def train(
    run: TrainRunConfig,
    manifest: TrialManifest,
    load: AudioLoader,
    plan: DegradationPlan | None = None,
    degrade_audio: bool = True,
    checkpoint_dir=None,
) -> Checkpoint:
    """Train encoder + loss head; the per-epoch trace is stored on the checkpoint.

    With a plan, records are tagged with their codec (needed by custom_sim),
    and audio is degraded on the fly unless ``degrade_audio`` is False (i.e.
    ``load`` already returns degraded audio).
    """
    ckpt = init_checkpoint(run)
    if plan is not None:
        manifest = tag_manifest(manifest, plan)
        if degrade_audio:
            load = DegradedAudio(load, plan)
    memo: dict[str, Waveform] = {}

    def get(u):
        if u not in memo:
            memo[u] = load(u)
        return memo[u]

    enc, head = ckpt.encoder, ckpt.head
    params = dict(enc.params)
    params.update({f"head.{k}": v for k, v in head.weights().items()})
    state = AdamState(lr=run.lr, beta1=run.beta1, beta2=run.beta2, eps=run.eps)
    strategy = FeedStrategy(run.feed)
    for epoch in range(1, run.epochs + 1):
        bplan = make_batches(manifest, run.batching, run.batch_size, _sub_seed(run.seed, epoch))
        total = 0.0
        for bi, batch in enumerate(bplan.batches):
            rows = feed([get(u) for u in batch], strategy, _sub_seed(run.seed, epoch, bi))
            feats = features_for(rows)
            y = np.array([manifest[u].label for u in batch])
            emb, cache = enc.forward(feats)
            out = loss(emb, y, head)
            if not np.isfinite(out.value):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {bi}")
            grads, _ = enc.backward(out.grad_embeddings, cache)
            grads.update({f"head.{k}": v for k, v in out.grad_weights.items()})
            adam_step(params, grads, state)
            total += out.value
        n = len(bplan.batches)
        mean = total / n if n else float("nan")
        ckpt.trace.append((epoch, mean, n))
        log.info("epoch %d: mean loss %.5f over %d batches", epoch, mean, n)
        if checkpoint_dir and run.checkpoint_every and epoch % run.checkpoint_every == 0:
            Path(checkpoint_dir).mkdir(parents=True, exist_ok=True)
            ckpt.save(Path(checkpoint_dir) / f"epoch{epoch:03d}.ckpt")
    return ckpt


def embed_utterance(ckpt: Checkpoint, w: Waveform) -> np.ndarray:
    """Embeddings for one utterance: one row per 1 s chunk, or one row for the whole signal."""
    if ckpt.run.feed == "one_sec":
        feats = features_for(chunks(w.samples), w.rate)
    else:
        feats = extract(w).coeffs[None]
    return ckpt.encoder(feats)


def evaluate(
    ckpt: Checkpoint,
    manifest: TrialManifest,
    load: AudioLoader,
    plan: DegradationPlan | None = None,
    aggregate: str = "mean",
) -> ScoreFile:
    """Score every utterance; failures are recorded per utterance and skipped."""
    if plan is not None:
        load = DegradedAudio(load, plan)
    agg = {"mean": np.mean, "median": np.median, "max": np.max}[aggregate]
    entries, errors = {}, {}
    for rec in manifest:
        try:
            w = load(rec.utt_id)
            entries[rec.utt_id] = float(agg(head_scores(embed_utterance(ckpt, w), ckpt.head)))
        except (OSError, KeyError, FrontendError, ValueError) as e:
            errors[rec.utt_id] = f"{type(e).__name__}: {e}"
            log.warning("scoring %s failed: %s", rec.utt_id, e)
    return ScoreFile(entries, {}, errors)
