"""Trial protocols, train/dev splits and cyclic codec assignment."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .codecsim.config import CodecConfig, format_codec, parse_codec

KEYS = ("bonafide", "spoof")
LABELS = {"bonafide": 0, "spoof": 1}


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class TrialRecord:
    speaker_id: str
    utt_id: str
    key: str
    attack_id: str | None = None
    codec_tag: str | None = None

    def __post_init__(self):
        if self.key not in KEYS:
            raise ManifestError(f"unknown key {self.key!r} for {self.utt_id}")

    @property
    def label(self) -> int:
        """0 for bonafide, 1 for spoof."""
        return LABELS[self.key]


@dataclass(frozen=True)
class TrialManifest:
    records: tuple[TrialRecord, ...] = ()
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        records = tuple(self.records)
        object.__setattr__(self, "records", records)
        index = {}
        for i, rec in enumerate(records):
            if rec.utt_id in index:
                raise ManifestError(f"duplicate utt_id {rec.utt_id!r} (record {i + 1})")
            index[rec.utt_id] = i
        object.__setattr__(self, "_index", index)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __contains__(self, utt_id):
        return utt_id in self._index

    def __getitem__(self, utt_id: str) -> TrialRecord:
        return self.records[self._index[utt_id]]

    @property
    def utt_ids(self) -> list[str]:
        return [r.utt_id for r in self.records]

    @property
    def counts(self) -> dict[str, int]:
        c = Counter(r.key for r in self.records)
        return {k: c.get(k, 0) for k in KEYS}

    def subset(self, utt_ids: Iterable[str]) -> "TrialManifest":
        return TrialManifest(tuple(self[u] for u in utt_ids))


def _opt(tok: str) -> str | None:
    return None if tok == "-" else tok


def parse_manifest(text: str) -> TrialManifest:
    """Parse protocol lines into a manifest.

    Two layouts are accepted: ``speaker utt key [attack] [codec_tag]`` and the
    ASVspoof one, ``speaker utt - attack key``, where the key is the last field.
    ``-`` stands for an absent field in either layout.
    """
    records = []
    seen = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) < 3:
            raise ManifestError(f"line {lineno}: expected at least 3 fields, got {len(fields)}")
        if fields[2] in KEYS:
            speaker, utt, key = fields[:3]
            rest = fields[3:]
            if len(rest) > 2:
                raise ManifestError(f"line {lineno}: too many fields")
            attack = _opt(rest[0]) if rest else None
            codec = _opt(rest[1]) if len(rest) > 1 else None
        elif fields[-1] in KEYS and len(fields) >= 4:
            speaker, utt, key = fields[0], fields[1], fields[-1]
            attack = _opt(fields[-2])
            codec = None
        else:
            raise ManifestError(f"line {lineno}: unknown key token in {line.strip()!r}")
        if utt in seen:
            raise ManifestError(
                f"line {lineno}: duplicate utt_id {utt!r} (first seen on line {seen[utt]})"
            )
        seen[utt] = lineno
        records.append(TrialRecord(speaker, utt, key, attack, codec))
    return TrialManifest(tuple(records))


def format_manifest(manifest: TrialManifest) -> str:
    lines = []
    for r in manifest:
        lines.append(" ".join([r.speaker_id, r.utt_id, r.key, r.attack_id or "-", r.codec_tag or "-"]))
    return "".join(line + "\n" for line in lines)


def read_manifest(path) -> TrialManifest:
    return parse_manifest(Path(path).read_text(encoding="utf-8"))


def write_manifest(manifest: TrialManifest, path) -> None:
    Path(path).write_text(format_manifest(manifest), encoding="utf-8")


def build_splits(manifest: TrialManifest, seed: int, dev_count: int) -> tuple[TrialManifest, TrialManifest]:
    """Draw ``dev_count`` records uniformly without replacement for dev.

    Both outputs keep the input order. The draw is not stratified by class or attack.
    """
    n = len(manifest)
    if not 0 <= dev_count <= n:
        raise ManifestError(f"dev_count {dev_count} out of range for {n} records")
    rng = np.random.default_rng(seed)
    dev_idx = set(rng.choice(n, size=dev_count, replace=False).tolist())
    train = [r for i, r in enumerate(manifest.records) if i not in dev_idx]
    dev = [r for i, r in enumerate(manifest.records) if i in dev_idx]
    return TrialManifest(tuple(train)), TrialManifest(tuple(dev))


@dataclass(frozen=True)
class DegradationPlan:
    entries: dict[str, CodecConfig]
    codec_list: tuple[CodecConfig, ...]
    seed: int = 0

    def __getitem__(self, utt_id: str) -> CodecConfig:
        return self.entries[utt_id]

    def __contains__(self, utt_id):
        return utt_id in self.entries

    def __len__(self):
        return len(self.entries)

    def counts(self) -> dict[str, int]:
        """Utterances per codec string, in codec_list order."""
        c = Counter(format_codec(cfg) for cfg in self.entries.values())
        return {format_codec(cfg): c.get(format_codec(cfg), 0) for cfg in self.codec_list}


def assign_degradations(manifest: TrialManifest, codecs: Sequence[CodecConfig], seed: int) -> DegradationPlan:
    """Round-robin the codec list over a seeded shuffle of the records.

    Record ``i`` of the shuffled order gets ``codecs[i % K]``, so the first
    ``N mod K`` configs receive one extra utterance.
    """
    codecs = tuple(codecs)
    if not codecs:
        raise ManifestError("empty codec list")
    order = np.random.default_rng(seed).permutation(len(manifest))
    entries = {}
    for pos, idx in enumerate(order):
        entries[manifest.records[idx].utt_id] = codecs[pos % len(codecs)]
    # keep manifest order in the mapping so plan files follow the manifest
    entries = {u: entries[u] for u in manifest.utt_ids}
    return DegradationPlan(entries, codecs, seed)


def tag_manifest(manifest: TrialManifest, plan: DegradationPlan) -> TrialManifest:
    """Copy of the manifest with codec_tag filled from the plan."""
    missing = [u for u in manifest.utt_ids if u not in plan]
    if missing:
        raise ManifestError(f"plan does not cover {len(missing)} utterances, e.g. {missing[0]!r}")
    return TrialManifest(tuple(replace(r, codec_tag=format_codec(plan[r.utt_id])) for r in manifest))


def format_plan(plan: DegradationPlan) -> str:
    return "".join(f"{u}\t{format_codec(cfg)}\n" for u, cfg in plan.entries.items())


def parse_plan(text: str, seed: int = 0) -> DegradationPlan:
    entries = {}
    codecs = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            utt, spec = line.split("\t", 1)
        except ValueError:
            raise ManifestError(f"plan line {lineno}: expected utt_id<TAB>codec") from None
        if utt in entries:
            raise ManifestError(f"plan line {lineno}: duplicate utt_id {utt!r}")
        cfg = parse_codec(spec.strip())
        entries[utt] = cfg
        codecs.setdefault(format_codec(cfg), cfg)
    return DegradationPlan(entries, tuple(codecs.values()), seed)


def write_plan(plan: DegradationPlan, path) -> None:
    Path(path).write_text(format_plan(plan), encoding="utf-8")


def read_plan(path, seed: int = 0) -> DegradationPlan:
    return parse_plan(Path(path).read_text(encoding="utf-8"), seed)


def read_codec_list(path) -> list[CodecConfig]:
    """One codec string per line; ``#`` starts a comment."""
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            out.append(parse_codec(line))
    return out


def sweep_degradations(
    manifest: TrialManifest, codecs: Sequence[CodecConfig], seed: int
) -> tuple[TrialManifest, DegradationPlan, dict[str, str]]:
    """Every record under every codec.

    Copies get ids ``<utt>__c<k>``; returns the expanded manifest, its plan and
    a map from copy id to source utt_id.
    """
    codecs = tuple(codecs)
    if not codecs:
        raise ManifestError("empty codec list")
    width = len(str(len(codecs) - 1))
    records, entries, source = [], {}, {}
    for k, cfg in enumerate(codecs):
        for r in manifest:
            uid = f"{r.utt_id}__c{k:0{width}d}"
            records.append(replace(r, utt_id=uid, codec_tag=format_codec(cfg)))
            entries[uid] = cfg
            source[uid] = r.utt_id
    return TrialManifest(tuple(records)), DegradationPlan(entries, codecs, seed), source
