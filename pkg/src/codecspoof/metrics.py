"""EER, weighted score fusion and grouped evaluation reports."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .manifest import DegradationPlan, TrialManifest

GROUP_KEYS = ("codec", "category", "bitrate", "loss_rate", "dtx", "band")
REPORT_HEADER = ("group_key", "eer", "n_bona", "n_spoof", "q1", "median", "q3", "min", "max")


class MetricsError(ValueError):
    pass


def compute_eer(bona: Sequence[float], spoof: Sequence[float]) -> float:
    """Equal error rate in percent.

    A trial is accepted iff score >= threshold. Thresholds are the distinct
    scores plus +inf; FAR/FRR are evaluated at each, and the EER is linearly
    interpolated between the first point with FAR <= FRR and its predecessor.
    """
    bona = np.asarray(bona, dtype=np.float64)
    spoof = np.asarray(spoof, dtype=np.float64)
    if bona.size == 0 or spoof.size == 0:
        raise MetricsError("EER needs at least one bonafide and one spoof score")
    thresholds = np.unique(np.concatenate([bona, spoof]))
    # accepted counts: scores >= t  ==  n - (scores < t)
    far = (spoof.size - np.searchsorted(np.sort(spoof), thresholds, side="left")) / spoof.size
    frr = np.searchsorted(np.sort(bona), thresholds, side="left") / bona.size
    far = np.append(far, 0.0)
    frr = np.append(frr, 1.0)
    return 100.0 * _crossing(far, frr)


def _crossing(far: np.ndarray, frr: np.ndarray) -> float:
    d = far - frr
    k = int(np.argmax(d <= 0))
    if k == 0:
        return float(far[0])
    t = d[k - 1] / (d[k - 1] - d[k])
    return float(far[k - 1] + t * (far[k] - far[k - 1]))


@dataclass
class ScoreFile:
    entries: dict[str, float] = field(default_factory=dict)
    metadata: dict[str, str] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for u, s in self.entries.items():
            if not math.isfinite(s):
                raise MetricsError(f"non-finite score for {u!r}")

    def __len__(self):
        return len(self.entries)


def format_scores(sf: ScoreFile) -> str:
    lines = [f"# {k}={v}\n" for k, v in sorted(sf.metadata.items())]
    lines += [f"{u}\t{s:.9g}\n" for u, s in sf.entries.items()]
    return "".join(lines)


def parse_scores(text: str) -> ScoreFile:
    entries, meta = {}, {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            meta[k] = v
            continue
        try:
            utt, value = line.split("\t")
            score = float(value)
        except ValueError:
            raise MetricsError(f"score line {lineno}: expected utt_id<TAB>score") from None
        if utt in entries:
            raise MetricsError(f"score line {lineno}: duplicate utt_id {utt!r}")
        entries[utt] = score
    return ScoreFile(entries, meta)


def write_scores(sf: ScoreFile, path) -> None:
    path = Path(path)
    path.write_text(format_scores(sf), encoding="utf-8")
    if sf.errors:
        err = path.with_name(path.name + ".errors")
        err.write_text("".join(f"{u}\t{m}\n" for u, m in sf.errors.items()), encoding="utf-8")


def read_scores(path) -> ScoreFile:
    return parse_scores(Path(path).read_text(encoding="utf-8"))


def fuse(files: Sequence[ScoreFile], weights: Sequence[float]) -> ScoreFile:
    """Per-utterance convex combination sum(w_i s_i) / sum(w_i)."""
    if len(files) != len(weights) or not files:
        raise MetricsError("need one weight per score file")
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w < 0) or not np.any(w > 0):
        raise MetricsError("weights must be non-negative and not all zero")
    ids = set(files[0].entries)
    for f in files[1:]:
        if set(f.entries) != ids:
            diff = sorted(ids.symmetric_difference(f.entries))
            raise MetricsError(f"utterance sets differ: {diff[:10]}{' ...' if len(diff) > 10 else ''}")
    w = w / w.sum()
    # zero-weight inputs are skipped and the sum starts at the first term, so -0.0 survives
    terms = [(wi, f) for wi, f in zip(w, files) if wi > 0]
    fused = {}
    for u in files[0].entries:
        acc = terms[0][0] * terms[0][1].entries[u]
        for wi, f in terms[1:]:
            acc += wi * f.entries[u]
        fused[u] = acc
    # shared metadata survives; callers annotate the weights if they want them recorded
    meta = dict(files[0].metadata) if all(f.metadata == files[0].metadata for f in files) else {}
    return ScoreFile(fused, meta)


def group_key(cfg, group_by: str) -> str:
    if group_by == "codec":
        return str(cfg)
    if group_by == "category":
        return cfg.category
    if group_by == "bitrate":
        return str(cfg.bitrate_bps) if cfg.bitrate_bps is not None else "none"
    if group_by == "loss_rate":
        return repr(cfg.loss_rate)
    if group_by == "dtx":
        return "dtx" if cfg.dtx else "no_dtx"
    if group_by == "band":
        return cfg.band
    raise MetricsError(f"unknown group_by {group_by!r}")


def _sort_key(k: str):
    try:
        return (0, float(k), k)
    except ValueError:
        return (1, 0.0, k)


@dataclass
class GroupResult:
    key: str
    eer: float | None  # None when only one class is present
    n_bona: int
    n_spoof: int
    summary: tuple[float, float, float, float, float]  # q1, median, q3, min, max
    bona_scores: list[float] = field(default_factory=list, repr=False)
    spoof_scores: list[float] = field(default_factory=list, repr=False)

    @property
    def computable(self) -> bool:
        return self.eer is not None


@dataclass
class EvalReport:
    overall_eer: float | None
    overall: GroupResult
    groups: list[GroupResult]
    group_by: str


def _group(key, bona, spoof) -> GroupResult:
    allv = np.asarray(bona + spoof, dtype=np.float64)
    q1, med, q3 = np.percentile(allv, [25, 50, 75])
    eer = compute_eer(bona, spoof) if bona and spoof else None
    return GroupResult(key, eer, len(bona), len(spoof), (q1, med, q3, allv.min(), allv.max()), sorted(bona), sorted(spoof))


def report(scores: ScoreFile, manifest: TrialManifest, plan: DegradationPlan | None, group_by: str) -> EvalReport:
    """Overall and per-group EERs for the scored utterances of the manifest."""
    if group_by not in GROUP_KEYS:
        raise MetricsError(f"unknown group_by {group_by!r}")
    groups: dict[str, tuple[list, list]] = {}
    all_b, all_s = [], []
    for rec in manifest:
        if rec.utt_id not in scores.entries:
            continue
        s = scores.entries[rec.utt_id]
        if plan is None:
            key = "clean"
        elif rec.utt_id in plan:
            key = group_key(plan[rec.utt_id], group_by)
        else:
            raise MetricsError(f"plan does not cover scored utterance {rec.utt_id!r}")
        b, sp = groups.setdefault(key, ([], []))
        (b if rec.label == 0 else sp).append(s)
        (all_b if rec.label == 0 else all_s).append(s)
    if not all_b and not all_s:
        raise MetricsError("no scored utterances in manifest")
    overall = _group("ALL", all_b, all_s)
    results = [_group(k, *groups[k]) for k in sorted(groups, key=_sort_key)]
    return EvalReport(overall.eer, overall, results, group_by)


def _fmt(v) -> str:
    return "nan" if v is None else f"{v:.6g}"


def format_report(rep: EvalReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_HEADER)
    for g in [rep.overall, *rep.groups]:
        w.writerow([g.key, _fmt(g.eer), g.n_bona, g.n_spoof, *(_fmt(v) for v in g.summary)])
    return buf.getvalue()


def format_violin(rep: EvalReport) -> str:
    """Raw per-group score lists for violin plots: ``group_key,key,score``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("group_key", "key", "score"))
    for g in rep.groups:
        for s in g.bona_scores:
            w.writerow([g.key, "bonafide", f"{s:.9g}"])
        for s in g.spoof_scores:
            w.writerow([g.key, "spoof", f"{s:.9g}"])
    return buf.getvalue()
