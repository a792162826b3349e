"""Command line entry point: ``codecspoof {synth,degrade,extract,train,score,fuse,report}``.

Settings come from an optional YAML config (one section per subcommand, plus
top-level ``seed`` and ``jobs``) and can be overridden by flags. Relative
paths in the config resolve against the config file's directory. Every command
writes ``<output>.stamp.json`` holding a hash of its effective settings;
rerunning with the same settings is a no-op unless ``--force`` is given.

Exit codes: 0 success, 2 configuration/validation error, 3 runtime data error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import yaml

from . import manifest as mf
from .batcher import FEEDS, STRATEGIES, BatchError
from .codecsim import CodecConfigError, ExternalCodecError, WaveformError, degrade, read_wav, utterance_seed, write_wav
from .codecsim.config import parse_codec
from .frontend import FeatureCache, FrontendError, extract
from .losses import KINDS as LOSS_KINDS
from .metrics import GROUP_KEYS, MetricsError, format_report, format_violin, fuse, read_scores, report, write_scores
from .synth import SynthConfig, synth_corpus, write_corpus
from .trainer import Checkpoint, EncoderConfig, EncoderError, TrainingError, TrainRunConfig, evaluate, train

log = logging.getLogger("codecspoof")

EXIT_CONFIG = 2
EXIT_DATA = 3


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


# ---------------------------------------------------------------- settings


def _load_config(path: str | None) -> tuple[dict, Path]:
    if path is None:
        return {}, Path.cwd()
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return data, p.resolve().parent


class Settings:
    """Merged view of a config section and command-line overrides."""

    def __init__(self, command: str, args: argparse.Namespace):
        cfg, self.base = _load_config(args.config)
        section = cfg.get(command) or {}
        if not isinstance(section, dict):
            raise ConfigError(f"section {command!r} must be a mapping")
        self.values = dict(section)
        for k, v in vars(args).items():
            if k in ("config", "command", "func", "force", "verbose", "jobs", "seed") or v is None:
                continue
            self.values[k] = v
        self.seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        self.jobs = args.jobs if args.jobs is not None else int(cfg.get("jobs", 1))
        self.force = args.force
        self.command = command

    def get(self, key, default=None):
        return self.values.get(key, default)

    def require(self, key):
        if self.values.get(key) is None:
            raise ConfigError(f"{self.command}: missing setting {key!r}")
        return self.values[key]

    def path(self, key, must_exist=False, default=None) -> Path | None:
        v = self.values.get(key, default)
        if v is None:
            return None
        p = Path(v)
        if not p.is_absolute():
            p = self.base / p
        if must_exist and not p.exists():
            raise ConfigError(f"{self.command}: {key} path does not exist: {v}")
        return p

    def require_path(self, key, must_exist=True) -> Path:
        self.require(key)
        return self.path(key, must_exist=must_exist)

    def digest(self) -> str:
        blob = json.dumps({"command": self.command, "seed": self.seed, "settings": self.values}, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()


def _stamp_path(out: Path) -> Path:
    return out.with_name(out.name + ".stamp.json")


def _up_to_date(s: Settings, out: Path) -> bool:
    stamp = _stamp_path(out)
    if s.force or not out.exists() or not stamp.exists():
        return False
    try:
        return json.loads(stamp.read_text())["config_hash"] == s.digest()
    except (ValueError, KeyError):
        return False


def _write_stamp(s: Settings, out: Path, extra: dict | None = None) -> None:
    stamp = {"command": s.command, "config_hash": s.digest(), "seed": s.seed}
    if extra:
        stamp.update(extra)
    _stamp_path(out).write_text(json.dumps(stamp, sort_keys=True, indent=1) + "\n")


def _read_manifest(p: Path) -> mf.TrialManifest:
    try:
        return mf.read_manifest(p)
    except mf.ManifestError as e:
        raise ConfigError(f"{p}: {e}") from None


def _codec_list(s: Settings) -> list:
    inline = s.get("codecs")
    try:
        if inline:
            return [parse_codec(c) for c in inline]
        return mf.read_codec_list(s.require_path("codec_list"))
    except CodecConfigError as e:
        raise ConfigError(f"bad codec: {e}") from None


def _wav_loader(root: Path):
    def load(utt_id: str):
        return read_wav(root / f"{utt_id}.wav")

    return load


def _map(jobs: int, fn, items):
    if jobs <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- commands


def cmd_synth(s: Settings) -> None:
    out = s.require_path("out", must_exist=False)
    target = out / "manifest.txt"
    if _up_to_date(s, target):
        log.info("synth: %s is up to date", target)
        return
    cfg = SynthConfig(
        n_utts=int(s.get("n_utts", 200)),
        n_speakers=int(s.get("n_speakers", 4)),
        spoof_fraction=float(s.get("spoof_fraction", 0.5)),
        min_dur=float(s.get("min_dur", 1.0)),
        max_dur=float(s.get("max_dur", 2.0)),
        seed=s.seed,
        prefix=str(s.get("prefix", "T")),
    )
    manifest, audio = synth_corpus(cfg)
    write_corpus(manifest, audio, out)
    _write_stamp(s, target, {"n_utts": cfg.n_utts})
    log.info("synth: wrote %d utterances to %s", len(manifest), out)


def cmd_degrade(s: Settings) -> None:
    manifest = _read_manifest(s.require_path("manifest"))
    audio_root = s.require_path("audio_root")
    codecs = _codec_list(s)
    out = s.require_path("out", must_exist=False)
    mode = s.get("mode", "cyclic")
    if mode == "cyclic":
        plan = mf.assign_degradations(manifest, codecs, s.seed)
        tagged = mf.tag_manifest(manifest, plan)
        source = {u: u for u in manifest.utt_ids}
    elif mode == "sweep":
        tagged, plan, source = mf.sweep_degradations(manifest, codecs, s.seed)
    else:
        raise ConfigError(f"degrade: mode must be cyclic or sweep, got {mode!r}")
    wav_out = out / "wav"
    load = _wav_loader(audio_root)

    def work(utt):
        target = wav_out / f"{utt}.wav"
        if target.exists() and not s.force:
            return 0
        w = degrade(load(source[utt]), plan[utt], utterance_seed(s.seed, utt))
        write_wav(w, target)
        return 1

    wav_out.mkdir(parents=True, exist_ok=True)
    done = sum(_map(s.jobs, work, list(plan.entries)))
    mf.write_plan(plan, out / "plan.txt")
    mf.write_manifest(tagged, out / "manifest.txt")
    _write_stamp(s, out / "plan.txt", {"codecs": len(codecs), "utterances": len(plan)})
    log.info("degrade: %d of %d files written; per codec: %s", done, len(plan), plan.counts())


def cmd_extract(s: Settings) -> None:
    manifest = _read_manifest(s.require_path("manifest"))
    audio_root = s.require_path("audio_root")
    cache = FeatureCache(s.require_path("out", must_exist=False))
    load = _wav_loader(audio_root)
    todo = [u for u in manifest.utt_ids if s.force or u not in cache]

    def work(utt):
        return extract(load(utt), utt_id=utt)

    for fm in _map(s.jobs, work, todo):
        cache.put(fm)
    cache.save_index()
    _write_stamp(s, cache.index_path)
    log.info("extract: %d new feature files in %s", len(todo), cache.root)


def _run_config(s: Settings) -> TrainRunConfig:
    enc = s.get("encoder") or {}
    loss = s.get("loss") or {}
    if not isinstance(enc, dict) or not isinstance(loss, dict):
        raise ConfigError("train: encoder and loss must be mappings")
    try:
        encoder = EncoderConfig(
            conv_blocks=tuple(tuple(b) for b in enc.get("conv_blocks", EncoderConfig.conv_blocks)),
            embed_dim=int(enc.get("embed_dim", 256)),
            seed=int(enc.get("seed", s.seed)),
        )
        run = TrainRunConfig(
            epochs=int(s.get("epochs", 10)),
            batch_size=int(s.get("batch_size", 32)),
            feed=s.get("feed", "one_sec"),
            batching=s.get("batching", "random"),
            loss_kind=loss.get("kind", "oc_softmax"),
            alpha=float(loss.get("alpha", 20.0)),
            m=float(loss.get("m", 0.3)),
            m0=float(loss.get("m0", 0.9)),
            m1=float(loss.get("m1", 0.2)),
            encoder=encoder,
            lr=float(s.get("lr", 3e-4)),
            seed=s.seed,
            checkpoint_every=int(s.get("checkpoint_every", 0)),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"train: {e}") from None
    if run.feed not in FEEDS:
        raise ConfigError(f"train: feed must be one of {FEEDS}")
    if run.batching not in STRATEGIES:
        raise ConfigError(f"train: batching must be one of {STRATEGIES}")
    if run.loss_kind not in LOSS_KINDS:
        raise ConfigError(f"train: loss kind must be one of {LOSS_KINDS}")
    return run


def _plan(s: Settings, key="plan"):
    p = s.path(key, must_exist=True)
    if p is None:
        return None
    try:
        return mf.read_plan(p, seed=s.seed)
    except (mf.ManifestError, CodecConfigError) as e:
        raise ConfigError(f"{p}: {e}") from None


def cmd_train(s: Settings) -> None:
    manifest = _read_manifest(s.require_path("manifest"))
    audio_root = s.require_path("audio_root")
    run = _run_config(s)
    plan = _plan(s)
    out = s.require_path("out", must_exist=False)
    ckpt_path = out / "model.ckpt"
    if _up_to_date(s, ckpt_path):
        log.info("train: %s is up to date", ckpt_path)
        return
    out.mkdir(parents=True, exist_ok=True)
    ckpt = train(
        run,
        manifest,
        _wav_loader(audio_root),
        plan=plan,
        degrade_audio=bool(s.get("degrade_on_the_fly", False)),
        checkpoint_dir=out,
    )
    ckpt.save(ckpt_path)
    lines = ["epoch,mean_loss,batches\n"] + [f"{e},{v:.9g},{n}\n" for e, v, n in ckpt.trace]
    (out / "loss_trace.csv").write_text("".join(lines))
    _write_stamp(s, ckpt_path, {"epochs": run.epochs})


def cmd_score(s: Settings) -> None:
    ckpt_path = s.require_path("checkpoint")
    manifest = _read_manifest(s.require_path("manifest"))
    audio_root = s.require_path("audio_root")
    out = s.require_path("out", must_exist=False)
    if _up_to_date(s, out):
        log.info("score: %s is up to date", out)
        return
    try:
        ckpt = Checkpoint.load(ckpt_path)
    except (ValueError, KeyError) as e:
        raise DataError(f"{ckpt_path}: {e}") from None
    scores = evaluate(ckpt, manifest, _wav_loader(audio_root), aggregate=s.get("aggregate", "mean"))
    scores.metadata = {"checkpoint": ckpt_path.name, "manifest": Path(s.require("manifest")).name}
    out.parent.mkdir(parents=True, exist_ok=True)
    write_scores(scores, out)
    _write_stamp(s, out, {"scored": len(scores), "errors": len(scores.errors)})
    if scores.errors:
        log.warning("score: %d utterances failed, see %s.errors", len(scores.errors), out.name)


def cmd_fuse(s: Settings) -> None:
    inputs = s.require("inputs")
    weights = [float(w) for w in s.require("weights")]
    paths = []
    for p in inputs:
        q = Path(p) if Path(p).is_absolute() else s.base / p
        if not q.exists():
            raise ConfigError(f"fuse: score file not found: {p}")
        paths.append(q)
    out = s.require_path("out", must_exist=False)
    try:
        fused = fuse([read_scores(p) for p in paths], weights)
    except MetricsError as e:
        raise DataError(str(e)) from None
    fused.metadata = {"fused": ",".join(p.name for p in paths), "weights": ",".join(f"{w:g}" for w in weights)}
    out.parent.mkdir(parents=True, exist_ok=True)
    write_scores(fused, out)
    _write_stamp(s, out)


def cmd_report(s: Settings) -> None:
    scores = read_scores(s.require_path("scores"))
    manifest = _read_manifest(s.require_path("manifest"))
    plan = _plan(s)
    group_by = s.get("group_by", "codec")
    if group_by not in GROUP_KEYS:
        raise ConfigError(f"report: group_by must be one of {GROUP_KEYS}")
    out = s.require_path("out", must_exist=False)
    try:
        rep = report(scores, manifest, plan, group_by)
    except MetricsError as e:
        raise DataError(str(e)) from None
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(format_report(rep))
    out.with_name(out.stem + ".violin.csv").write_text(format_violin(rep))
    _write_stamp(s, out)
    log.info("report: overall EER %s%%", "n/a" if rep.overall_eer is None else f"{rep.overall_eer:.2f}")


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file")
    common.add_argument("--seed", type=int, help="global seed (overrides config)")
    common.add_argument("--jobs", type=int, help="worker threads for degrade/extract")
    common.add_argument("--force", action="store_true", help="recompute existing outputs")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="codecspoof", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate the synthetic toy corpus")
    p.add_argument("--out")
    p.add_argument("--n-utts", dest="n_utts", type=int)
    p.add_argument("--n-speakers", dest="n_speakers", type=int)
    p.add_argument("--spoof-fraction", dest="spoof_fraction", type=float)
    p.add_argument("--prefix")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("degrade", parents=[common], help="apply a codec list to a corpus")
    p.add_argument("--manifest")
    p.add_argument("--audio-root", dest="audio_root")
    p.add_argument("--codec-list", dest="codec_list")
    p.add_argument("--codec", dest="codecs", action="append", help="codec string; repeatable, overrides --codec-list")
    p.add_argument("--mode", choices=("cyclic", "sweep"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("extract", parents=[common], help="cache LFCC features")
    p.add_argument("--manifest")
    p.add_argument("--audio-root", dest="audio_root")
    p.add_argument("--out")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", parents=[common], help="train encoder and loss head")
    p.add_argument("--manifest")
    p.add_argument("--audio-root", dest="audio_root")
    p.add_argument("--plan", help="degradation plan (codec tags; degraded on the fly with --degrade-on-the-fly)")
    p.add_argument("--degrade-on-the-fly", dest="degrade_on_the_fly", action="store_true", default=None)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--feed", choices=FEEDS)
    p.add_argument("--batching", choices=STRATEGIES)
    p.add_argument("--lr", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", parents=[common], help="score a manifest with a checkpoint")
    p.add_argument("--checkpoint")
    p.add_argument("--manifest")
    p.add_argument("--audio-root", dest="audio_root")
    p.add_argument("--aggregate", choices=("mean", "median", "max"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("fuse", parents=[common], help="weighted score fusion")
    p.add_argument("--inputs", nargs="+")
    p.add_argument("--weights", nargs="+", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("report", parents=[common], help="EER report grouped by codec parameters")
    p.add_argument("--scores")
    p.add_argument("--manifest")
    p.add_argument("--plan")
    p.add_argument("--group-by", dest="group_by", choices=GROUP_KEYS)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        settings = Settings(args.command, args)
        args.func(settings)
    except (ConfigError, BatchError) as e:
        print(f"codecspoof {args.command}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, WaveformError, FrontendError, ExternalCodecError, mf.ManifestError, MetricsError, TrainingError, EncoderError, OSError) as e:
        print(f"codecspoof {args.command}: {e}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
