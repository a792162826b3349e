"""Codec configurations and their ``kind[:param=value,...]`` string form."""

from __future__ import annotations

from dataclasses import dataclass

KINDS = ("g711", "g726", "cvsd", "external", "passthrough")
G726_RATES = (16000, 24000, 32000, 40000)
CVSD_RATES = (16000, 32000, 64000)

# telephony usage category, used when grouping reports
CATEGORY = {
    "g711": "landline",
    "g726": "landline",
    "cvsd": "satellite",
    "external": "external",
    "passthrough": "clean",
}

_DEFAULT_BAND = {"g711": "narrow", "g726": "narrow", "cvsd": "wide", "external": "wide", "passthrough": "wide"}


class CodecConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CodecConfig:
    kind: str = "passthrough"
    bitrate_bps: int | None = None
    law: str | None = None
    loss_rate: float = 0.0
    dtx: bool = False
    band: str | None = None
    external_cmd: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise CodecConfigError(f"unknown codec kind {self.kind!r}")
        if self.band is None:
            object.__setattr__(self, "band", _DEFAULT_BAND[self.kind])
        if self.band not in ("narrow", "wide"):
            raise CodecConfigError(f"band must be narrow or wide, got {self.band!r}")
        if self.kind == "g711":
            if self.law is None:
                object.__setattr__(self, "law", "mu")
            if self.law not in ("mu", "a"):
                raise CodecConfigError(f"law must be mu or a, got {self.law!r}")
        elif self.law is not None:
            raise CodecConfigError("law is only valid for g711")
        if self.kind == "g726":
            if self.bitrate_bps is None:
                object.__setattr__(self, "bitrate_bps", 32000)
            if self.bitrate_bps not in G726_RATES:
                raise CodecConfigError(f"g726 bitrate must be one of {G726_RATES}, got {self.bitrate_bps}")
        elif self.kind == "cvsd":
            if self.bitrate_bps is None:
                object.__setattr__(self, "bitrate_bps", 16000)
            if self.bitrate_bps not in CVSD_RATES:
                raise CodecConfigError(f"cvsd bitrate must be one of {CVSD_RATES}, got {self.bitrate_bps}")
        elif self.bitrate_bps is not None:
            raise CodecConfigError(f"bitrate is not valid for {self.kind}")
        if self.kind in ("g711", "g726") and self.band != "narrow":
            raise CodecConfigError(f"{self.kind} is a narrowband codec")
        if self.kind == "external":
            if not self.external_cmd:
                raise CodecConfigError("external codec needs cmd=")
        elif self.external_cmd is not None:
            raise CodecConfigError("cmd is only valid for external")
        if not 0.0 <= float(self.loss_rate) <= 1.0:
            raise CodecConfigError(f"loss must be in [0, 1], got {self.loss_rate}")
        object.__setattr__(self, "loss_rate", float(self.loss_rate))
        if self.bitrate_bps is not None:
            object.__setattr__(self, "bitrate_bps", int(self.bitrate_bps))

    @property
    def category(self) -> str:
        return CATEGORY[self.kind]

    def __str__(self):
        return format_codec(self)


def _parse_bool(s: str) -> bool:
    v = s.lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise CodecConfigError(f"not a boolean: {s!r}")


def parse_codec(text: str) -> CodecConfig:
    """Parse e.g. ``g726:bitrate=16000,loss=0.1,band=narrow``.

    ``cmd=`` swallows the remainder of the string so external commands may
    contain commas; it must therefore come last.
    """
    text = text.strip()
    kind, _, params = text.partition(":")
    if kind not in KINDS:
        raise CodecConfigError(f"unknown codec kind {kind!r} in {text!r}")
    kw = {}
    while params:
        if params.startswith("cmd="):
            kw["external_cmd"] = params[4:]
            break
        item, _, params = params.partition(",")
        name, eq, value = item.partition("=")
        if not eq:
            raise CodecConfigError(f"bad parameter {item!r} in {text!r}")
        name, value = name.strip(), value.strip()
        try:
            if name == "bitrate":
                kw["bitrate_bps"] = int(value)
            elif name == "law":
                kw["law"] = value
            elif name == "loss":
                kw["loss_rate"] = float(value)
            elif name == "dtx":
                kw["dtx"] = _parse_bool(value)
            elif name == "band":
                kw["band"] = value
            else:
                raise CodecConfigError(f"unknown parameter {name!r} in {text!r}")
        except ValueError as e:
            if isinstance(e, CodecConfigError):
                raise
            raise CodecConfigError(f"bad value for {name!r} in {text!r}") from None
    return CodecConfig(kind=kind, **kw)


def format_codec(cfg: CodecConfig) -> str:
    """Canonical string; default-valued parameters are omitted."""
    parts = []
    if cfg.law is not None:
        parts.append(f"law={cfg.law}")
    if cfg.bitrate_bps is not None:
        parts.append(f"bitrate={cfg.bitrate_bps}")
    if cfg.loss_rate:
        parts.append(f"loss={cfg.loss_rate!r}")
    if cfg.dtx:
        parts.append("dtx=true")
    if cfg.band != _DEFAULT_BAND[cfg.kind]:
        parts.append(f"band={cfg.band}")
    if cfg.external_cmd is not None:
        parts.append(f"cmd={cfg.external_cmd}")
    return cfg.kind + (":" + ",".join(parts) if parts else "")
