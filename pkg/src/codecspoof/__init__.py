"""Codec-degraded anti-spoofing experiments at desk scale."""

from importlib.resources import files

__version__ = "0.1.0"


def example_codec_list(name: str = "ver1"):
    """Path of a bundled illustrative codec list (``ver1``: 16 entries, ``ver2``: 45)."""
    return files(__package__) / "data" / f"codecs_{name}.txt"
