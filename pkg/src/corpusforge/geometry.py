"""Sequence-length and attention-layout arithmetic for the speech stack.

Computes how many post-adapter audio positions a clip occupies (mel framing,
frame subsampling, pre-encoder convolutions, adapter compression) and the
prefix-bidirectional/causal attention layout consumed by a trainer. Lengths
only; no tensors are touched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .manifest import DatasetManifest


@dataclass(frozen=True)
class SpeechGeometryConfig:
    sample_rate_hz: int = 16000
    mel_hop_ms: float = 10.0
    mel_stride: int = 2
    conv_layers: int = 3
    conv_kernel: int = 3
    conv_stride: int = 2
    conv_padding: int = 1
    adapter_layers: int = 2
    adapter_stride: int = 2
    max_audio_s: float = 120.0
    mel_dim: int = 80

    def __post_init__(self) -> None:
        if self.sample_rate_hz <= 0 or self.mel_hop_ms <= 0 or self.mel_dim <= 0:
            raise ValueError("framing parameters must be positive")
        if self.mel_stride < 1 or self.conv_stride < 1 or self.adapter_stride < 1:
            raise ValueError("strides must be >= 1")
        if self.conv_kernel < 1:
            raise ValueError("kernel must be >= 1")
        if self.conv_padding < 0:
            raise ValueError("padding must be >= 0")
        if self.conv_layers < 0 or self.adapter_layers < 0:
            raise ValueError("layer counts must be >= 0")
        if self.max_audio_s <= 0:
            raise ValueError("max_audio_s must be positive")


def layer_out_len(in_len: int, kernel: int, stride: int, padding: int) -> int:
    """Output length of one strided 1D convolution over in_len positions."""
    if in_len < 0:
        raise ValueError("in_len must be >= 0")
    numerator = in_len + 2 * padding - kernel
    if numerator < 0:
        return 0
    return numerator // stride + 1


def audio_token_budget(duration_s: float, config: SpeechGeometryConfig) -> int:
    """Number of post-adapter audio positions for a clip of duration_s seconds."""
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    length = math.floor(duration_s * 1000.0 / config.mel_hop_ms)
    length //= config.mel_stride
    for _ in range(config.conv_layers):
        length = layer_out_len(
            length, config.conv_kernel, config.conv_stride, config.conv_padding
        )
    for _ in range(config.adapter_layers):
        length = layer_out_len(
            length, config.conv_kernel, config.adapter_stride, config.conv_padding
        )
    return length


def length_filter(
    manifest: DatasetManifest, max_s: float = 120.0
) -> tuple[DatasetManifest, list[str]]:
    """Drop records longer than max_s seconds (inclusive cap); order preserved."""
    kept = tuple(rec for rec in manifest.records if rec.duration_s <= max_s)
    dropped = [rec.id for rec in manifest.records if rec.duration_s > max_s]
    return DatasetManifest(records=kept, stage=manifest.stage), dropped


@dataclass(frozen=True)
class MaskLayout:
    """Attention layout: bidirectional over the audio prefix, causal over text.

    rows holds one half-open column interval [start, stop) per attention row;
    every allowed region here is a single contiguous span starting at 0.
    """

    audio_len: int
    text_len: int
    rows: tuple[tuple[int, int], ...]

    def allowed(self, row: int, col: int) -> bool:
        start, stop = self.rows[row]
        return start <= col < stop

    def __len__(self) -> int:
        return self.audio_len + self.text_len


def build_mask_layout(audio_len: int, text_len: int) -> MaskLayout:
    if audio_len < 0 or text_len < 0:
        raise ValueError("lengths must be >= 0")
    rows: list[tuple[int, int]] = []
    for _ in range(audio_len):
        rows.append((0, audio_len))
    for i in range(audio_len, audio_len + text_len):
        rows.append((0, i + 1))
    return MaskLayout(audio_len=audio_len, text_len=text_len, rows=tuple(rows))


def serialize_mask_layout(layout: MaskLayout) -> str:
    """Render as one 'start-end' line per row (inclusive ends, see docs/mask-format.md)."""
    lines = [f"{start}-{stop - 1}" for start, stop in layout.rows]
    header = f"# audio={layout.audio_len} text={layout.text_len}"
    return "\n".join([header, *lines]) + "\n"


def parse_mask_layout(text: str) -> MaskLayout:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ValueError("missing mask layout header")
    fields = dict(part.split("=") for part in lines[0].lstrip("# ").split())
    audio_len = int(fields["audio"])
    text_len = int(fields["text"])
    rows: list[tuple[int, int]] = []
    for line in lines[1:]:
        start, end = line.split("-")
        rows.append((int(start), int(end) + 1))
    layout = MaskLayout(audio_len=audio_len, text_len=text_len, rows=tuple(rows))
    if len(layout.rows) != audio_len + text_len:
        raise ValueError("row count does not match header lengths")
    return layout
