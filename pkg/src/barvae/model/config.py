"""Architecture configuration."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

FLAT = "flat"
HIERARCHICAL = "hierarchical"


@dataclass(frozen=True)
class ArchConfig:
    """Shapes and structure of one model.

    `vocab_sizes` has one entry per token stream (1 for a single instrument,
    3 for the melody/bass/drums trio). `seq_len` must divide evenly into
    `num_segments` bars. Token embeddings are `hidden // embed_divisor` wide.
    Reference scale from the source material: encoder hidden 2048, latent
    512, conductor 1024/512, bottom decoder 1024, U=16, T=32 or 256.
    """

    latent_dim: int
    encoder_hidden: int
    decoder_hidden: int
    seq_len: int
    vocab_sizes: tuple[int, ...] = (130,)
    decoder_kind: str = HIERARCHICAL
    num_segments: int = 16
    conductor_hidden: int = 0
    conductor_embed: int = 0
    encoder_layers: int = 2
    conductor_layers: int = 2
    decoder_layers: int = 2
    embed_divisor: int = 4
    dtype: str = "float64"

    def __post_init__(self):
        if self.decoder_kind not in (FLAT, HIERARCHICAL):
            raise ValueError(f"decoder_kind must be flat or hierarchical, got {self.decoder_kind!r}")
        if len(self.vocab_sizes) not in (1, 3):
            raise ValueError("vocab_sizes must have 1 or 3 entries")
        if any(v < 2 for v in self.vocab_sizes):
            raise ValueError("every vocabulary needs at least 2 symbols")
        if self.seq_len % self.num_segments != 0:
            raise ValueError(f"seq_len {self.seq_len} not divisible by num_segments {self.num_segments}")
        if self.decoder_kind == HIERARCHICAL:
            # Default the conductor widths off the decoder if unset.
            if self.conductor_hidden <= 0:
                object.__setattr__(self, "conductor_hidden", self.decoder_hidden)
            if self.conductor_embed <= 0:
                object.__setattr__(self, "conductor_embed", max(1, self.conductor_hidden // 2))
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")

    @property
    def num_streams(self) -> int:
        return len(self.vocab_sizes)

    @property
    def segment_len(self) -> int:
        return self.seq_len // self.num_segments

    @property
    def encoder_embed(self) -> int:
        return max(1, self.encoder_hidden // self.embed_divisor)

    @property
    def decoder_embed(self) -> int:
        return max(1, self.decoder_hidden // self.embed_divisor)

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    def head_slices(self) -> list[tuple[int, int]]:
        """(offset, width) of the decoder hidden slice feeding each head.

        A single stream sees the whole hidden state. The trio splits it into
        near-equal contiguous pieces (sizes differ by at most one when the
        width is not divisible by three).
        """
        n = self.num_streams
        base, extra = divmod(self.decoder_hidden, n)
        out = []
        off = 0
        for s in range(n):
            width = base + (1 if s < extra else 0)
            out.append((off, width))
            off += width
        return out

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["vocab_sizes"] = list(self.vocab_sizes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ArchConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown ArchConfig fields: {sorted(unknown)}")
        d = dict(d)
        if "vocab_sizes" in d:
            d["vocab_sizes"] = tuple(int(v) for v in d["vocab_sizes"])
        return cls(**d)
