"""Seeded RNG derivation and parameter initialization.

All randomness in the project flows through `derive_rng`: a PCG64 generator
seeded with (root seed, crc32 of a purpose label, *indices). Because every
consumer derives its own stream statelessly, training can resume from a
checkpoint and reproduce an uninterrupted run bit for bit without ever
serializing generator state.
"""

from __future__ import annotations

import zlib

import numpy as np

from .lstm import LstmWeights
from .tensor import Tensor


def derive_rng(seed: int, label: str, *indices: int) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(label.encode("utf-8")), *indices])


def uniform_matrix(rng: np.random.Generator, out_dim: int, in_dim: int, dtype) -> np.ndarray:
    s = 1.0 / np.sqrt(in_dim)
    return rng.uniform(-s, s, size=(out_dim, in_dim)).astype(dtype)


def init_linear(rng: np.random.Generator, out_dim: int, in_dim: int, dtype) -> tuple[Tensor, Tensor]:
    w = Tensor(uniform_matrix(rng, out_dim, in_dim, dtype), requires_grad=True)
    b = Tensor(np.zeros(out_dim, dtype=dtype), requires_grad=True)
    return w, b


def init_lstm(rng: np.random.Generator, hidden: int, in_dim: int, dtype) -> LstmWeights:
    """Uniform +-1/sqrt(fan_in) weights, zero biases except forget bias 1.0."""
    wx = Tensor(uniform_matrix(rng, 4 * hidden, in_dim, dtype), requires_grad=True)
    wh = Tensor(uniform_matrix(rng, 4 * hidden, hidden, dtype), requires_grad=True)
    b = np.zeros(4 * hidden, dtype=dtype)
    b[hidden : 2 * hidden] = 1.0
    return LstmWeights(wx, wh, Tensor(b, requires_grad=True))


def init_embedding(rng: np.random.Generator, vocab: int, dim: int, dtype) -> Tensor:
    return Tensor(uniform_matrix(rng, vocab, dim, dtype), requires_grad=True)
