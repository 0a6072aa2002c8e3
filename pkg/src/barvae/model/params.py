"""Parameter construction and naming.

Parameters live in a flat name->Tensor dict so checkpoints, the optimizer,
and the gradient checker all share one addressing scheme. Initial LSTM
states produced by a projection are laid out [h_l0 | c_l0 | h_l1 | c_l1].
"""

from __future__ import annotations

import numpy as np

from ..nn.init import derive_rng, init_embedding, init_linear, init_lstm
from ..nn.lstm import LstmWeights
from ..nn.tensor import Tensor
from .config import FLAT, ArchConfig


def _add_lstm(params: dict, rng, prefix: str, hidden: int, in_dim: int, dtype) -> None:
    w = init_lstm(rng, hidden, in_dim, dtype)
    params[f"{prefix}/wx"] = w.wx
    params[f"{prefix}/wh"] = w.wh
    params[f"{prefix}/b"] = w.b


def _add_linear(params: dict, rng, prefix: str, out_dim: int, in_dim: int, dtype) -> None:
    w, b = init_linear(rng, out_dim, in_dim, dtype)
    params[f"{prefix}/w"] = w
    params[f"{prefix}/b"] = b


def build_params(cfg: ArchConfig, seed: int) -> dict[str, Tensor]:
    rng = derive_rng(seed, "init")
    dt = cfg.np_dtype
    p: dict[str, Tensor] = {}

    enc_in = cfg.encoder_embed * cfg.num_streams
    for s, vocab in enumerate(cfg.vocab_sizes):
        p[f"enc/embed/{s}/w"] = init_embedding(rng, vocab, cfg.encoder_embed, dt)
    for i in range(cfg.encoder_layers):
        in_dim = enc_in if i == 0 else 2 * cfg.encoder_hidden
        for d in ("fwd", "bwd"):
            _add_lstm(p, rng, f"enc/l{i}/{d}", cfg.encoder_hidden, in_dim, dt)
    _add_linear(p, rng, "enc/mu", cfg.latent_dim, 2 * cfg.encoder_hidden, dt)
    _add_linear(p, rng, "enc/sigma", cfg.latent_dim, 2 * cfg.encoder_hidden, dt)

    state_width = cfg.decoder_layers * 2 * cfg.decoder_hidden
    if cfg.decoder_kind == FLAT:
        _add_linear(p, rng, "dec/init", state_width, cfg.latent_dim, dt)
        for s, vocab in enumerate(cfg.vocab_sizes):
            p[f"dec/embed/{s}/w"] = init_embedding(rng, vocab, cfg.decoder_embed, dt)
        dec_in = cfg.decoder_embed * cfg.num_streams
        for i in range(cfg.decoder_layers):
            _add_lstm(p, rng, f"dec/l{i}", cfg.decoder_hidden, dec_in if i == 0 else cfg.decoder_hidden, dt)
        for s, (vocab, (_, width)) in enumerate(zip(cfg.vocab_sizes, cfg.head_slices())):
            _add_linear(p, rng, f"dec/head/{s}", vocab, width, dt)
    else:
        _add_linear(p, rng, "con/init", cfg.conductor_layers * 2 * cfg.conductor_hidden, cfg.latent_dim, dt)
        for i in range(cfg.conductor_layers):
            _add_lstm(p, rng, f"con/l{i}", cfg.conductor_hidden, 1 if i == 0 else cfg.conductor_hidden, dt)
        _add_linear(p, rng, "con/out", cfg.conductor_embed, cfg.conductor_hidden, dt)
        for s, vocab in enumerate(cfg.vocab_sizes):
            _add_linear(p, rng, f"dec/seginit/{s}", state_width, cfg.conductor_embed, dt)
            p[f"dec/{s}/embed/w"] = init_embedding(rng, vocab, cfg.decoder_embed, dt)
            bottom_in = cfg.conductor_embed + cfg.decoder_embed
            for i in range(cfg.decoder_layers):
                _add_lstm(p, rng, f"dec/{s}/l{i}", cfg.decoder_hidden, bottom_in if i == 0 else cfg.decoder_hidden, dt)
            _add_linear(p, rng, f"dec/{s}/head", vocab, cfg.decoder_hidden, dt)
    return p


def lstm_view(params: dict[str, Tensor], prefix: str) -> LstmWeights:
    return LstmWeights(params[f"{prefix}/wx"], params[f"{prefix}/wh"], params[f"{prefix}/b"])


def params_to_arrays(params: dict[str, Tensor]) -> dict[str, np.ndarray]:
    return {k: v.data for k, v in params.items()}


def arrays_to_params(arrays: dict[str, np.ndarray], expected: ArchConfig | None = None) -> dict[str, Tensor]:
    params = {k: Tensor(v.copy(), requires_grad=True) for k, v in arrays.items() if not k.startswith("opt/")}
    if expected is not None:
        want = set(build_params(expected, seed=0))
        have = set(params)
        if want != have:
            missing = sorted(want - have)
            extra = sorted(have - want)
            raise ValueError(f"parameter names do not match config: missing {missing}, unexpected {extra}")
    return params
