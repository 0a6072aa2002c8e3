"""Encoder, reparameterization, objective, and both decoder families.

Token batches are lists with one (B, T) int array per stream. Logits are
returned per stream as (T*B, vocab) in time-major order, matching
`targets.T.reshape(-1)`; every loss and accuracy computation relies on that
ordering.

Decode modes:

* teacher_forced: inputs come from the targets; whole-sequence fused layers.
* scheduled: per-step coin picks ground truth or the model's own sample as
  the next input; runs stepwise on the graph.
* sampled: inputs are always the model's own samples; no gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import tensor as T
from ..nn.init import derive_rng
from ..nn.lstm import lstm_cell, lstm_layer
from ..nn.tensor import Tensor, no_grad, softmax_np
from .config import FLAT, ArchConfig
from .params import build_params, lstm_view

TEACHER_FORCED = "teacher_forced"
SCHEDULED = "scheduled"
SAMPLED = "sampled"


@dataclass
class DecodeResult:
    logits: list  # per stream: (T*B, vocab) Tensor (graph modes) or ndarray
    tokens: list[np.ndarray]  # per stream: (B, T) int64


@dataclass
class LossBreakdown:
    total: Tensor  # scalar, differentiable
    reconstruction_nats: float
    kl_nats: float
    penalty_nats: float
    accuracy: float


def segment(x: np.ndarray, num_segments: int) -> list[np.ndarray]:
    """Split the time axis (last axis) into equal contiguous subsequences."""
    t = x.shape[-1]
    if t % num_segments != 0:
        raise ValueError(f"length {t} not divisible into {num_segments} segments")
    return [np.ascontiguousarray(p) for p in np.split(x, num_segments, axis=-1)]


def sample_from_logits(logits: np.ndarray, temperature: float, rng: np.random.Generator) -> np.ndarray:
    """Categorical draw per row from softmax(logits / temperature); 0 is greedy."""
    if temperature < 0.0:
        raise ValueError("temperature must be nonnegative")
    if temperature == 0.0:
        return logits.argmax(axis=1).astype(np.int64)
    probs = softmax_np(logits / temperature)
    r = rng.random((probs.shape[0], 1))
    ids = (probs.cumsum(axis=1) < r).sum(axis=1)
    return np.minimum(ids, probs.shape[1] - 1).astype(np.int64)


class Model:
    def __init__(self, cfg: ArchConfig, params: dict[str, Tensor]):
        self.cfg = cfg
        self.params = params

    @classmethod
    def build(cls, cfg: ArchConfig, seed: int) -> "Model":
        return cls(cfg, build_params(cfg, seed))

    # -- helpers ------------------------------------------------------------

    def _zeros(self, *shape) -> Tensor:
        return Tensor(np.zeros(shape, dtype=self.cfg.np_dtype))

    def _check_tokens(self, tokens: list[np.ndarray], what: str) -> list[np.ndarray]:
        cfg = self.cfg
        if len(tokens) != cfg.num_streams:
            raise ValueError(f"{what}: expected {cfg.num_streams} streams, got {len(tokens)}")
        tokens = [np.asarray(t) for t in tokens]
        batch = tokens[0].shape[0]
        for s, (ts, vocab) in enumerate(zip(tokens, cfg.vocab_sizes)):
            if ts.ndim != 2 or ts.shape != (batch, cfg.seq_len):
                raise ValueError(f"{what}: stream {s} shape {ts.shape}, want ({batch}, {cfg.seq_len})")
            if ts.size and (ts.min() < 0 or ts.max() >= vocab):
                raise ValueError(f"{what}: stream {s} token outside [0, {vocab})")
        return tokens

    def _split_states(self, packed: Tensor, layers: int, hidden: int) -> list[tuple[Tensor, Tensor]]:
        return [
            (T.narrow(packed, 1, (2 * i) * hidden, hidden), T.narrow(packed, 1, (2 * i + 1) * hidden, hidden))
            for i in range(layers)
        ]

    def _last_step(self, hs: Tensor) -> Tensor:
        t, b, h = hs.shape
        return T.reshape(T.narrow(hs, 0, t - 1, 1), (b, h))

    # -- encoder ------------------------------------------------------------

    def encode(self, tokens: list[np.ndarray]) -> tuple[Tensor, Tensor]:
        cfg = self.cfg
        p = self.params
        tokens = self._check_tokens(tokens, "encode")
        batch = tokens[0].shape[0]
        embs = [T.embedding(p[f"enc/embed/{s}/w"], tokens[s].T) for s in range(cfg.num_streams)]
        cur = embs[0] if len(embs) == 1 else T.concat(embs, axis=2)
        fwd = bwd = None
        for i in range(cfg.encoder_layers):
            z = lambda: self._zeros(batch, cfg.encoder_hidden)  # noqa: E731
            fwd = lstm_layer(cur, z(), z(), lstm_view(p, f"enc/l{i}/fwd"))
            bwd = lstm_layer(T.flip0(cur), z(), z(), lstm_view(p, f"enc/l{i}/bwd"))
            if i < cfg.encoder_layers - 1:
                cur = T.concat([fwd, T.flip0(bwd)], axis=2)
        h_t = T.concat([self._last_step(fwd), self._last_step(bwd)], axis=1)
        mu = T.linear(h_t, p["enc/mu/w"], p["enc/mu/b"])
        sigma = T.softplus(T.linear(h_t, p["enc/sigma/w"], p["enc/sigma/b"]))
        return mu, sigma

    # -- latent -------------------------------------------------------------

    @staticmethod
    def reparameterize(mu: Tensor, sigma: Tensor, epsilon: np.ndarray) -> Tensor:
        return T.add(mu, T.mul(sigma, Tensor(np.asarray(epsilon))))

    @staticmethod
    def kl_divergence(mu: Tensor, sigma: Tensor) -> Tensor:
        """Per-example KL to the standard Gaussian, shape (B,), in nats."""
        val = T.add(T.square(mu), T.square(sigma))
        val = T.add_const(val, -1.0)
        val = T.sub(val, T.scale(T.log(sigma), 2.0))
        return T.scale(T.sum_axis(val, 1), 0.5)

    # -- decoders -----------------------------------------------------------

    def decode(
        self,
        z: Tensor | np.ndarray,
        targets: list[np.ndarray] | None = None,
        mode: str = TEACHER_FORCED,
        temperature: float = 1.0,
        tf_prob: float = 1.0,
        rng: np.random.Generator | None = None,
        coin_per_sequence: bool = False,
    ) -> DecodeResult:
        cfg = self.cfg
        if not isinstance(z, Tensor):
            z = Tensor(np.asarray(z, dtype=cfg.np_dtype))
        if z.data.ndim != 2 or z.data.shape[1] != cfg.latent_dim:
            raise ValueError(f"z must be (B, {cfg.latent_dim}), got {z.data.shape}")
        if mode in (TEACHER_FORCED, SCHEDULED):
            if targets is None:
                raise ValueError(f"{mode} mode requires targets")
            targets = self._check_tokens(targets, "decode targets")
        elif mode == SAMPLED:
            targets = None
        else:
            raise ValueError(f"unknown decode mode {mode!r}")
        if mode in (SCHEDULED, SAMPLED) and rng is None:
            raise ValueError(f"{mode} mode requires an rng")

        if mode == TEACHER_FORCED:
            fn = self._decode_flat_tf if cfg.decoder_kind == FLAT else self._decode_hier_tf
            return fn(z, targets)
        if mode == SAMPLED:
            with no_grad():
                fn = self._decode_flat_step if cfg.decoder_kind == FLAT else self._decode_hier_step
                res = fn(z, None, 0.0, temperature, rng)
            res.logits = [lg.data for lg in res.logits]
            return res
        fn = self._decode_flat_step if cfg.decoder_kind == FLAT else self._decode_hier_step
        return fn(z, targets, tf_prob, temperature, rng, coin_per_sequence=coin_per_sequence)

    def _teacher_inputs(self, targets: list[np.ndarray], embed_keys: list[str]) -> Tensor:
        """Embed right-shifted targets; step 0 gets the all-zero start vector."""
        parts = []
        for s, key in enumerate(embed_keys):
            w = self.params[key]
            emb = T.embedding(w, targets[s].T[:-1])
            zero = self._zeros(1, targets[s].shape[0], w.data.shape[1])
            parts.append(T.concat([zero, emb], axis=0))
        return parts[0] if len(parts) == 1 else T.concat(parts, axis=2)

    def _head_logits(self, hs: Tensor, head_prefixes: list[str]) -> list[Tensor]:
        """Apply per-stream heads to (T, B, H) hidden states, slicing when shared."""
        cfg = self.cfg
        t, b, h = hs.shape
        flat = T.reshape(hs, (t * b, h))
        out = []
        slices = cfg.head_slices() if cfg.decoder_kind == FLAT else [(0, h)] * len(head_prefixes)
        for prefix, (off, width) in zip(head_prefixes, slices):
            piece = flat if (off, width) == (0, h) else T.narrow(flat, 1, off, width)
            out.append(T.linear(piece, self.params[f"{prefix}/w"], self.params[f"{prefix}/b"]))
        return out

    def _decode_flat_tf(self, z: Tensor, targets: list[np.ndarray]) -> DecodeResult:
        cfg = self.cfg
        p = self.params
        init = T.tanh(T.linear(z, p["dec/init/w"], p["dec/init/b"]))
        states = self._split_states(init, cfg.decoder_layers, cfg.decoder_hidden)
        xs = self._teacher_inputs(targets, [f"dec/embed/{s}/w" for s in range(cfg.num_streams)])
        hs = xs
        for i in range(cfg.decoder_layers):
            hs = lstm_layer(hs, states[i][0], states[i][1], lstm_view(p, f"dec/l{i}"))
        logits = self._head_logits(hs, [f"dec/head/{s}" for s in range(cfg.num_streams)])
        tokens = [self._greedy_tokens(lg, targets[0].shape[0]) for lg in logits]
        return DecodeResult(logits, tokens)

    def _conductor_embeddings(self, z: Tensor) -> Tensor:
        """(U, B, conductor_embed) sequence embeddings, a function of z only."""
        cfg = self.cfg
        p = self.params
        batch = z.data.shape[0]
        init = T.tanh(T.linear(z, p["con/init/w"], p["con/init/b"]))
        states = self._split_states(init, cfg.conductor_layers, cfg.conductor_hidden)
        cur = self._zeros(cfg.num_segments, batch, 1)
        for i in range(cfg.conductor_layers):
            cur = lstm_layer(cur, states[i][0], states[i][1], lstm_view(p, f"con/l{i}"))
        flat = T.reshape(cur, (cfg.num_segments * batch, cfg.conductor_hidden))
        emb = T.linear(flat, p["con/out/w"], p["con/out/b"])
        return T.reshape(emb, (cfg.num_segments, batch, cfg.conductor_embed))

    def _decode_hier_tf(self, z: Tensor, targets: list[np.ndarray]) -> DecodeResult:
        cfg = self.cfg
        p = self.params
        batch = targets[0].shape[0]
        seg_len = cfg.segment_len
        c_embeds = self._conductor_embeddings(z)
        per_stream_segments: list[list[Tensor]] = [[] for _ in range(cfg.num_streams)]
        for u in range(cfg.num_segments):
            c_u = T.reshape(T.narrow(c_embeds, 0, u, 1), (batch, cfg.conductor_embed))
            c_bcast = T.broadcast0(c_u, seg_len)
            for s in range(cfg.num_streams):
                seg_targets = [targets[s][:, u * seg_len : (u + 1) * seg_len]]
                inp = self._teacher_inputs(seg_targets, [f"dec/{s}/embed/w"])
                xs = T.concat([c_bcast, inp], axis=2)
                seg_init = T.tanh(T.linear(c_u, p[f"dec/seginit/{s}/w"], p[f"dec/seginit/{s}/b"]))
                states = self._split_states(seg_init, cfg.decoder_layers, cfg.decoder_hidden)
                hs = xs
                for i in range(cfg.decoder_layers):
                    hs = lstm_layer(hs, states[i][0], states[i][1], lstm_view(p, f"dec/{s}/l{i}"))
                per_stream_segments[s].append(self._head_logits(hs, [f"dec/{s}/head"])[0])
        logits = [T.concat(segs, axis=0) for segs in per_stream_segments]
        tokens = [self._greedy_tokens(lg, batch) for lg in logits]
        return DecodeResult(logits, tokens)

    def _greedy_tokens(self, logits: Tensor, batch: int) -> np.ndarray:
        ids = logits.data.argmax(axis=1).reshape(self.cfg.seq_len, batch)
        return np.ascontiguousarray(ids.T).astype(np.int64)

    # Stepwise paths (scheduled sampling on the graph; pure sampling via no_grad).

    def _pick_inputs(
        self,
        t: int,
        targets: list[np.ndarray] | None,
        prev_sampled: list[np.ndarray],
        tf_prob: float,
        rng: np.random.Generator,
        coin: np.ndarray | None = None,
    ) -> list[np.ndarray]:
        if targets is None:
            return prev_sampled
        prev_true = [tg[:, t - 1] for tg in targets]
        if tf_prob >= 1.0:
            return prev_true
        if coin is None:
            coin = rng.random(prev_true[0].shape[0]) < tf_prob
        return [np.where(coin, pt, ps) for pt, ps in zip(prev_true, prev_sampled)]

    def _stack_logits(self, steps: list[list[Tensor]]) -> list[Tensor]:
        """Per-step (B, V) tensors, time-ordered, into per-stream (T*B, V)."""
        n_streams = len(steps[0])
        return [T.concat([step[s] for step in steps], axis=0) for s in range(n_streams)]

    def _decode_flat_step(
        self,
        z: Tensor,
        targets: list[np.ndarray] | None,
        tf_prob: float,
        temperature: float,
        rng: np.random.Generator,
        coin_per_sequence: bool = False,
    ) -> DecodeResult:
        cfg = self.cfg
        p = self.params
        batch = z.data.shape[0]
        seq_coin = None
        if coin_per_sequence and targets is not None and tf_prob < 1.0:
            seq_coin = rng.random(batch) < tf_prob
        init = T.tanh(T.linear(z, p["dec/init/w"], p["dec/init/b"]))
        states = self._split_states(init, cfg.decoder_layers, cfg.decoder_hidden)
        hcs = [T.concat([h, c], axis=1) for h, c in states]
        weights = [lstm_view(p, f"dec/l{i}") for i in range(cfg.decoder_layers)]
        embeds = [p[f"dec/embed/{s}/w"] for s in range(cfg.num_streams)]
        heads = [f"dec/head/{s}" for s in range(cfg.num_streams)]
        out_tokens = [np.zeros((batch, cfg.seq_len), dtype=np.int64) for _ in range(cfg.num_streams)]
        step_logits: list[list[Tensor]] = []
        prev_sampled: list[np.ndarray] = [np.zeros(batch, dtype=np.int64) for _ in range(cfg.num_streams)]
        for t in range(cfg.seq_len):
            if t == 0:
                x = self._zeros(batch, cfg.decoder_embed * cfg.num_streams)
            else:
                ids = self._pick_inputs(t, targets, prev_sampled, tf_prob, rng, coin=seq_coin)
                parts = [T.embedding(w, i) for w, i in zip(embeds, ids)]
                x = parts[0] if len(parts) == 1 else T.concat(parts, axis=1)
            h = x
            for i, w in enumerate(weights):
                hcs[i] = lstm_cell(h, hcs[i], w)
                h = T.narrow(hcs[i], 1, 0, cfg.decoder_hidden)
            logits_t = self._head_logits(T.reshape(h, (1, batch, cfg.decoder_hidden)), heads)
            step_logits.append(logits_t)
            prev_sampled = [sample_from_logits(lg.data, temperature, rng) for lg in logits_t]
            for s in range(cfg.num_streams):
                out_tokens[s][:, t] = prev_sampled[s]
        return DecodeResult(self._stack_logits(step_logits), out_tokens)

    def _decode_hier_step(
        self,
        z: Tensor,
        targets: list[np.ndarray] | None,
        tf_prob: float,
        temperature: float,
        rng: np.random.Generator,
        coin_per_sequence: bool = False,
    ) -> DecodeResult:
        cfg = self.cfg
        p = self.params
        batch = z.data.shape[0]
        seg_len = cfg.segment_len
        seq_coin = None
        if coin_per_sequence and targets is not None and tf_prob < 1.0:
            seq_coin = rng.random(batch) < tf_prob
        c_embeds = self._conductor_embeddings(z)
        embeds = [p[f"dec/{s}/embed/w"] for s in range(cfg.num_streams)]
        weights = [[lstm_view(p, f"dec/{s}/l{i}") for i in range(cfg.decoder_layers)] for s in range(cfg.num_streams)]
        out_tokens = [np.zeros((batch, cfg.seq_len), dtype=np.int64) for _ in range(cfg.num_streams)]
        step_logits: list[list[Tensor]] = []
        for u in range(cfg.num_segments):
            c_u = T.reshape(T.narrow(c_embeds, 0, u, 1), (batch, cfg.conductor_embed))
            hcs = []
            for s in range(cfg.num_streams):
                seg_init = T.tanh(T.linear(c_u, p[f"dec/seginit/{s}/w"], p[f"dec/seginit/{s}/b"]))
                states = self._split_states(seg_init, cfg.decoder_layers, cfg.decoder_hidden)
                hcs.append([T.concat([h, c], axis=1) for h, c in states])
            prev_sampled = [np.zeros(batch, dtype=np.int64) for _ in range(cfg.num_streams)]
            for local_t in range(seg_len):
                t = u * seg_len + local_t
                logits_t: list[Tensor] = []
                ids = None
                if local_t > 0:
                    seg_targets = None
                    if targets is not None:
                        seg_targets = [tg[:, u * seg_len : (u + 1) * seg_len] for tg in targets]
                    ids = self._pick_inputs(local_t, seg_targets, prev_sampled, tf_prob, rng, coin=seq_coin)
                for s in range(cfg.num_streams):
                    if local_t == 0:
                        tok = self._zeros(batch, cfg.decoder_embed)
                    else:
                        tok = T.embedding(embeds[s], ids[s])
                    x = T.concat([c_u, tok], axis=1)
                    h = x
                    for i, w in enumerate(weights[s]):
                        hcs[s][i] = lstm_cell(h, hcs[s][i], w)
                        h = T.narrow(hcs[s][i], 1, 0, cfg.decoder_hidden)
                    logits_t.append(self._head_logits(T.reshape(h, (1, batch, cfg.decoder_hidden)), [f"dec/{s}/head"])[0])
                step_logits.append(logits_t)
                prev_sampled = [sample_from_logits(lg.data, temperature, rng) for lg in logits_t]
                for s in range(cfg.num_streams):
                    out_tokens[s][:, t] = prev_sampled[s]
        return DecodeResult(self._stack_logits(step_logits), out_tokens)

    # -- objective ----------------------------------------------------------

    def loss(
        self,
        tokens: list[np.ndarray],
        beta: float,
        tau_nats: float,
        epsilon: np.ndarray | None = None,
        mode: str = TEACHER_FORCED,
        tf_prob: float = 1.0,
        rng: np.random.Generator | None = None,
        coin_per_sequence: bool = False,
    ) -> LossBreakdown:
        """ELBO-style objective: recon + beta * max(kl - tau, 0), batch mean."""
        if beta < 0 or tau_nats < 0:
            raise ValueError("beta and tau_nats must be nonnegative")
        cfg = self.cfg
        tokens = self._check_tokens(tokens, "loss")
        batch = tokens[0].shape[0]
        mu, sigma = self.encode(tokens)
        if epsilon is None:
            epsilon = np.zeros((batch, cfg.latent_dim), dtype=cfg.np_dtype)
        z = self.reparameterize(mu, sigma, np.asarray(epsilon, dtype=cfg.np_dtype))
        result = self.decode(
            z, targets=tokens, mode=mode, tf_prob=tf_prob, rng=rng,
            coin_per_sequence=coin_per_sequence,
        )

        ce_total = None
        correct = 0
        for s in range(cfg.num_streams):
            flat_targets = np.ascontiguousarray(tokens[s].T).reshape(-1)
            ce = T.sum_all(T.softmax_cross_entropy(result.logits[s], flat_targets))
            ce_total = ce if ce_total is None else T.add(ce_total, ce)
            correct += int((result.logits[s].data.argmax(axis=1) == flat_targets).sum())
        recon = T.scale(ce_total, 1.0 / batch)

        kl_each = self.kl_divergence(mu, sigma)
        kl_mean = T.scale(T.sum_all(kl_each), 1.0 / batch)
        if np.isinf(tau_nats):
            penalty = self._zeros()
        else:
            penalty = T.scale(T.relu(T.add_const(kl_mean, -tau_nats)), beta)
        total = T.add(recon, penalty)
        accuracy = correct / (batch * cfg.seq_len * cfg.num_streams)
        return LossBreakdown(
            total=total,
            reconstruction_nats=float(recon.data),
            kl_nats=float(kl_mean.data),
            penalty_nats=float(penalty.data),
            accuracy=accuracy,
        )

    # -- generation ---------------------------------------------------------

    def sample_prior(self, n: int, temperature: float, seed: int) -> list[list[np.ndarray]]:
        """n sequences from z ~ N(0, I); returns per-example stream lists."""
        if n == 0:
            return []
        rng = derive_rng(seed, "prior")
        z = rng.standard_normal((n, self.cfg.latent_dim)).astype(self.cfg.np_dtype)
        res = self.decode(z, mode=SAMPLED, temperature=temperature, rng=rng)
        return [[res.tokens[s][i] for s in range(self.cfg.num_streams)] for i in range(n)]

    def encode_mean(self, tokens: list[np.ndarray]) -> np.ndarray:
        """Deterministic latent (epsilon = 0): just mu, as a raw array."""
        with no_grad():
            mu, _ = self.encode(tokens)
        return mu.data
