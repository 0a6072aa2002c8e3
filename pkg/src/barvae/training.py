"""Training loop: schedules, batching, checkpoints, metrics.

All randomness is derived statelessly from (seed, purpose, step), so a run
resumed from any checkpoint replays the exact remaining steps bit for bit
without serializing generator state.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .model.config import ArchConfig
from .model.network import SCHEDULED, TEACHER_FORCED, Model
from .model.params import arrays_to_params, build_params, params_to_arrays
from .nn import (
    Adam,
    NonFiniteGradient,
    backward,
    clip_global_norm,
    derive_rng,
    load_arrays,
    save_arrays,
)

LN2 = math.log(2.0)

METRICS_HEADER = "step,lr,beta,total,recon,kl,accuracy"


class TrainingAborted(RuntimeError):
    """Raised when a non-finite loss or gradient stops the run."""

    def __init__(self, message: str, diagnostic_path: str | None = None) -> None:
        super().__init__(message)
        self.diagnostic_path = diagnostic_path


@dataclass(frozen=True)
class TrainingConfig:
    total_steps: int
    batch_size: int = 32
    base_lr: float = 1e-3
    min_lr: float = 1e-5
    lr_decay: float = 0.9999
    beta_max: float = 0.2
    beta_rate: float = 0.99999
    free_bits: float = 48.0
    scheduled_sampling_k: float = 2000.0
    teacher_forcing: bool = False
    coin_per_sequence: bool = False
    seed: int = 0
    checkpoint_interval: int = 1000

    def __post_init__(self) -> None:
        if not 0 < self.min_lr <= self.base_lr:
            raise ValueError("need 0 < min_lr <= base_lr")
        if not 0 < self.lr_decay <= 1:
            raise ValueError("lr_decay must be in (0, 1]")
        if self.beta_max < 0:
            raise ValueError("beta_max must be nonnegative")
        if self.scheduled_sampling_k <= 0:
            raise ValueError("scheduled_sampling_k must be positive")
        if self.free_bits < 0:
            raise ValueError("free_bits must be nonnegative")
        if self.batch_size < 1 or self.total_steps < 0:
            raise ValueError("batch_size and total_steps must be positive")
        if self.checkpoint_interval < 1:
            raise ValueError("checkpoint_interval must be positive")

    @property
    def tau_nats(self) -> float:
        return self.free_bits * LN2

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainingConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown training config fields: {sorted(unknown)}")
        return cls(**data)


def lr_at(cfg: TrainingConfig, step: int) -> float:
    return max(cfg.min_lr, cfg.base_lr * cfg.lr_decay**step)


def beta_at(cfg: TrainingConfig, step: int) -> float:
    return cfg.beta_max * (1.0 - cfg.beta_rate**step)


def teacher_forcing_prob(cfg: TrainingConfig, step: int) -> float:
    if cfg.teacher_forcing:
        return 1.0
    k = cfg.scheduled_sampling_k
    exponent = step / k
    if exponent > 700.0:
        return 0.0
    return k / (k + math.exp(exponent))


def batch_indices(cfg: TrainingConfig, num_examples: int, step: int) -> np.ndarray:
    """Examples for one step under seeded shuffle-epoch batching.

    Each epoch is a fresh seeded permutation consumed in batch_size slices;
    the leftover tail shorter than a batch is skipped.
    """
    per_epoch = num_examples // cfg.batch_size
    if per_epoch == 0:
        raise ValueError(
            f"dataset of {num_examples} examples cannot fill a batch of {cfg.batch_size}"
        )
    epoch, slot = divmod(step, per_epoch)
    perm = derive_rng(cfg.seed, "epoch", epoch).permutation(num_examples)
    return perm[slot * cfg.batch_size : (slot + 1) * cfg.batch_size]


def format_metrics(step: int, lr: float, beta: float, breakdown) -> str:
    return (
        f"{step},{lr:.10g},{beta:.10g},{float(breakdown.total.data):.10g},"
        f"{breakdown.reconstruction_nats:.10g},{breakdown.kl_nats:.10g},"
        f"{breakdown.accuracy:.10g}"
    )


def save_checkpoint(path: str | Path, model: Model, optimizer: Adam | None,
                    step: int, cfg: TrainingConfig | None = None,
                    extra_meta: dict | None = None) -> None:
    arrays = params_to_arrays(model.params)
    if optimizer is not None:
        arrays.update(optimizer.state_arrays())
    meta = {"step": step, "arch": model.cfg.to_dict()}
    if cfg is not None:
        meta["training"] = cfg.to_dict()
    if extra_meta:
        meta.update(extra_meta)
    save_arrays(path, arrays, meta)


def load_checkpoint(path: str | Path) -> tuple[Model, dict, dict]:
    """Rebuild a Model from a checkpoint; returns (model, raw arrays, meta)."""
    arrays, meta = load_arrays(path)
    arch = ArchConfig.from_dict(meta["arch"])
    params = arrays_to_params(arrays, expected=arch)
    return Model(arch, params), arrays, meta


@dataclass
class TrainResult:
    metrics: list[dict] = field(default_factory=list)
    checkpoint_paths: list[str] = field(default_factory=list)
    final_checkpoint: str | None = None


def train(
    tokens: list[np.ndarray],
    arch: ArchConfig,
    cfg: TrainingConfig,
    out_dir: str | Path,
    resume_from: str | Path | None = None,
    log_fn=None,
) -> TrainResult:
    """Run cfg.total_steps gradient updates over per-stream (N, T) token arrays.

    Writes checkpoints and an append-only metrics.csv under out_dir. When
    resume_from is given, picks up at that checkpoint's step with identical
    results to an uninterrupted run.
    """
    tokens = [np.asarray(t, dtype=np.int64) for t in tokens]
    if len(tokens) != len(arch.vocab_sizes):
        raise ValueError(f"expected {len(arch.vocab_sizes)} token streams")
    num_examples = tokens[0].shape[0]
    for t in tokens:
        if t.shape != tokens[0].shape:
            raise ValueError("token streams must share a shape")
        if t.shape[1] != arch.seq_len:
            raise ValueError(f"sequence length {t.shape[1]} != configured {arch.seq_len}")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = out_dir / "metrics.csv"

    start_step = 0
    if resume_from is not None:
        model, arrays, meta = load_checkpoint(resume_from)
        if model.cfg != arch:
            raise ValueError("checkpoint architecture does not match the requested one")
        optimizer = Adam(model.params)
        optimizer.load_state_arrays(arrays)
        start_step = int(meta["step"])
    else:
        model = Model(arch, build_params(arch, cfg.seed))
        optimizer = Adam(model.params)

    if not metrics_path.exists() or start_step == 0:
        metrics_path.write_text(METRICS_HEADER + "\n")

    result = TrainResult()
    with open(metrics_path, "a") as metrics_file:
        for step in range(start_step, cfg.total_steps):
            rows = batch_indices(cfg, num_examples, step)
            batch = [t[rows] for t in tokens]
            eps_rng = derive_rng(cfg.seed, "eps", step)
            epsilon = eps_rng.standard_normal(
                (cfg.batch_size, arch.latent_dim)
            ).astype(arch.np_dtype)

            lr = lr_at(cfg, step)
            beta = beta_at(cfg, step)
            tf_prob = teacher_forcing_prob(cfg, step)
            if tf_prob >= 1.0:
                breakdown = model.loss(
                    batch, beta=beta, tau_nats=cfg.tau_nats, epsilon=epsilon,
                    mode=TEACHER_FORCED,
                )
            else:
                breakdown = model.loss(
                    batch, beta=beta, tau_nats=cfg.tau_nats, epsilon=epsilon,
                    mode=SCHEDULED, tf_prob=tf_prob,
                    rng=derive_rng(cfg.seed, "coin", step),
                    coin_per_sequence=cfg.coin_per_sequence,
                )

            total = float(breakdown.total.data)
            if not math.isfinite(total):
                diag = out_dir / f"diagnostic_step{step:08d}.ckpt"
                save_checkpoint(diag, model, optimizer, step, cfg,
                                extra_meta={"abort_reason": f"non-finite loss {total}"})
                raise TrainingAborted(
                    f"non-finite loss {total} at step {step}", str(diag)
                )

            backward(breakdown.total)
            clip_global_norm(model.params, 1.0)
            try:
                optimizer.step(lr)
            except NonFiniteGradient as exc:
                diag = out_dir / f"diagnostic_step{step:08d}.ckpt"
                save_checkpoint(diag, model, optimizer, step, cfg,
                                extra_meta={"abort_reason": str(exc)})
                raise TrainingAborted(str(exc), str(diag)) from exc
            optimizer.zero_grad()

            line = format_metrics(step, lr, beta, breakdown)
            metrics_file.write(line + "\n")
            result.metrics.append(
                {
                    "step": step,
                    "lr": lr,
                    "beta": beta,
                    "total": total,
                    "recon": breakdown.reconstruction_nats,
                    "kl": breakdown.kl_nats,
                    "accuracy": breakdown.accuracy,
                }
            )
            if log_fn is not None:
                log_fn(line)

            done = step + 1
            if done % cfg.checkpoint_interval == 0 or done == cfg.total_steps:
                path = out_dir / f"step_{done:08d}.ckpt"
                save_checkpoint(path, model, optimizer, done, cfg)
                result.checkpoint_paths.append(str(path))

    if result.checkpoint_paths:
        result.final_checkpoint = result.checkpoint_paths[-1]
    elif cfg.total_steps == 0:
        path = out_dir / "step_00000000.ckpt"
        save_checkpoint(path, model, optimizer, 0, cfg)
        result.checkpoint_paths.append(str(path))
        result.final_checkpoint = str(path)
    return result
