"""Command line entry point: ingest, train, eval, sample, interpolate, attrs, serve.

Exit codes: 0 success, 1 usage problem, 2 unreadable or invalid data,
3 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import configfile
from .dataset import Example, load_examples, ingest_corpus, save_examples, stack_examples
from .evaluate import (
    accuracy_table,
    interpolation_report,
    reconstruction_accuracy,
    reports_svg,
    reports_table,
)
from .latent import (
    ATTRIBUTE_KINDS,
    attribute_effect_matrix,
    attribute_vector,
    measure_tokens,
    save_attribute_vectors,
    slerp,
)
from .midi import MODES, MidiParseError
from .midi.export import tokens_to_midi
from .model import SAMPLED, TEACHER_FORCED, ArchConfig
from .ngram import NgramModel, load_ngram
from .nn import CheckpointError, derive_rng
from .sequences import STEPS_PER_BAR, DRUMS
from .training import TrainingAborted, TrainingConfig, load_checkpoint, train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- shared helpers -------------------------------------------------------------


def _resolve(defaults: dict, config_path: str | None, overrides: dict) -> dict:
    try:
        file_values = configfile.read_config(config_path) if config_path else None
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc
    try:
        return configfile.resolve(defaults, file_values, overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _overrides(args, keys) -> dict:
    return {k: getattr(args, k) for k in keys}


def _load_dataset(path: str):
    try:
        examples = load_examples(path)
    except OSError as exc:
        raise DataError(f"cannot read dataset: {exc}") from exc
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    if not examples:
        raise DataError(f"{path}: dataset is empty")
    return examples, stack_examples(examples)


def _load_model(path: str):
    try:
        model, _, meta = load_checkpoint(path)
    except OSError as exc:
        raise DataError(f"cannot read checkpoint: {exc}") from exc
    except (CheckpointError, ValueError, KeyError) as exc:
        raise DataError(f"{path}: not a model checkpoint ({exc})") from exc
    return model, meta


def _mode_for(arch: ArchConfig) -> str:
    bars = arch.seq_len // STEPS_PER_BAR
    for mode, (mode_bars, kinds) in MODES.items():
        vocabs = tuple(512 if k == DRUMS else 130 for k in kinds)
        if mode_bars == bars and vocabs == arch.vocab_sizes:
            return mode
    raise DataError(f"no dataset mode matches seq_len={arch.seq_len} vocabs={arch.vocab_sizes}")


def _echo_config(out_dir: Path, resolved: dict, extra: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    merged = dict(resolved)
    merged.update(extra)
    configfile.write_config(out_dir / "config.txt", merged)


def _write_midi_file(path: Path, streams: list[np.ndarray], mode: str) -> None:
    kinds = MODES[mode][1]
    path.write_bytes(tokens_to_midi(streams, kinds))


# -- ingest ----------------------------------------------------------------------


def cmd_ingest(args) -> int:
    midi_dir = Path(args.midi_dir)
    if not midi_dir.is_dir():
        raise DataError(f"{midi_dir} is not a directory")
    paths = sorted(p for p in midi_dir.rglob("*") if p.suffix.lower() in (".mid", ".midi"))
    if not paths:
        raise DataError(f"no .mid/.midi files under {midi_dir}")
    examples, manifest = ingest_corpus(paths, args.mode)
    manifest["mode"] = args.mode
    manifest["source"] = str(midi_dir)
    save_examples(args.out, examples, manifest)
    print(f"{len(examples)} examples from {manifest['files']} files -> {args.out}")
    return EXIT_OK


# -- train -----------------------------------------------------------------------

TRAIN_DEFAULTS = {
    "arch": "hierarchical",
    "latent_dim": 32,
    "encoder_hidden": 64,
    "decoder_hidden": 64,
    "conductor_hidden": 32,
    "conductor_embed": 16,
    "steps": 1000,
    "batch_size": 32,
    "base_lr": 1e-3,
    "min_lr": 1e-5,
    "lr_decay": 0.9999,
    "beta_max": 0.2,
    "beta_rate": 0.99999,
    "free_bits": 48.0,
    "scheduled_sampling_k": 2000.0,
    "teacher_forcing": False,
    "coin_per_sequence": False,
    "seed": 0,
    "checkpoint_interval": 1000,
}


def cmd_train(args) -> int:
    resolved = _resolve(TRAIN_DEFAULTS, args.config, _overrides(args, TRAIN_DEFAULTS))
    examples, tokens = _load_dataset(args.dataset)
    mode = examples[0].mode
    bars, kinds = MODES[mode]
    try:
        arch = ArchConfig(
            latent_dim=resolved["latent_dim"],
            encoder_hidden=resolved["encoder_hidden"],
            decoder_hidden=resolved["decoder_hidden"],
            conductor_hidden=resolved["conductor_hidden"],
            conductor_embed=resolved["conductor_embed"],
            seq_len=bars * STEPS_PER_BAR,
            num_segments=bars,
            vocab_sizes=tuple(512 if k == DRUMS else 130 for k in kinds),
            decoder_kind=resolved["arch"],
        )
        cfg = TrainingConfig(
            total_steps=resolved["steps"],
            batch_size=resolved["batch_size"],
            base_lr=resolved["base_lr"],
            min_lr=resolved["min_lr"],
            lr_decay=resolved["lr_decay"],
            beta_max=resolved["beta_max"],
            beta_rate=resolved["beta_rate"],
            free_bits=resolved["free_bits"],
            scheduled_sampling_k=resolved["scheduled_sampling_k"],
            teacher_forcing=resolved["teacher_forcing"],
            coin_per_sequence=resolved["coin_per_sequence"],
            seed=resolved["seed"],
            checkpoint_interval=resolved["checkpoint_interval"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    out_dir = Path(args.out)
    _echo_config(out_dir, resolved, {"dataset": args.dataset, "mode": mode})
    every = args.log_every

    def log_fn(line):
        step = int(line.split(",", 1)[0])
        if every and (step % every == 0 or step + 1 == cfg.total_steps):
            print(line)

    result = train(tokens, arch, cfg, out_dir, resume_from=args.resume, log_fn=log_fn)
    print(f"final checkpoint: {result.final_checkpoint}")
    return EXIT_OK


# -- eval ------------------------------------------------------------------------

EVAL_DEFAULTS = {
    "mode": "both",
    "temperature": 1.0,
    "seed": 0,
    "interpolation": False,
    "pairs": 64,
    "interp_temperature": 0.5,
    "lm": "",
}


def cmd_eval(args) -> int:
    resolved = _resolve(EVAL_DEFAULTS, args.config, _overrides(args, EVAL_DEFAULTS))
    if resolved["mode"] not in ("teacher_forced", "sampled", "both"):
        raise UsageError("eval mode must be teacher_forced, sampled or both")
    examples, tokens = _load_dataset(args.dataset)

    rows = {}
    models = []
    for ckpt in args.checkpoint:
        model, _ = _load_model(ckpt)
        if model.cfg.seq_len != tokens[0].shape[1] or len(model.cfg.vocab_sizes) != len(tokens):
            raise DataError(f"{ckpt}: checkpoint does not fit the dataset shape")
        models.append(model)
        name = model.cfg.decoder_kind
        if name in rows:
            name = f"{name}@{Path(ckpt).stem}"
        tf = sampled = float("nan")
        if resolved["mode"] in ("teacher_forced", "both"):
            tf = reconstruction_accuracy(model, tokens, TEACHER_FORCED)
        if resolved["mode"] in ("sampled", "both"):
            sampled = reconstruction_accuracy(
                model, tokens, SAMPLED, temperature=resolved["temperature"], seed=resolved["seed"]
            )
        rows[name] = (tf, sampled)

    table = accuracy_table(rows)
    print(table, end="")
    out_dir = Path(args.out) if args.out else None
    if out_dir is not None:
        _echo_config(out_dir, resolved, {"dataset": args.dataset})
        (out_dir / "accuracy.txt").write_text(table)

    if resolved["interpolation"]:
        if len(tokens) != 1:
            raise DataError("interpolation report needs a single-stream dataset")
        n_pairs = resolved["pairs"]
        if tokens[0].shape[0] < 2 * n_pairs:
            raise DataError(f"need {2 * n_pairs} examples for {n_pairs} pairs")
        order = derive_rng(resolved["seed"], "pairs").permutation(tokens[0].shape[0])
        pairs = [(tokens[0][order[i]], tokens[0][order[n_pairs + i]]) for i in range(n_pairs)]
        if resolved["lm"]:
            lm = load_ngram(resolved["lm"])
        else:
            lm = NgramModel.fit([row for row in tokens[0]], vocab_size=130)
        reports = [interpolation_report(None, pairs, lm, seed=resolved["seed"])]
        for model in models:
            reports.append(
                interpolation_report(
                    model,
                    pairs,
                    lm,
                    temperature=resolved["interp_temperature"],
                    seed=resolved["seed"],
                )
            )
        table = reports_table(reports)
        print(table, end="")
        if out_dir is not None:
            (out_dir / "interpolation.txt").write_text(table)
            (out_dir / "interpolation.svg").write_text(reports_svg(reports))
    return EXIT_OK


# -- sample ----------------------------------------------------------------------

SAMPLE_DEFAULTS = {"n": 8, "temperature": 1.0, "seed": 0}


def cmd_sample(args) -> int:
    resolved = _resolve(SAMPLE_DEFAULTS, args.config, _overrides(args, SAMPLE_DEFAULTS))
    if resolved["n"] < 0:
        raise UsageError("n must be nonnegative")
    model, _ = _load_model(args.checkpoint)
    mode = _mode_for(model.cfg)
    out_dir = Path(args.out)
    _echo_config(out_dir, resolved, {"checkpoint": args.checkpoint, "mode": mode})
    samples = model.sample_prior(resolved["n"], resolved["temperature"], resolved["seed"])
    examples = [Example(mode, tuple(streams)) for streams in samples]
    save_examples(out_dir / "samples.txt", examples)
    for i, streams in enumerate(samples):
        _write_midi_file(out_dir / f"sample_{i:03d}.mid", streams, mode)
    print(f"{len(samples)} samples -> {out_dir}")
    return EXIT_OK


# -- interpolate -------------------------------------------------------------------

INTERPOLATE_DEFAULTS = {"index_a": 0, "index_b": 1, "steps": 7, "temperature": 0.5, "seed": 0}


def cmd_interpolate(args) -> int:
    resolved = _resolve(INTERPOLATE_DEFAULTS, args.config, _overrides(args, INTERPOLATE_DEFAULTS))
    if resolved["steps"] < 0:
        raise UsageError("steps must be nonnegative")
    model, _ = _load_model(args.checkpoint)
    mode = _mode_for(model.cfg)
    examples, tokens = _load_dataset(args.dataset)
    n = tokens[0].shape[0]
    for key in ("index_a", "index_b"):
        if not 0 <= resolved[key] < n:
            raise DataError(f"{key}={resolved[key]} outside dataset of {n} examples")
    if len(tokens) != len(model.cfg.vocab_sizes) or tokens[0].shape[1] != model.cfg.seq_len:
        raise DataError("checkpoint does not fit the dataset shape")

    a = [t[resolved["index_a"]][None, :] for t in tokens]
    b = [t[resolved["index_b"]][None, :] for t in tokens]
    z_a = model.encode_mean(a)[0].astype(np.float64)
    z_b = model.encode_mean(b)[0].astype(np.float64)
    alphas = np.linspace(0.0, 1.0, resolved["steps"] + 2)
    z = np.stack([slerp(z_a, z_b, float(al)) for al in alphas]).astype(model.cfg.np_dtype)
    res = model.decode(
        z,
        mode=SAMPLED,
        temperature=resolved["temperature"],
        rng=derive_rng(resolved["seed"], "interpolate"),
    )

    out_dir = Path(args.out)
    _echo_config(
        out_dir, resolved, {"checkpoint": args.checkpoint, "dataset": args.dataset, "mode": mode}
    )
    decoded = [
        Example(mode, tuple(res.tokens[s][i] for s in range(len(tokens))))
        for i in range(len(alphas))
    ]
    save_examples(out_dir / "interpolations.txt", decoded)
    for i, al in enumerate(alphas):
        streams = [res.tokens[s][i] for s in range(len(tokens))]
        _write_midi_file(out_dir / f"alpha_{al:0.2f}.mid", streams, mode)
    print(f"{len(alphas)} sequences (steps={resolved['steps']} plus endpoints) -> {out_dir}")
    return EXIT_OK


# -- attrs -----------------------------------------------------------------------

ATTRS_DEFAULTS = {
    "scale": 1.0,
    "n_effect": 64,
    "effect_temperature": 1.0,
    "seed": 0,
    "conventional_sync": False,
}


def cmd_attrs(args) -> int:
    resolved = _resolve(ATTRS_DEFAULTS, args.config, _overrides(args, ATTRS_DEFAULTS))
    model, _ = _load_model(args.checkpoint)
    mode = _mode_for(model.cfg)
    if MODES[mode][1][0] == DRUMS:
        raise DataError("attribute operations need a melody stream")
    examples, tokens = _load_dataset(args.dataset)
    if len(tokens) != len(model.cfg.vocab_sizes) or tokens[0].shape[1] != model.cfg.seq_len:
        raise DataError("checkpoint does not fit the dataset shape")

    latents = model.encode_mean(tokens).astype(np.float64)
    literal = not resolved["conventional_sync"]
    values = {kind: [] for kind in ATTRIBUTE_KINDS}
    for row in tokens[0]:
        measured = measure_tokens(row, literal_parity=literal)
        for kind in ATTRIBUTE_KINDS:
            values[kind].append(measured[kind])

    vectors = {}
    skipped = []
    for kind in ATTRIBUTE_KINDS:
        try:
            vectors[kind] = attribute_vector(latents, np.array(values[kind]), kind)
        except ValueError as exc:
            skipped.append(f"{kind}: {exc}")
    if not vectors:
        raise DataError("no attribute admits a direction: " + "; ".join(skipped))
    for line in skipped:
        print(f"skipped {line}", file=sys.stderr)

    out_dir = Path(args.out)
    _echo_config(
        out_dir, resolved, {"checkpoint": args.checkpoint, "dataset": args.dataset, "mode": mode}
    )
    save_attribute_vectors(out_dir / "attributes.ckpt", vectors)

    effect = attribute_effect_matrix(
        model,
        vectors,
        n=resolved["n_effect"],
        temperature=resolved["effect_temperature"],
        scale=resolved["scale"],
        seed=resolved["seed"],
    )
    lines = ["applied\\measured\t" + "\t".join(effect.kinds)]
    for i, kind in enumerate(effect.kinds):
        cells = "\t".join(f"{effect.matrix[i, j]:+.4f}" for j in range(len(effect.kinds)))
        lines.append(f"{kind}\t{cells}")
    table = "\n".join(lines) + "\n"
    print(table, end="")
    (out_dir / "effect_matrix.txt").write_text(table)
    return EXIT_OK


# -- serve -----------------------------------------------------------------------

SERVE_DEFAULTS = {"host": "127.0.0.1", "port": 8000, "attrs": "", "lossless": False}


def cmd_serve(args) -> int:
    resolved = _resolve(SERVE_DEFAULTS, args.config, _overrides(args, SERVE_DEFAULTS))
    import uvicorn

    from .service import create_app

    app = create_app(
        args.checkpoint,
        attrs_path=resolved["attrs"] or None,
        lossless=resolved["lossless"],
    )
    uvicorn.run(app, host=resolved["host"], port=resolved["port"], log_level="warning")
    return EXIT_OK


# -- parser ----------------------------------------------------------------------


def _add_config_flags(sub, defaults: dict) -> None:
    sub.add_argument("--config", default=None, help="key=value file layered under flags")
    for key, value in defaults.items():
        flag = "--" + key.replace("_", "-")
        if isinstance(value, bool):
            sub.add_argument(flag, default=None, action="store_const", const=True)
        elif isinstance(value, int):
            sub.add_argument(flag, default=None, type=int)
        elif isinstance(value, float):
            sub.add_argument(flag, default=None, type=float)
        else:
            sub.add_argument(flag, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="barvae", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("ingest", help="MIDI directory to dataset file")
    p.add_argument("--midi-dir", required=True)
    p.add_argument("--mode", required=True, choices=sorted(MODES))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = subs.add_parser("train", help="train a model on a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--resume", default=None)
    p.add_argument("--log-every", type=int, default=100)
    _add_config_flags(p, TRAIN_DEFAULTS)
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("eval", help="accuracy table and interpolation report")
    p.add_argument("--checkpoint", required=True, action="append")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", default=None)
    _add_config_flags(p, EVAL_DEFAULTS)
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("sample", help="decode sequences from the prior")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p, SAMPLE_DEFAULTS)
    p.set_defaults(func=cmd_sample)

    p = subs.add_parser("interpolate", help="decode a latent path between two examples")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p, INTERPOLATE_DEFAULTS)
    p.set_defaults(func=cmd_interpolate)

    p = subs.add_parser("attrs", help="attribute vectors and effect matrix")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p, ATTRS_DEFAULTS)
    p.set_defaults(func=cmd_attrs)

    p = subs.add_parser("serve", help="start the HTTP API")
    p.add_argument("--checkpoint", required=True)
    _add_config_flags(p, SERVE_DEFAULTS)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, MidiParseError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingAborted as exc:
        print(f"training aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - last-resort exit code mapping
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
