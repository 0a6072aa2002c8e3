"""Latent-space toolkit: interpolation, musical attributes, attribute vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codec import decode_melody
from .nn import derive_rng, load_arrays, save_arrays
from .sequences import NoteSequence

C_DIATONIC = "c_diatonic"
NOTE_DENSITY = "note_density"
AVERAGE_INTERVAL = "average_interval"
SYNC16 = "sync16"
SYNC8 = "sync8"

ATTRIBUTE_KINDS = (C_DIATONIC, NOTE_DENSITY, AVERAGE_INTERVAL, SYNC16, SYNC8)

_DIATONIC_CLASSES = {0, 2, 4, 5, 7, 9, 11}


def _check_pair(z1: np.ndarray, z2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    z1 = np.asarray(z1, dtype=np.float64)
    z2 = np.asarray(z2, dtype=np.float64)
    if z1.shape != z2.shape or z1.ndim != 1:
        raise ValueError(f"latent shapes differ: {z1.shape} vs {z2.shape}")
    return z1, z2


def lerp(z1: np.ndarray, z2: np.ndarray, alpha: float) -> np.ndarray:
    """Linear interpolation with the convention alpha=1 -> z1."""
    z1, z2 = _check_pair(z1, z2)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return alpha * z1 + (1.0 - alpha) * z2


def slerp(z1: np.ndarray, z2: np.ndarray, alpha: float) -> np.ndarray:
    """Great-circle interpolation; alpha=0 -> z1, alpha=1 -> z2.

    Note the endpoint convention is the mirror of lerp's. Near-parallel
    inputs (angle < 1e-6) fall back to the linear path.
    """
    z1, z2 = _check_pair(z1, z2)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    n1 = float(np.linalg.norm(z1))
    n2 = float(np.linalg.norm(z2))
    if n1 == 0.0 or n2 == 0.0:
        raise ValueError("slerp endpoints must be nonzero")
    cos_theta = float(np.clip(np.dot(z1, z2) / (n1 * n2), -1.0, 1.0))
    theta = float(np.arccos(cos_theta))
    if theta < 1e-6:
        return (1.0 - alpha) * z1 + alpha * z2
    s = np.sin(theta)
    return (np.sin((1.0 - alpha) * theta) / s) * z1 + (np.sin(alpha * theta) / s) * z2


# -- attribute measurement ----------------------------------------------------


def measure(kind: str, seq: NoteSequence, literal_parity: bool = True) -> float:
    """One scalar per sequence, per the fixed attribute definitions.

    Syncopation positions follow the literal 1-indexed-odd rule by default
    (which counts the downbeat); literal_parity=False counts off-positions
    instead.
    """
    if kind == C_DIATONIC:
        if not seq.notes:
            return 0.0
        hits = sum(1 for n in seq.notes if n.pitch % 12 in _DIATONIC_CLASSES)
        return hits / len(seq.notes)
    if kind == NOTE_DENSITY:
        return len(seq.notes) / seq.length_steps
    if kind == AVERAGE_INTERVAL:
        if len(seq.notes) < 2:
            return 0.0
        pitches = [n.pitch for n in seq.notes]
        gaps = [abs(b - a) for a, b in zip(pitches, pitches[1:])]
        return sum(gaps) / len(gaps)
    if kind in (SYNC16, SYNC8):
        if not seq.notes:
            return 0.0
        onsets = {n.onset_step for n in seq.notes}
        wanted_parity = 0 if literal_parity else 1
        hits = 0
        for step in sorted(onsets):
            if step % 2 != wanted_parity:
                continue
            if (step - 1) in onsets:
                continue
            if kind == SYNC8 and (step - 2) in onsets:
                continue
            hits += 1
        return hits / len(onsets)
    raise ValueError(f"unknown attribute kind {kind!r}")


def measure_tokens(tokens: np.ndarray, literal_parity: bool = True) -> dict[str, float]:
    """All five attributes of a melody token stream."""
    seq = decode_melody(tokens)
    return {kind: measure(kind, seq, literal_parity) for kind in ATTRIBUTE_KINDS}


# -- attribute vectors --------------------------------------------------------


@dataclass(frozen=True)
class AttributeVector:
    kind: str
    vector: np.ndarray
    n_examples: int
    bottom_mean: float
    top_mean: float


def attribute_vector(latents: np.ndarray, values: np.ndarray, kind: str) -> AttributeVector:
    """Mean latent of the top attribute quartile minus the bottom quartile.

    Quartile size is floor(n/4); ties keep input order (stable sort).
    """
    latents = np.asarray(latents, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if latents.ndim != 2 or values.ndim != 1 or len(latents) != len(values):
        raise ValueError("need (n, d) latents and n attribute values")
    n = len(values)
    if n < 8:
        raise ValueError(f"need at least 8 examples, got {n}")
    if float(values.min()) == float(values.max()):
        raise ValueError(f"attribute {kind!r} is constant across the corpus")
    order = np.argsort(values, kind="stable")
    q = n // 4
    bottom = order[:q]
    top = order[-q:]
    vector = latents[top].mean(axis=0) - latents[bottom].mean(axis=0)
    return AttributeVector(
        kind=kind,
        vector=vector,
        n_examples=n,
        bottom_mean=float(values[bottom].mean()),
        top_mean=float(values[top].mean()),
    )


def apply_attribute(z: np.ndarray, vec: AttributeVector, scale: float) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != vec.vector.shape[0]:
        raise ValueError("latent dimension does not match the attribute vector")
    return z + scale * vec.vector


def save_attribute_vectors(path, vectors: dict[str, AttributeVector]) -> None:
    arrays = {}
    meta = {"kinds": sorted(vectors), "stats": {}}
    for kind in sorted(vectors):
        v = vectors[kind]
        arrays[f"attr/{kind}"] = v.vector
        meta["stats"][kind] = {
            "n_examples": v.n_examples,
            "bottom_mean": v.bottom_mean,
            "top_mean": v.top_mean,
        }
    save_arrays(path, arrays, meta)


def load_attribute_vectors(path) -> dict[str, AttributeVector]:
    arrays, meta = load_arrays(path)
    out = {}
    for kind in meta["kinds"]:
        stats = meta["stats"][kind]
        out[kind] = AttributeVector(
            kind=kind,
            vector=arrays[f"attr/{kind}"],
            n_examples=stats["n_examples"],
            bottom_mean=stats["bottom_mean"],
            top_mean=stats["top_mean"],
        )
    return out


# -- effect matrix ------------------------------------------------------------


@dataclass(frozen=True)
class EffectMatrix:
    kinds: tuple[str, ...]
    # mean change in the measured attribute (column) when the attribute vector
    # of the row is applied, in units of that attribute's corpus quartile gap;
    # rows/cols ordered like `kinds`
    matrix: np.ndarray
    n_samples: int


def attribute_effect_matrix(
    model,
    vectors: dict[str, AttributeVector],
    n: int = 256,
    temperature: float = 1.0,
    scale: float = 1.0,
    seed: int = 0,
) -> EffectMatrix:
    """Average attribute change over prior samples, per applied vector.

    Each column is normalized by the top-minus-bottom quartile mean gap
    recorded on its attribute vector, so columns with very different native
    scales stay comparable. Base and shifted decodes reuse the same derived
    random stream, so a zero attribute vector produces exactly zero change.
    """
    kinds = tuple(sorted(vectors))
    if n == 0:
        return EffectMatrix(kinds, np.zeros((len(kinds), len(kinds))), 0)
    rng = derive_rng(seed, "effect-prior")
    base_z = rng.standard_normal((n, model.cfg.latent_dim)).astype(model.cfg.np_dtype)

    def decode_tokens(z):
        res = model.decode(
            z, mode="sampled", temperature=temperature, rng=derive_rng(seed, "effect-decode")
        )
        return res.tokens[0]

    base_tokens = decode_tokens(base_z)
    base_measure = np.array(
        [[measure_tokens(base_tokens[i])[k] for k in kinds] for i in range(n)]
    )
    gaps = np.array([vectors[k].top_mean - vectors[k].bottom_mean for k in kinds])
    if np.any(gaps <= 0):
        bad = kinds[int(np.argmin(gaps))]
        raise ValueError(f"attribute {bad!r} has a nonpositive quartile gap")

    changes = np.zeros((len(kinds), len(kinds)))
    for row, applied in enumerate(kinds):
        shifted_z = apply_attribute(base_z, vectors[applied], scale).astype(model.cfg.np_dtype)
        shifted_tokens = decode_tokens(shifted_z)
        shifted_measure = np.array(
            [[measure_tokens(shifted_tokens[i])[k] for k in kinds] for i in range(n)]
        )
        changes[row] = (shifted_measure - base_measure).mean(axis=0) / gaps
    return EffectMatrix(kinds, changes, n)
