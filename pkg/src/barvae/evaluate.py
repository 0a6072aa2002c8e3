"""Evaluation protocols: reconstruction accuracy, interpolation curves, LM ratio."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .latent import slerp
from .model import SAMPLED, TEACHER_FORCED
from .nn import derive_rng

DATA_BASELINE = "data"


def reconstruction_accuracy(
    model,
    tokens: list[np.ndarray],
    mode: str = TEACHER_FORCED,
    temperature: float = 1.0,
    seed: int = 0,
    batch_size: int = 64,
) -> float:
    """Fraction of steps reproduced, from the mean latent (epsilon = 0).

    Trio accuracy is the per-stream average, which for equal-length streams
    equals the pooled fraction.
    """
    if mode not in (TEACHER_FORCED, SAMPLED):
        raise ValueError(f"unknown mode {mode!r}")
    if temperature <= 0.0:
        raise ValueError("temperature must be positive")
    n = tokens[0].shape[0]
    if n == 0:
        raise ValueError("empty dataset")
    correct = 0
    total = 0
    for start in range(0, n, batch_size):
        batch = [t[start : start + batch_size] for t in tokens]
        z = model.encode_mean(batch)
        if mode == TEACHER_FORCED:
            res = model.decode(z, targets=batch, mode=TEACHER_FORCED)
        else:
            rng = derive_rng(seed, "recon", start)
            res = model.decode(z, mode=SAMPLED, temperature=temperature, rng=rng)
        for s in range(len(batch)):
            correct += int(np.sum(res.tokens[s] == batch[s]))
            total += batch[s].size
    return correct / total


def _bernoulli_mix(a: np.ndarray, b: np.ndarray, alpha: float, rng) -> np.ndarray:
    coin = rng.random(a.shape[-1]) < alpha
    return np.where(coin, b, a)


def data_interpolate(a: np.ndarray, b: np.ndarray, alpha: float, seed: int = 0, rng=None) -> np.ndarray:
    """Per-step Bernoulli(alpha) choice of b over a; alpha=0 returns a exactly."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"sequence shapes differ: {a.shape} vs {b.shape}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if rng is None:
        rng = derive_rng(seed, "data-interpolate")
    return _bernoulli_mix(a, b, alpha, rng)


def hamming_normalized(x: np.ndarray, y: np.ndarray) -> float:
    """Fraction of differing steps; multi-stream inputs average over streams."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise ValueError(f"sequence shapes differ: {x.shape} vs {y.shape}")
    return float(np.mean(x != y))


@dataclass(frozen=True)
class InterpolationReport:
    method: str
    alphas: np.ndarray
    hamming_from_a: np.ndarray
    lm_cost_ratio: np.ndarray
    n_pairs: int

    def __post_init__(self):
        if not (len(self.alphas) == len(self.hamming_from_a) == len(self.lm_cost_ratio)):
            raise ValueError("report arrays must share length")
        if np.any(self.hamming_from_a < 0.0) or np.any(self.hamming_from_a > 1.0):
            raise ValueError("Hamming values must lie in [0, 1]")


DEFAULT_ALPHAS = tuple(round(0.1 * i, 1) for i in range(11))


def interpolation_report(
    model,
    pairs: list[tuple[np.ndarray, np.ndarray]],
    lm,
    alphas=DEFAULT_ALPHAS,
    temperature: float = 0.5,
    seed: int = 0,
) -> InterpolationReport:
    """Average Hamming-from-A and LM cost ratio over an alpha grid.

    alpha is the fraction of endpoint B. model=None runs the token-space
    Bernoulli baseline; otherwise endpoints are encoded at epsilon=0 and
    joined by slerp. Single-stream models only.
    """
    if not pairs:
        raise ValueError("empty pair list")
    a_tokens = np.stack([np.asarray(a, dtype=np.int64) for a, _ in pairs])
    b_tokens = np.stack([np.asarray(b, dtype=np.int64) for _, b in pairs])
    if a_tokens.shape != b_tokens.shape or a_tokens.ndim != 2:
        raise ValueError("pairs must hold equal-length single-stream token rows")
    n = len(pairs)
    cost_a = lm.score_many(a_tokens)
    cost_b = lm.score_many(b_tokens)

    if model is None:
        method = DATA_BASELINE
    else:
        if len(model.cfg.vocab_sizes) != 1:
            raise ValueError("interpolation report supports single-stream models only")
        method = model.cfg.decoder_kind
        z_a = model.encode_mean([a_tokens]).astype(np.float64)
        z_b = model.encode_mean([b_tokens]).astype(np.float64)

    hamming = np.zeros(len(alphas))
    ratio = np.zeros(len(alphas))
    for j, alpha in enumerate(alphas):
        alpha = float(alpha)
        if model is None:
            mixed = np.stack(
                [
                    _bernoulli_mix(a_tokens[i], b_tokens[i], alpha, derive_rng(seed, "mix", i, j))
                    for i in range(n)
                ]
            )
        else:
            z = np.stack([slerp(z_a[i], z_b[i], alpha) for i in range(n)])
            z = z.astype(model.cfg.np_dtype)
            res = model.decode(
                z, mode=SAMPLED, temperature=temperature, rng=derive_rng(seed, "interp", j)
            )
            mixed = res.tokens[0]
        hamming[j] = float(np.mean(mixed != a_tokens))
        cost_mix = lm.score_many(mixed)
        ratio[j] = float(np.mean(cost_mix / (alpha * cost_b + (1.0 - alpha) * cost_a)))
    return InterpolationReport(
        method=method,
        alphas=np.asarray(alphas, dtype=np.float64),
        hamming_from_a=hamming,
        lm_cost_ratio=ratio,
        n_pairs=n,
    )


# -- rendering -----------------------------------------------------------------


def reports_table(reports: list[InterpolationReport]) -> str:
    """Tab-separated table, one row per alpha, two columns per method."""
    if not reports:
        raise ValueError("no reports")
    alphas = reports[0].alphas
    for r in reports:
        if not np.array_equal(r.alphas, alphas):
            raise ValueError("reports use different alpha grids")
    header = ["alpha"]
    for r in reports:
        header += [f"{r.method}:hamming", f"{r.method}:lm_ratio"]
    lines = ["\t".join(header)]
    for j, alpha in enumerate(alphas):
        row = [f"{alpha:.2f}"]
        for r in reports:
            row += [f"{r.hamming_from_a[j]:.6f}", f"{r.lm_cost_ratio[j]:.6f}"]
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def accuracy_table(rows: dict[str, tuple[float, float]]) -> str:
    """Model-per-row accuracy table with teacher-forced and sampled columns."""
    lines = ["model\tteacher_forced\tsampled"]
    for name in rows:
        tf, sampled = rows[name]
        lines.append(f"{name}\t{tf:.4f}\t{sampled:.4f}")
    return "\n".join(lines) + "\n"


_PANEL_W = 380
_PANEL_H = 300
_MARGIN = 50
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _polyline(xs, ys, x0, y0, w, h, x_max, y_max, color):
    pts = []
    for x, y in zip(xs, ys):
        px = x0 + (x / x_max) * w
        py = y0 + h - (y / y_max) * h
        pts.append(f"{px:.1f},{py:.1f}")
    return f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(pts)}"/>'


def _panel(reports, x0, title, values_of, y_max):
    y0 = _MARGIN
    w, h = _PANEL_W - 2 * _MARGIN, _PANEL_H - 2 * _MARGIN
    parts = [
        f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#333"/>',
        f'<text x="{x0 + w / 2:.0f}" y="{y0 - 14}" text-anchor="middle" font-size="13">{title}</text>',
        f'<text x="{x0 + w / 2:.0f}" y="{y0 + h + 32}" text-anchor="middle" font-size="11">alpha</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        px = x0 + frac * w
        parts.append(f'<line x1="{px:.1f}" y1="{y0 + h}" x2="{px:.1f}" y2="{y0 + h + 4}" stroke="#333"/>')
        parts.append(
            f'<text x="{px:.1f}" y="{y0 + h + 16}" text-anchor="middle" font-size="10">{frac:g}</text>'
        )
        py = y0 + h - frac * h
        parts.append(f'<line x1="{x0 - 4}" y1="{py:.1f}" x2="{x0}" y2="{py:.1f}" stroke="#333"/>')
        parts.append(
            f'<text x="{x0 - 7}" y="{py + 3:.1f}" text-anchor="end" font-size="10">{frac * y_max:.2f}</text>'
        )
    for i, r in enumerate(reports):
        color = _COLORS[i % len(_COLORS)]
        parts.append(_polyline(r.alphas, values_of(r), x0, y0, w, h, 1.0, y_max, color))
        parts.append(
            f'<text x="{x0 + 6}" y="{y0 + 14 + 13 * i}" font-size="11" fill="{color}">{r.method}</text>'
        )
    return parts


def reports_svg(reports: list[InterpolationReport]) -> str:
    """Two fixed panels: Hamming-from-A and LM cost ratio against alpha."""
    if not reports:
        raise ValueError("no reports")
    ratio_max = max(1.0, max(float(r.lm_cost_ratio.max()) for r in reports))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{2 * _PANEL_W}" height="{_PANEL_H}" '
        'font-family="sans-serif">',
    ]
    parts += _panel(reports, _MARGIN, "Hamming distance from A", lambda r: r.hamming_from_a, 1.0)
    parts += _panel(
        reports, _PANEL_W + _MARGIN, "LM cost ratio", lambda r: r.lm_cost_ratio, ratio_max
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
