import math
from types import SimpleNamespace

import numpy as np
import pytest

from barvae.evaluate import (
    InterpolationReport,
    accuracy_table,
    data_interpolate,
    hamming_normalized,
    interpolation_report,
    reconstruction_accuracy,
    reports_svg,
    reports_table,
)
from barvae.model import FLAT, SAMPLED, TEACHER_FORCED, ArchConfig, Model
from barvae.ngram import NgramModel


class StubModel:
    """Feeds a fixed decode back regardless of the latent."""

    def __init__(self, produce):
        self._produce = produce
        self._batch = None

    def encode_mean(self, tokens):
        self._batch = [t.copy() for t in tokens]
        return np.zeros((tokens[0].shape[0], 2))

    def decode(self, z, targets=None, mode=None, temperature=1.0, rng=None):
        batch = targets if targets is not None else self._batch
        return SimpleNamespace(tokens=self._produce(batch, rng))


def tiny_model(vocab=130, seq_len=32):
    cfg = ArchConfig(
        latent_dim=4,
        encoder_hidden=8,
        decoder_hidden=8,
        seq_len=seq_len,
        num_segments=2,
        vocab_sizes=(vocab,),
        decoder_kind=FLAT,
    )
    return Model.build(cfg, seed=0)


def random_tokens(n, t=32, vocab=130, seed=0):
    return np.random.default_rng(seed).integers(0, vocab, size=(n, t)).astype(np.int64)


# -- reconstruction accuracy ----------------------------------------------------


def test_identity_decoder_scores_one():
    model = StubModel(lambda batch, rng: [t.copy() for t in batch])
    tokens = [random_tokens(10)]
    assert reconstruction_accuracy(model, tokens, TEACHER_FORCED) == 1.0
    assert reconstruction_accuracy(model, tokens, SAMPLED) == 1.0


def test_uniform_random_decoder_matches_binomial_rate():
    rng = np.random.default_rng(99)
    model = StubModel(lambda batch, _: [rng.integers(0, 130, size=t.shape) for t in batch])
    tokens = [random_tokens(40, t=256, seed=1)]
    acc = reconstruction_accuracy(model, tokens, SAMPLED)
    p = 1.0 / 130.0
    se = math.sqrt(p * (1 - p) / tokens[0].size)
    assert abs(acc - p) < 3 * se


def test_accuracy_on_real_model_is_deterministic():
    model = tiny_model(vocab=6)
    tokens = [random_tokens(12, vocab=6, seed=3)]
    tf1 = reconstruction_accuracy(model, tokens, TEACHER_FORCED, batch_size=5)
    tf2 = reconstruction_accuracy(model, tokens, TEACHER_FORCED, batch_size=5)
    assert tf1 == tf2
    s1 = reconstruction_accuracy(model, tokens, SAMPLED, seed=7)
    s2 = reconstruction_accuracy(model, tokens, SAMPLED, seed=7)
    assert s1 == s2
    assert 0.0 <= s1 <= 1.0


def test_accuracy_input_validation():
    model = tiny_model(vocab=6)
    with pytest.raises(ValueError, match="empty dataset"):
        reconstruction_accuracy(model, [np.zeros((0, 32), dtype=np.int64)], TEACHER_FORCED)
    with pytest.raises(ValueError, match="mode"):
        reconstruction_accuracy(model, [random_tokens(2, vocab=6)], "beam")
    with pytest.raises(ValueError, match="temperature"):
        reconstruction_accuracy(model, [random_tokens(2, vocab=6)], SAMPLED, temperature=0.0)


# -- data-space interpolation ----------------------------------------------------


def test_data_interpolate_endpoints_exact():
    a = random_tokens(1, t=64, seed=5)[0]
    b = random_tokens(1, t=64, seed=6)[0]
    assert np.array_equal(data_interpolate(a, b, 0.0, seed=1), a)
    assert np.array_equal(data_interpolate(a, b, 1.0, seed=1), b)
    assert np.array_equal(data_interpolate(a, a, 0.7, seed=2), a)


def test_data_interpolate_matches_bernoulli_rate():
    a = np.zeros(100, dtype=np.int64)
    b = np.ones(100, dtype=np.int64)
    flips = 0
    for trial in range(100):
        out = data_interpolate(a, b, 0.3, seed=trial)
        flips += int(out.sum())
    rate = flips / 10_000
    se = math.sqrt(0.3 * 0.7 / 10_000)
    assert abs(rate - 0.3) < 3 * se


def test_data_interpolate_validation():
    with pytest.raises(ValueError, match="shapes"):
        data_interpolate(np.zeros(4), np.zeros(5), 0.5)
    with pytest.raises(ValueError, match="alpha"):
        data_interpolate(np.zeros(4), np.zeros(4), 1.2)


def test_hamming_normalized():
    x = np.zeros(32, dtype=np.int64)
    y = x.copy()
    y[:4] = 1
    assert hamming_normalized(x, x) == 0.0
    assert hamming_normalized(x, y) == 0.125
    assert hamming_normalized(x, x + 1) == 1.0
    two_stream = np.stack([x, y])
    assert hamming_normalized(two_stream, np.stack([x, x])) == 0.0625
    with pytest.raises(ValueError, match="shapes"):
        hamming_normalized(np.zeros(3), np.zeros(4))


# -- interpolation report --------------------------------------------------------


def fitted_lm(seed=0, vocab=130):
    corpus = [row.tolist() for row in random_tokens(30, t=64, vocab=vocab, seed=seed)]
    return NgramModel.fit(corpus, vocab_size=vocab)


def test_data_baseline_report_endpoints_and_shape():
    rng = np.random.default_rng(2)
    pairs = [
        (rng.integers(0, 130, 32).astype(np.int64), rng.integers(0, 130, 32).astype(np.int64))
        for _ in range(16)
    ]
    report = interpolation_report(None, pairs, fitted_lm(), seed=11)
    assert report.method == "data"
    assert report.n_pairs == 16
    assert len(report.alphas) == 11
    assert report.hamming_from_a[0] == 0.0
    assert report.lm_cost_ratio[0] == 1.0
    assert report.lm_cost_ratio[-1] == 1.0
    # endpoints pin the curve; the middle should climb toward hamming(A, B)
    assert report.hamming_from_a[5] > report.hamming_from_a[0]
    assert report.hamming_from_a[-1] >= report.hamming_from_a[5]


def test_report_deterministic_given_seed():
    rng = np.random.default_rng(4)
    pairs = [
        (rng.integers(0, 130, 32).astype(np.int64), rng.integers(0, 130, 32).astype(np.int64))
        for _ in range(6)
    ]
    lm = fitted_lm(seed=1)
    r1 = interpolation_report(None, pairs, lm, seed=5)
    r2 = interpolation_report(None, pairs, lm, seed=5)
    assert np.array_equal(r1.hamming_from_a, r2.hamming_from_a)
    assert np.array_equal(r1.lm_cost_ratio, r2.lm_cost_ratio)
    r3 = interpolation_report(None, pairs, lm, seed=6)
    assert not np.array_equal(r1.hamming_from_a, r3.hamming_from_a)


def test_latent_report_runs_on_real_model():
    model = tiny_model(vocab=20)
    rng = np.random.default_rng(8)
    pairs = [
        (rng.integers(0, 20, 32).astype(np.int64), rng.integers(0, 20, 32).astype(np.int64))
        for _ in range(4)
    ]
    lm = fitted_lm(seed=2, vocab=20)
    r1 = interpolation_report(model, pairs, lm, alphas=(0.0, 0.5, 1.0), seed=3)
    assert r1.method == "flat"
    assert len(r1.alphas) == 3
    assert np.all(r1.lm_cost_ratio > 0.0)
    r2 = interpolation_report(model, pairs, lm, alphas=(0.0, 0.5, 1.0), seed=3)
    assert np.array_equal(r1.hamming_from_a, r2.hamming_from_a)


def test_report_validation():
    with pytest.raises(ValueError, match="empty pair"):
        interpolation_report(None, [], fitted_lm())
    bad = [(np.zeros(8, dtype=np.int64), np.zeros(9, dtype=np.int64))]
    with pytest.raises(ValueError):
        interpolation_report(None, bad, fitted_lm())


def test_report_invariant_checks():
    with pytest.raises(ValueError, match="share length"):
        InterpolationReport("data", np.zeros(3), np.zeros(2), np.zeros(3), 1)
    with pytest.raises(ValueError, match="Hamming"):
        InterpolationReport("data", np.zeros(2), np.array([0.5, 1.5]), np.ones(2), 1)


# -- rendering --------------------------------------------------------------------


def sample_report(method="data"):
    alphas = np.linspace(0.0, 1.0, 11)
    return InterpolationReport(method, alphas, alphas.copy(), np.ones(11), 8)


def test_reports_table_layout():
    text = reports_table([sample_report("data"), sample_report("flat")])
    lines = text.strip().split("\n")
    assert lines[0] == "alpha\tdata:hamming\tdata:lm_ratio\tflat:hamming\tflat:lm_ratio"
    assert len(lines) == 12
    assert lines[1].startswith("0.00\t0.000000\t1.000000")
    with pytest.raises(ValueError, match="alpha grids"):
        bad = InterpolationReport("x", np.zeros(2), np.zeros(2), np.ones(2), 1)
        reports_table([sample_report(), bad])


def test_accuracy_table_layout():
    text = accuracy_table({"flat": (0.9512, 0.62), "hierarchical": (0.96, 0.8125)})
    lines = text.strip().split("\n")
    assert lines[0] == "model\tteacher_forced\tsampled"
    assert lines[1] == "flat\t0.9512\t0.6200"
    assert lines[2] == "hierarchical\t0.9600\t0.8125"


def test_reports_svg_structure():
    svg = reports_svg([sample_report("data"), sample_report("flat")])
    assert svg.startswith("<svg")
    assert svg.rstrip().endswith("</svg>")
    assert svg.count("<polyline") == 4
    assert svg.count(">data</text>") == 2
    assert reports_svg([sample_report()]) == reports_svg([sample_report()])
