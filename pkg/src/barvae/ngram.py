"""Interpolated Kneser-Ney n-gram scorer for token sequences.

Sequences are padded with order-1 context-only start symbols and one end
symbol, so the end symbol is scored and the outcome space has vocab_size + 1
entries. Costs are total negative log probability in nats.
"""

from __future__ import annotations

import numpy as np

from .nn import load_arrays, save_arrays

START = -1
DISCOUNT = 0.75


class NgramModel:
    def __init__(self, vocab_size: int, order: int = 5, discount: float = DISCOUNT):
        if vocab_size < 1:
            raise ValueError("vocab_size must be positive")
        if order < 2:
            raise ValueError("order must be at least 2")
        if not 0.0 < discount < 1.0:
            raise ValueError("discount must lie in (0, 1)")
        self.vocab_size = vocab_size
        self.order = order
        self.discount = discount
        self.end = vocab_size
        self.num_outcomes = vocab_size + 1
        # raw gram counts per length 1..order
        self._raw: dict[int, dict[tuple, int]] = {k: {} for k in range(1, order + 1)}
        # sum over w of raw count of context+w, for top-level denominators
        self._prefix_total: dict[tuple, int] = {}
        self._derive()

    # -- fitting --------------------------------------------------------------

    @classmethod
    def uniform(cls, vocab_size: int, order: int = 5) -> "NgramModel":
        """Untrained model: every outcome costs ln(vocab_size + 1) nats."""
        return cls(vocab_size, order)

    @classmethod
    def fit(cls, corpus, vocab_size: int, order: int = 5, discount: float = DISCOUNT) -> "NgramModel":
        model = cls(vocab_size, order, discount)
        n_seqs = 0
        for seq in corpus:
            model._count(seq)
            n_seqs += 1
        if n_seqs == 0:
            raise ValueError("cannot fit on an empty corpus")
        model._derive()
        return model

    def _check_tokens(self, seq) -> list[int]:
        out = []
        for t in seq:
            t = int(t)
            if not 0 <= t < self.vocab_size:
                raise ValueError(f"token {t} outside vocabulary of size {self.vocab_size}")
            out.append(t)
        return out

    def _count(self, seq) -> None:
        padded = [START] * (self.order - 1) + self._check_tokens(seq) + [self.end]
        for i in range(self.order - 1, len(padded)):
            for k in range(1, self.order + 1):
                gram = tuple(padded[i - k + 1 : i + 1])
                self._raw[k][gram] = self._raw[k].get(gram, 0) + 1
                if k == self.order:
                    h = gram[:-1]
                    self._prefix_total[h] = self._prefix_total.get(h, 0) + 1

    def _derive(self) -> None:
        """Continuation tables from raw counts (distinct left extensions)."""
        order = self.order
        # cont[k][gram] = number of distinct symbols x with raw[k+1][(x,)+gram] > 0
        self._cont: dict[int, dict[tuple, int]] = {k: {} for k in range(1, order)}
        # cont_total[k][h] = sum over w of cont[k][h+(w,)]
        self._cont_total: dict[int, dict[tuple, int]] = {k: {} for k in range(1, order)}
        # distinct_w[k][h] = number of distinct continuations of h at level k
        self._distinct_w: dict[int, dict[tuple, int]] = {k: {} for k in range(1, order + 1)}
        for k in range(1, order):
            cont = self._cont[k]
            total = self._cont_total[k]
            for gram in self._raw[k + 1]:
                g = gram[1:]
                cont[g] = cont.get(g, 0) + 1
                h = g[:-1]
                total[h] = total.get(h, 0) + 1
            dw = self._distinct_w[k]
            for g in cont:
                h = g[:-1]
                dw[h] = dw.get(h, 0) + 1
        dw_top = self._distinct_w[order]
        for gram in self._raw[order]:
            h = gram[:-1]
            dw_top[h] = dw_top.get(h, 0) + 1

    # -- scoring --------------------------------------------------------------

    def _prob_level(self, w: int, context: tuple, level: int) -> float:
        if level == 0:
            return 1.0 / self.num_outcomes
        if level == self.order:
            table = self._raw[level]
            denom = self._prefix_total.get(context, 0)
        else:
            table = self._cont[level]
            denom = self._cont_total[level].get(context, 0)
        if denom == 0:
            return self._prob_level(w, context[1:], level - 1)
        c = table.get(context + (w,), 0)
        lam = self.discount * self._distinct_w[level][context] / denom
        lower = self._prob_level(w, context[1:], level - 1)
        return max(c - self.discount, 0.0) / denom + lam * lower

    def prob(self, w: int, context=()) -> float:
        """Probability of the next symbol; w may be the end symbol."""
        if not 0 <= int(w) <= self.end:
            raise ValueError(f"symbol {w} outside outcome space")
        ctx = tuple(int(t) for t in context)[-(self.order - 1) :]
        ctx = (START,) * (self.order - 1 - len(ctx)) + ctx
        return self._prob_level(int(w), ctx, self.order)

    def score(self, seq) -> float:
        """Total cost in nats, end symbol included; empty input scores it alone."""
        tokens = self._check_tokens(seq) + [self.end]
        context = (START,) * (self.order - 1)
        cost = 0.0
        for w in tokens:
            cost -= float(np.log(self._prob_level(w, context, self.order)))
            context = context[1:] + (w,)
        return cost

    def score_many(self, seqs) -> np.ndarray:
        return np.array([self.score(seq) for seq in seqs])


# -- persistence ---------------------------------------------------------------


def save_ngram(path, model: NgramModel) -> None:
    arrays = {}
    for k in range(1, model.order + 1):
        items = sorted(model._raw[k].items())
        keys = np.array([g for g, _ in items], dtype=np.int64).reshape(len(items), k)
        values = np.array([c for _, c in items], dtype=np.int64)
        arrays[f"ngram/{k}/keys"] = keys
        arrays[f"ngram/{k}/values"] = values
    meta = {
        "kind": "kneser_ney",
        "order": model.order,
        "vocab_size": model.vocab_size,
        "discount": model.discount,
    }
    save_arrays(path, arrays, meta)


def load_ngram(path) -> NgramModel:
    arrays, meta = load_arrays(path)
    if meta.get("kind") != "kneser_ney":
        raise ValueError(f"not an n-gram checkpoint: {path}")
    model = NgramModel(meta["vocab_size"], meta["order"], meta["discount"])
    for k in range(1, model.order + 1):
        keys = arrays[f"ngram/{k}/keys"]
        values = arrays[f"ngram/{k}/values"]
        table = model._raw[k]
        for row, count in zip(keys, values):
            gram = tuple(int(x) for x in row)
            table[gram] = int(count)
            if k == model.order:
                h = gram[:-1]
                model._prefix_total[h] = model._prefix_total.get(h, 0) + int(count)
    model._derive()
    return model
