"""Bag-of-words classifiers: TF-IDF + linear SVM, and multinomial Naive Bayes.

Binary labels map to ``{-1, +1}`` with the lexicographically larger label
name as ``+1`` unless a positive label is given explicitly. A decision value
of exactly zero predicts the positive class.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Sequence, Union

import numpy as np

from rationale_noise.corpus import Corpus, Document, Vocabulary
from rationale_noise.errors import ValidationError
from rationale_noise.seeding import generator

__all__ = [
    "LinearHyper",
    "LinearModel",
    "NaiveBayesModel",
    "SparseVector",
    "TfidfModel",
    "class_order",
    "evaluate",
    "fit_tfidf",
    "read_linear_dump",
    "signed_labels",
    "top_features",
    "train_linear",
    "train_naive_bayes",
    "transform",
    "write_linear_dump",
]


@dataclass(frozen=True)
class SparseVector:
    indices: np.ndarray
    values: np.ndarray

    def dot(self, dense: np.ndarray) -> float:
        return float(dense[self.indices] @ self.values) if len(self.indices) else 0.0

    def norm(self) -> float:
        return float(np.sqrt(self.values @ self.values))

    def to_dense(self, dim: int) -> np.ndarray:
        out = np.zeros(dim)
        out[self.indices] = self.values
        return out


@dataclass(frozen=True)
class TfidfModel:
    vocab: Vocabulary
    idf: np.ndarray
    doc_count: int


def fit_tfidf(c: Corpus, v: Vocabulary) -> TfidfModel:
    """Smoothed IDF: ``ln((1 + N) / (1 + df)) + 1`` with df counted on ``c``."""
    df = np.zeros(v.size)
    for d in c.docs:
        for t in set(d.tokens):
            i = v.index.get(t)
            if i is not None:
                df[i] += 1
    n = len(c)
    idf = np.log((1.0 + n) / (1.0 + df)) + 1.0
    idf.flags.writeable = False
    return TfidfModel(vocab=v, idf=idf, doc_count=n)


def _counts(d: Document, v: Vocabulary) -> tuple[np.ndarray, np.ndarray]:
    counts = Counter(v.index[t] for t in d.tokens if t in v.index)
    idx = np.array(sorted(counts), dtype=np.int64)
    return idx, np.array([counts[i] for i in idx.tolist()], dtype=float)


def transform(m: TfidfModel, d: Document) -> SparseVector:
    idx, tf = _counts(d, m.vocab)
    vals = tf * m.idf[idx]
    norm = math.sqrt(float(vals @ vals))
    if norm > 0:
        vals = vals / norm
    return SparseVector(idx, vals)


def class_order(labels: Sequence[str] | frozenset[str], positive: str | None = None) -> tuple[str, str]:
    """``(negative, positive)`` label names."""
    labs = sorted(set(labels))
    if len(labs) != 2:
        raise ValidationError(f"binary classification needs exactly two labels, found {labs}")
    if positive is None:
        return labs[0], labs[1]
    if positive not in labs:
        raise ValidationError(f"positive label {positive!r} not among {labs}")
    return (labs[0] if labs[1] == positive else labs[1]), positive


def signed_labels(c: Corpus, classes: tuple[str, str]) -> np.ndarray:
    return np.array([1 if d.label == classes[1] else -1 for d in c.docs], dtype=np.int64)


# ---------------------------------------------------------------------------
# linear SVM


@dataclass(frozen=True)
class LinearHyper:
    C: float = 1.0
    epochs: int = 10
    seed: int = 0

    def __post_init__(self):
        if not self.C > 0:
            raise ValidationError("C must be positive")
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    bias: float
    hyper: LinearHyper
    classes: tuple[str, str] = ("-1", "+1")

    def decision(self, x: SparseVector) -> float:
        return x.dot(self.weights) + self.bias


def train_linear(
    features: Sequence[SparseVector],
    labels: Sequence[int],
    dim: int,
    hyper: LinearHyper = LinearHyper(),
    classes: tuple[str, str] = ("-1", "+1"),
) -> LinearModel:
    """Primal hinge-loss SVM by stochastic subgradient descent.

    Minimizes ``(1/C) * 0.5 * |w|^2 + sum_i hinge(1 - y_i (w.x_i + b))``, i.e.
    ``lam/2 |w|^2 + mean hinge`` with ``lam = 1 / (C n)``. Step ``t`` uses
    ``eta_t = 1 / (lam t)`` followed by projection onto the ball of radius
    ``1/sqrt(lam)``. The bias is an extra constant feature and is regularized
    with the weights. Each epoch visits the examples in a seeded permutation.
    """
    y = np.asarray(labels, dtype=np.int64)
    n = len(y)
    if n != len(features):
        raise ValidationError("features and labels differ in length")
    if not (np.any(y == 1) and np.any(y == -1)):
        raise ValidationError("training data must contain both classes")
    if np.any((y != 1) & (y != -1)):
        raise ValidationError("labels must be -1 or +1")

    lam = 1.0 / (hyper.C * n)
    rng = generator(hyper.seed)
    # w = scale * v, with v[dim] holding the bias.
    v = np.zeros(dim + 1)
    scale = 1.0
    sq = 0.0  # |v|^2
    radius2 = 1.0 / lam
    rows = [(np.append(f.indices, dim), np.append(f.values, 1.0)) for f in features]
    t = 0
    for _ in range(hyper.epochs):
        for i in rng.permutation(n).tolist():
            t += 1
            idx, vals = rows[i]
            margin = y[i] * scale * float(v[idx] @ vals)
            eta = 1.0 / (lam * t)
            shrink = 1.0 - eta * lam
            if shrink <= 0.0:
                v[:] = 0.0
                scale, sq = 1.0, 0.0
            else:
                scale *= shrink
            if margin < 1.0:
                delta = (eta * y[i] / scale) * vals
                old = v[idx]
                sq += float(2.0 * (old @ delta) + delta @ delta)
                v[idx] = old + delta
            wnorm2 = scale * scale * sq
            if wnorm2 > radius2:
                scale *= math.sqrt(radius2 / wnorm2)
    w = scale * v
    weights = w[:dim].copy()
    weights.flags.writeable = False
    return LinearModel(weights=weights, bias=float(w[dim]), hyper=hyper, classes=classes)


# ---------------------------------------------------------------------------
# Naive Bayes


@dataclass(frozen=True)
class NaiveBayesModel:
    """Multinomial NB over raw token counts. Row 0 is the negative class."""

    vocab: Vocabulary
    classes: tuple[str, str]
    log_prior: np.ndarray
    log_likelihood: np.ndarray
    alpha: float = 1.0

    def decision(self, d: Document) -> float:
        idx, tf = _counts(d, self.vocab)
        scores = self.log_prior + self.log_likelihood[:, idx] @ tf
        return float(scores[1] - scores[0])


def train_naive_bayes(
    c: Corpus, v: Vocabulary, alpha: float = 1.0, positive: str | None = None
) -> NaiveBayesModel:
    """Class priors from document shares; likelihoods ``(n_tc + alpha) / (n_c + alpha |V|)``."""
    if not alpha > 0:
        raise ValidationError("alpha must be positive")
    classes = class_order(c.labels, positive)
    counts = np.zeros((2, v.size))
    docs_per_class = np.zeros(2)
    for d in c.docs:
        k = 1 if d.label == classes[1] else 0
        docs_per_class[k] += 1
        idx, tf = _counts(d, v)
        counts[k, idx] += tf
    smoothed = counts + alpha
    log_lik = np.log(smoothed) - np.log(smoothed.sum(axis=1, keepdims=True))
    log_prior = np.log(docs_per_class / docs_per_class.sum())
    return NaiveBayesModel(vocab=v, classes=classes, log_prior=log_prior, log_likelihood=log_lik, alpha=alpha)


# ---------------------------------------------------------------------------


Model = Union[LinearModel, NaiveBayesModel]


def decision_values(model: Model, m: TfidfModel | None, c: Corpus) -> np.ndarray:
    if isinstance(model, NaiveBayesModel):
        return np.array([model.decision(d) for d in c.docs])
    if m is None:
        raise ValidationError("a linear model needs the TF-IDF featurizer it was trained with")
    return np.array([model.decision(transform(m, d)) for d in c.docs])


def evaluate(model: Model, m: TfidfModel | None, c: Corpus) -> float:
    """Fraction of documents whose predicted label equals the gold label."""
    if len(c.docs) == 0:
        raise ValidationError("cannot evaluate on an empty corpus")
    dv = decision_values(model, m, c)
    neg, pos = model.classes
    hits = sum((pos if s >= 0 else neg) == d.label for s, d in zip(dv.tolist(), c.docs))
    return hits / len(c.docs)


# ---------------------------------------------------------------------------
# dump format:
#   # bias <TAB> value
#   # classes <TAB> negative <TAB> positive
#   index <TAB> token <TAB> weight        (one line per vocabulary entry)
# Tokens are written with backslash escapes so tabs/newlines survive.


def _esc(token: str) -> str:
    return token.encode("unicode_escape").decode("ascii")


def _unesc(text: str) -> str:
    return text.encode("ascii").decode("unicode_escape")


def write_linear_dump(model: LinearModel, vocab: Vocabulary, out: str | Path | IO[str]) -> None:
    if isinstance(out, (str, Path)):
        with Path(out).open("w", encoding="utf-8") as fh:
            write_linear_dump(model, vocab, fh)
        return
    if len(model.weights) != vocab.size:
        raise ValidationError("model and vocabulary sizes differ")
    out.write(f"# bias\t{model.bias!r}\n")
    out.write(f"# classes\t{_esc(model.classes[0])}\t{_esc(model.classes[1])}\n")
    for i, (tok, wt) in enumerate(zip(vocab.tokens, model.weights.tolist())):
        out.write(f"{i}\t{_esc(tok)}\t{wt!r}\n")


@dataclass(frozen=True)
class LinearDump:
    bias: float
    classes: tuple[str, str]
    tokens: tuple[str, ...]
    weights: np.ndarray = field(repr=False)


def read_linear_dump(path: str | Path) -> LinearDump:
    bias, classes, tokens, weights = 0.0, ("-1", "+1"), [], []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            if parts[0] == "# bias":
                bias = float(parts[1])
            elif parts[0] == "# classes":
                classes = (_unesc(parts[1]), _unesc(parts[2]))
            else:
                if int(parts[0]) != len(tokens):
                    raise ValidationError(f"dump index {parts[0]} out of order")
                tokens.append(_unesc(parts[1]))
                weights.append(float(parts[2]))
    return LinearDump(bias, classes, tuple(tokens), np.array(weights))


def top_features(model: LinearModel, vocab: Vocabulary, k: int = 10) -> list[tuple[str, float]]:
    """The ``k`` tokens with the largest absolute weight, strongest first."""
    order = sorted(range(vocab.size), key=lambda i: (-abs(model.weights[i]), i))[:k]
    return [(vocab.tokens[i], float(model.weights[i])) for i in order]
