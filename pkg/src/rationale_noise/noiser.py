"""Replace a fraction of rationale (or non-rationale) tokens with random vocabulary tokens."""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from rationale_noise.corpus import Corpus, Document, Vocabulary
from rationale_noise.errors import ValidationError
from rationale_noise.seeding import generator, text_key

__all__ = [
    "NoiseSpec",
    "Target",
    "corrupt_corpus",
    "inject",
    "plan_replacements",
    "replacement_count",
]


class Target(str, enum.Enum):
    RATIONALE = "rationale"
    NON_RATIONALE = "non_rationale"


@dataclass(frozen=True)
class NoiseSpec:
    target: Target
    fraction: float
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "target", Target(self.target))
        if not (0.0 <= self.fraction <= 1.0):
            raise ValidationError(f"noise fraction must lie in [0, 1], got {self.fraction!r}")


def replacement_count(fraction: float, n_targets: int) -> int:
    """``round_half_up(fraction * n_targets)``.

    The small slack keeps decimal grid points such as ``0.7 * 5`` from
    rounding down because of binary representation error.
    """
    return min(n_targets, math.floor(fraction * n_targets + 0.5 + 1e-9))


def _target_indices(d: Document, target: Target) -> np.ndarray:
    want = target is Target.RATIONALE
    return np.array([i for i, m in enumerate(d.rationale_mask) if m == want], dtype=np.int64)


def _plan(d: Document, spec: NoiseSpec) -> tuple[np.ndarray, np.random.Generator]:
    rng = generator(spec.seed, text_key(d.id))
    pool = _target_indices(d, spec.target)
    k = replacement_count(spec.fraction, len(pool))
    if k == 0:
        return np.empty(0, dtype=np.int64), rng
    return rng.choice(pool, size=k, replace=False), rng


def plan_replacements(d: Document, spec: NoiseSpec) -> frozenset[int]:
    """Token positions :func:`inject` will overwrite for this document.

    The draw is keyed by ``(spec.seed, d.id)``, so it does not depend on where
    the document sits in its corpus.
    """
    idx, _ = _plan(d, spec)
    return frozenset(idx.tolist())


def inject(d: Document, spec: NoiseSpec, v: Vocabulary) -> Document:
    if v.size == 0:
        raise ValidationError("cannot sample replacement tokens from an empty vocabulary")
    idx, rng = _plan(d, spec)
    if len(idx) == 0:
        return d
    # Uniform over the vocabulary; a draw may equal the token it replaces.
    draws = rng.integers(0, v.size, size=len(idx))
    tokens = list(d.tokens)
    for pos, j in zip(idx.tolist(), draws.tolist()):
        tokens[pos] = v.tokens[j]
    return Document(d.id, d.label, tuple(tokens), d.rationale_mask)


def corrupt_corpus(c: Corpus, spec: NoiseSpec, v: Vocabulary, workers: int = 1) -> Corpus:
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            docs = list(pool.map(lambda d: inject(d, spec, v), c.docs))
    else:
        docs = [inject(d, spec, v) for d in c.docs]
    return Corpus(tuple(docs))
