"""Pre-tokenized labelled documents with per-token rationale masks.

Wire format, one JSON object per line (UTF-8)::

    {"id": "d1", "label": "pos", "tokens": ["great", "film"], "rationale_mask": [1, 0]}
"""

from __future__ import annotations

import json
import statistics
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable

from rationale_noise.errors import DataError, ValidationError
from rationale_noise.seeding import generator

__all__ = [
    "Corpus",
    "Document",
    "Vocabulary",
    "build_vocabulary",
    "dump_jsonl",
    "enforce_balanced_split",
    "equal_mass_fraction",
    "load_jsonl",
    "parse_jsonl",
]


@dataclass(frozen=True)
class Document:
    id: str
    label: str
    tokens: tuple[str, ...]
    rationale_mask: tuple[bool, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "rationale_mask", tuple(bool(m) for m in self.rationale_mask))
        if len(self.tokens) != len(self.rationale_mask):
            raise ValidationError(
                f"document {self.id!r}: rationale_mask has {len(self.rationale_mask)} entries "
                f"for {len(self.tokens)} tokens"
            )
        if any(not isinstance(t, str) or not t for t in self.tokens):
            raise ValidationError(f"document {self.id!r}: tokens must be nonempty strings")

    @property
    def n_rationale(self) -> int:
        return sum(self.rationale_mask)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "label": self.label,
            "tokens": list(self.tokens),
            "rationale_mask": [int(m) for m in self.rationale_mask],
        }


@dataclass(frozen=True)
class Corpus:
    docs: tuple[Document, ...]
    labels: frozenset[str] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "docs", tuple(self.docs))
        if not self.docs:
            raise ValidationError("corpus is empty")
        seen: set[str] = set()
        for d in self.docs:
            if d.id in seen:
                raise ValidationError(f"duplicate document id {d.id!r}")
            seen.add(d.id)
        labels = frozenset(d.label for d in self.docs)
        if len(labels) > 2:
            raise ValidationError(f"expected at most two labels, found {sorted(labels)}")
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.docs)

    def __iter__(self):
        return iter(self.docs)

    def label_counts(self) -> Counter:
        return Counter(d.label for d in self.docs)


def parse_jsonl(lines: Iterable[str], source: str = "<input>") -> Corpus:
    docs = []
    seen: dict[str, int] = {}
    labels: set[str] = set()
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise DataError(f"malformed JSON ({exc.msg})", source, lineno) from None
        if not isinstance(rec, dict):
            raise DataError("record must be a JSON object", source, lineno)
        missing = {"id", "label", "tokens", "rationale_mask"} - rec.keys()
        if missing:
            raise DataError(f"missing fields {sorted(missing)}", source, lineno)
        doc_id, label, tokens, mask = rec["id"], rec["label"], rec["tokens"], rec["rationale_mask"]
        if not isinstance(doc_id, str) or not isinstance(label, str):
            raise DataError("id and label must be strings", source, lineno)
        if not isinstance(tokens, list) or any(not isinstance(t, str) or not t for t in tokens):
            raise DataError("tokens must be a list of nonempty strings", source, lineno)
        if not isinstance(mask, list) or any(m not in (0, 1) or isinstance(m, float) for m in mask):
            raise DataError("rationale_mask must be a list of 0/1", source, lineno)
        if len(mask) != len(tokens):
            raise DataError(
                f"rationale_mask length {len(mask)} does not match {len(tokens)} tokens",
                source, lineno,
            )
        if doc_id in seen:
            raise DataError(f"duplicate id {doc_id!r} (first seen on line {seen[doc_id]})", source, lineno)
        seen[doc_id] = lineno
        labels.add(label)
        if len(labels) > 2:
            raise DataError(f"more than two labels: {sorted(labels)}", source, lineno)
        docs.append(Document(doc_id, label, tuple(tokens), tuple(bool(m) for m in mask)))
    if not docs:
        raise DataError("corpus is empty", source)
    return Corpus(tuple(docs))


def load_jsonl(path: str | Path) -> Corpus:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        return parse_jsonl(fh, source=str(path))


def dump_jsonl(corpus: Corpus, out: str | Path | IO[str]) -> None:
    if isinstance(out, (str, Path)):
        with Path(out).open("w", encoding="utf-8") as fh:
            dump_jsonl(corpus, fh)
        return
    for d in corpus.docs:
        out.write(json.dumps(d.to_json(), ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class Vocabulary:
    """Tokens ordered by document frequency (descending), ties lexicographic."""

    tokens: tuple[str, ...]
    doc_freq: tuple[int, ...]
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.tokens) != len(self.doc_freq):
            raise ValidationError("tokens and doc_freq differ in length")
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.tokens)})

    @property
    def size(self) -> int:
        return len(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def df(self, token: str) -> int:
        return self.doc_freq[self.index[token]]


def build_vocabulary(c: Corpus, max_size: int | None = None) -> Vocabulary:
    if max_size is not None and max_size < 1:
        raise ValidationError("max_size must be a positive integer")
    df: Counter = Counter()
    for d in c.docs:
        df.update(set(d.tokens))
    ranked = sorted(df.items(), key=lambda kv: (-kv[1], kv[0]))
    if max_size is not None:
        ranked = ranked[:max_size]
    return Vocabulary(tuple(t for t, _ in ranked), tuple(n for _, n in ranked))


def equal_mass_fraction(c: Corpus) -> float:
    """Non-rationale noise fraction whose token mass matches noising every rationale.

    Ratio of the median per-document rationale count to the median per-document
    non-rationale count, capped at 1.
    """
    rat = [d.n_rationale for d in c.docs]
    non = [len(d.tokens) - d.n_rationale for d in c.docs]
    med_non = statistics.median(non)
    if med_non == 0:
        raise ValidationError("median non-rationale length is zero; fraction undefined")
    return min(1.0, statistics.median(rat) / med_non)


def enforce_balanced_split(c: Corpus, seed: int) -> Corpus:
    """Downsample the majority label so both labels have equal counts.

    Kept documents stay in their original order.
    """
    counts = c.label_counts()
    if len(counts) != 2:
        raise ValidationError(f"balanced split needs two labels, found {sorted(counts)}")
    (lab_a, n_a), (lab_b, n_b) = sorted(counts.items())
    if n_a == n_b:
        return c
    major, keep = (lab_a, n_b) if n_a > n_b else (lab_b, n_a)
    major_pos = [i for i, d in enumerate(c.docs) if d.label == major]
    chosen = set(generator(seed).choice(major_pos, size=keep, replace=False).tolist())
    return Corpus(tuple(d for i, d in enumerate(c.docs) if d.label != major or i in chosen))
