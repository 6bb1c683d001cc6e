"""Noise-injection sweeps over corpora, the planted-spurious corpus, and CSV output."""

from __future__ import annotations

import csv
import enum
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

from rationale_noise.corpus import (
    Corpus,
    Document,
    build_vocabulary,
    enforce_balanced_split,
    equal_mass_fraction,
    load_jsonl,
)
from rationale_noise.errors import ValidationError
from rationale_noise.noiser import NoiseSpec, Target, corrupt_corpus
from rationale_noise.scm import McOptions, Params, Setting, sweep_noise, write_sweep_csv
from rationale_noise.seeding import generator, mix
from rationale_noise.textmodel import (
    LinearHyper,
    class_order,
    evaluate,
    fit_tfidf,
    signed_labels,
    train_linear,
    train_naive_bayes,
    transform,
)

__all__ = [
    "CALIBRATION_BASE_SEED",
    "CALIBRATION_SPEC",
    "ExperimentConfig",
    "ModelKind",
    "PlantedCorpusSpec",
    "ResultRow",
    "ResultTable",
    "TargetChoice",
    "emit_csv",
    "generate_planted_corpus",
    "noise_sweep",
    "read_csv",
    "run_noise_sweep",
    "run_scm_sweep",
]

DEFAULT_FRACTIONS = tuple(i / 10 for i in range(11))

_TARGET_CODE = {Target.RATIONALE: 1, Target.NON_RATIONALE: 2}


class ModelKind(str, enum.Enum):
    LINEAR_SVM = "linear_svm"
    NAIVE_BAYES = "naive_bayes"


class TargetChoice(str, enum.Enum):
    RATIONALE = "rationale"
    NON_RATIONALE = "non_rationale"
    BOTH = "both"

    def targets(self) -> tuple[Target, ...]:
        if self is TargetChoice.BOTH:
            return (Target.RATIONALE, Target.NON_RATIONALE)
        return (Target(self.value),)


@dataclass(frozen=True)
class ResultRow:
    model: str
    domain: str
    target: str
    fraction: float
    repetition: int | str  # int, or "mean"
    accuracy: float


@dataclass
class ResultTable:
    rows: list[ResultRow] = field(default_factory=list)
    equal_mass: float | None = None

    def mean(self, domain: str, target: str | Target, fraction: float) -> float:
        target = Target(target).value
        for r in self.rows:
            if r.repetition == "mean" and r.domain == domain and r.target == target and r.fraction == fraction:
                return r.accuracy
        raise KeyError((domain, target, fraction))

    def curve(self, domain: str, target: str | Target) -> list[tuple[float, float]]:
        target = Target(target).value
        return sorted(
            (r.fraction, r.accuracy)
            for r in self.rows
            if r.repetition == "mean" and r.domain == domain and r.target == target
        )


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    """Noise-sweep settings. The first ``eval_paths`` entry is the in-sample test set."""

    train_path: str
    eval_paths: Mapping[str, str]
    target: TargetChoice = TargetChoice.BOTH
    fractions: tuple[float, ...] = DEFAULT_FRACTIONS
    repetitions: int = 5
    model: ModelKind = ModelKind.LINEAR_SVM
    vocab_cap: int | None = None
    base_seed: int = 0
    C: float = 1.0
    epochs: int = 10
    alpha: float = 1.0
    balance_eval: bool = False
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "target", TargetChoice(self.target))
        object.__setattr__(self, "model", ModelKind(self.model))
        object.__setattr__(self, "fractions", tuple(float(f) for f in self.fractions))
        object.__setattr__(self, "eval_paths", dict(self.eval_paths))
        _check_fractions(self.fractions)
        if not self.eval_paths:
            raise ValidationError("at least one evaluation corpus is required")
        if self.repetitions < 1:
            raise ValidationError("repetitions must be >= 1")
        if self.vocab_cap is not None and self.vocab_cap < 1:
            raise ValidationError("vocab_cap must be positive")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")

    @classmethod
    def from_mapping(cls, data: Mapping) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(data)
        missing = {"train_path", "eval_paths"} - kw.keys()
        if missing:
            raise ValidationError(f"missing config keys: {sorted(missing)}")
        try:
            return cls(**kw)
        except (TypeError, ValueError) as exc:
            raise ValidationError(str(exc)) from None


def _check_fractions(fractions: Sequence[float]) -> None:
    if not fractions:
        raise ValidationError("fraction grid is empty")
    if any(not (0.0 <= f <= 1.0) for f in fractions):
        raise ValidationError("fractions must lie in [0, 1]")
    if len(set(fractions)) != len(fractions):
        raise ValidationError("fractions must be unique")
    if list(fractions) != sorted(fractions):
        raise ValidationError("fractions must be sorted ascending")


# ---------------------------------------------------------------------------
# sweep


def _train_and_score(
    train: Corpus,
    evals: Mapping[str, Corpus],
    model: ModelKind,
    classes: tuple[str, str],
    vocab_cap: int | None,
    hyper: LinearHyper,
    alpha: float,
) -> dict[str, float]:
    # Vocabulary and IDF are refit on the (possibly corrupted) training set.
    vocab = build_vocabulary(train, vocab_cap)
    if model is ModelKind.NAIVE_BAYES:
        nb = train_naive_bayes(train, vocab, alpha=alpha, positive=classes[1])
        return {name: evaluate(nb, None, c) for name, c in evals.items()}
    tfidf = fit_tfidf(train, vocab)
    feats = [transform(tfidf, d) for d in train.docs]
    svm = train_linear(feats, signed_labels(train, classes), vocab.size, hyper, classes)
    return {name: evaluate(svm, tfidf, c) for name, c in evals.items()}


def noise_sweep(
    train: Corpus,
    evals: Mapping[str, Corpus],
    *,
    targets: Iterable[Target] = (Target.RATIONALE, Target.NON_RATIONALE),
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    repetitions: int = 5,
    model: ModelKind | str = ModelKind.LINEAR_SVM,
    vocab_cap: int | None = None,
    base_seed: int = 0,
    C: float = 1.0,
    epochs: int = 10,
    alpha: float = 1.0,
    workers: int = 1,
) -> ResultTable:
    """Corrupt the training set, retrain and score every evaluation set, per cell.

    A cell ``(target, fraction index, repetition)`` corrupts with seed
    ``mix(base_seed, target code, fraction index, repetition)`` and trains with
    seed ``mix(base_seed, repetition)``; evaluation corpora are never
    corrupted. Replacement tokens are drawn from the clean training
    vocabulary.
    """
    model = ModelKind(model)
    targets = tuple(Target(t) for t in targets)
    fractions = tuple(float(f) for f in fractions)
    _check_fractions(fractions)
    if repetitions < 1:
        raise ValidationError("repetitions must be >= 1")
    if not evals:
        raise ValidationError("at least one evaluation corpus is required")
    classes = class_order(train.labels)
    sample_vocab = build_vocabulary(train, vocab_cap)

    cells = [
        (t, fi, rep)
        for t in targets
        for fi in range(len(fractions))
        for rep in range(repetitions)
    ]

    def run(cell):
        t, fi, rep = cell
        spec = NoiseSpec(t, fractions[fi], mix(base_seed, _TARGET_CODE[t], fi, rep))
        noisy = corrupt_corpus(train, spec, sample_vocab)
        hyper = LinearHyper(C=C, epochs=epochs, seed=mix(base_seed, rep))
        return _train_and_score(noisy, evals, model, classes, vocab_cap, hyper, alpha)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = dict(zip(cells, pool.map(run, cells)))
    else:
        scores = {cell: run(cell) for cell in cells}

    table = ResultTable()
    for t in targets:
        for fi, frac in enumerate(fractions):
            for domain in evals:
                accs = [scores[(t, fi, rep)][domain] for rep in range(repetitions)]
                for rep, acc in enumerate(accs):
                    table.rows.append(ResultRow(model.value, domain, t.value, frac, rep, acc))
                table.rows.append(
                    ResultRow(model.value, domain, t.value, frac, "mean", statistics.fmean(accs))
                )
    try:
        table.equal_mass = equal_mass_fraction(train)
    except ValidationError:
        table.equal_mass = None
    return table


def run_noise_sweep(cfg: ExperimentConfig) -> ResultTable:
    train = load_jsonl(cfg.train_path)
    evals = {}
    for i, (name, path) in enumerate(cfg.eval_paths.items()):
        c = load_jsonl(path)
        if cfg.balance_eval:
            c = enforce_balanced_split(c, mix(cfg.base_seed, 0xBA1A, i))
        evals[name] = c
    return noise_sweep(
        train,
        evals,
        targets=cfg.target.targets(),
        fractions=cfg.fractions,
        repetitions=cfg.repetitions,
        model=cfg.model,
        vocab_cap=cfg.vocab_cap,
        base_seed=cfg.base_seed,
        C=cfg.C,
        epochs=cfg.epochs,
        alpha=cfg.alpha,
        workers=cfg.workers,
    )


def run_scm_sweep(
    setting: Setting | str,
    params: Params,
    eps_grid: Sequence[float],
    mc: McOptions | None = None,
    out: IO[str] | None = None,
    workers: int = 1,
) -> str:
    rows = sweep_noise(setting, params, eps_grid, mc, workers=workers)
    return write_sweep_csv(setting, rows, out)


# ---------------------------------------------------------------------------
# CSV

CSV_HEADER = ["model", "domain", "target", "fraction", "repetition", "accuracy"]


def emit_csv(t: ResultTable, out: str | Path | IO[str]) -> None:
    if isinstance(out, (str, Path)):
        with Path(out).open("w", encoding="utf-8", newline="") as fh:
            emit_csv(t, fh)
        return
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in t.rows:
        w.writerow([r.model, r.domain, r.target, f"{r.fraction:g}", r.repetition, f"{r.accuracy:.4f}"])


def read_csv(src: str | Path | IO[str]) -> ResultTable:
    if isinstance(src, (str, Path)):
        with Path(src).open(encoding="utf-8", newline="") as fh:
            return read_csv(fh)
    reader = csv.DictReader(src)
    if reader.fieldnames != CSV_HEADER:
        raise ValidationError(f"unexpected CSV header {reader.fieldnames}")
    rows = []
    for rec in reader:
        rep = rec["repetition"]
        rows.append(ResultRow(
            rec["model"], rec["domain"], rec["target"], float(rec["fraction"]),
            rep if rep == "mean" else int(rep), float(rec["accuracy"]),
        ))
    return ResultTable(rows)


# ---------------------------------------------------------------------------
# planted-spurious corpus


@dataclass(frozen=True)
class PlantedCorpusSpec:
    """Synthetic binary corpus with a causal and a spurious token group.

    Each document has ``n_causal_tokens`` causal slots and ``n_spurious_tokens``
    spurious slots; the remaining ``doc_length - n_causal_tokens -
    n_spurious_tokens`` slots are filler drawn from ``n_filler_tokens``
    label-independent words. A causal (spurious) slot carries a word of the
    document's polarity with probability ``causal_strength``
    (``confound_strength``), otherwise a word of the opposite polarity; each
    polarity has ``lexicon_size`` words. Out-of-domain documents keep the
    causal mechanism but draw spurious polarity at 0.5.
    """

    n_train: int = 2000
    n_id_test: int = 1000
    n_ood_test: int = 1000
    n_causal_tokens: int = 10
    n_spurious_tokens: int = 10
    n_filler_tokens: int = 200
    causal_strength: float = 0.9
    confound_strength: float = 0.9
    doc_length: int = 30
    lexicon_size: int = 5
    seed: int = 0
    labels: tuple[str, str] = ("neg", "pos")

    def __post_init__(self):
        for name in ("n_train", "n_id_test", "n_ood_test", "n_causal_tokens",
                     "n_spurious_tokens", "n_filler_tokens", "doc_length", "lexicon_size"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be a positive integer")
        if not 0.5 < self.causal_strength <= 1.0:
            raise ValidationError("causal_strength must lie in (0.5, 1]")
        if not 0.5 <= self.confound_strength <= 1.0:
            raise ValidationError("confound_strength must lie in [0.5, 1]")
        if self.n_causal_tokens + self.n_spurious_tokens > self.doc_length:
            raise ValidationError("causal + spurious slots exceed doc_length")
        if len(set(self.labels)) != 2:
            raise ValidationError("labels must be two distinct names")


def _planted_doc(spec: PlantedCorpusSpec, split: str, code: int, i: int, confound: float) -> Document:
    rng = generator(spec.seed, code, i)
    pos = bool(rng.random() < 0.5)
    label = spec.labels[int(pos)]
    tokens: list[str] = []
    mask: list[bool] = []

    def group(kind: str, slots: int, agree_p: float, is_rationale: bool):
        agree = rng.random(slots) < agree_p
        words = rng.integers(0, spec.lexicon_size, size=slots)
        for a, w in zip(agree.tolist(), words.tolist()):
            polarity = "pos" if (pos == a) else "neg"
            tokens.append(f"{kind}_{polarity}_{w}")
            mask.append(is_rationale)

    group("causal", spec.n_causal_tokens, spec.causal_strength, True)
    group("spur", spec.n_spurious_tokens, confound, False)
    n_fill = spec.doc_length - spec.n_causal_tokens - spec.n_spurious_tokens
    for w in rng.integers(0, spec.n_filler_tokens, size=n_fill).tolist():
        tokens.append(f"filler_{w}")
        mask.append(False)
    order = rng.permutation(len(tokens)).tolist()
    return Document(
        f"{split}-{i:06d}", label, tuple(tokens[j] for j in order), tuple(mask[j] for j in order)
    )


def generate_planted_corpus(spec: PlantedCorpusSpec) -> tuple[Corpus, Corpus, Corpus]:
    """``(train, id_test, ood_test)``; rationale masks mark the causal slots."""
    out = []
    for code, (split, n, confound) in enumerate([
        ("train", spec.n_train, spec.confound_strength),
        ("id_test", spec.n_id_test, spec.confound_strength),
        ("ood_test", spec.n_ood_test, 0.5),
    ]):
        out.append(Corpus(tuple(_planted_doc(spec, split, code, i, confound) for i in range(n))))
    return out[0], out[1], out[2]


# Fixed specification used by the desk-scale reproduction of the
# rationale-noise trend; the thresholds checked against it live in
# tests/fixtures/calibration.json.
CALIBRATION_SPEC = PlantedCorpusSpec(
    n_train=2000,
    n_id_test=1000,
    n_ood_test=1000,
    n_causal_tokens=10,
    n_spurious_tokens=10,
    n_filler_tokens=200,
    causal_strength=0.9,
    confound_strength=0.9,
    doc_length=30,
    lexicon_size=5,
    seed=20210503,
)
CALIBRATION_BASE_SEED = 7
