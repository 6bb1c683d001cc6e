from __future__ import annotations

import io

import numpy as np
import pytest

from rationale_noise.corpus import Corpus, Document, dump_jsonl
from rationale_noise.errors import ValidationError
from rationale_noise.experiment import (
    CSV_HEADER,
    ExperimentConfig,
    PlantedCorpusSpec,
    ResultRow,
    ResultTable,
    emit_csv,
    generate_planted_corpus,
    noise_sweep,
    read_csv,
    run_noise_sweep,
    run_scm_sweep,
)
from rationale_noise.scm import CausalParams

SMALL = PlantedCorpusSpec(n_train=120, n_id_test=60, n_ood_test=60, n_causal_tokens=3,
                          n_spurious_tokens=3, n_filler_tokens=30, doc_length=12, lexicon_size=2, seed=4)


@pytest.fixture(scope="module")
def small_paths(tmp_path_factory):
    d = tmp_path_factory.mktemp("planted")
    for name, c in zip(("train", "id", "ood"), generate_planted_corpus(SMALL)):
        dump_jsonl(c, d / f"{name}.jsonl")
    return d


def config(d, **kw):
    base = dict(train_path=str(d / "train.jsonl"),
                eval_paths={"id": str(d / "id.jsonl"), "ood": str(d / "ood.jsonl")},
                fractions=(0.0, 0.5, 1.0), repetitions=2, epochs=3)
    base.update(kw)
    return ExperimentConfig(**base)


def csv_text(table):
    buf = io.StringIO()
    emit_csv(table, buf)
    return buf.getvalue()


# --- config -----------------------------------------------------------------


def test_config_rejects_duplicate_fractions(small_paths):
    with pytest.raises(ValidationError, match="unique"):
        config(small_paths, fractions=(0.0, 0.5, 0.5))


@pytest.mark.parametrize("bad", [(), (0.5, 0.1), (-0.1,), (1.2,)])
def test_config_rejects_bad_grids(small_paths, bad):
    with pytest.raises(ValidationError):
        config(small_paths, fractions=bad)


def test_config_from_mapping_rejects_unknown_and_missing():
    with pytest.raises(ValidationError, match="unknown"):
        ExperimentConfig.from_mapping({"train_path": "a", "eval_paths": {"x": "b"}, "bogus": 1})
    with pytest.raises(ValidationError, match="missing"):
        ExperimentConfig.from_mapping({"train_path": "a"})
    with pytest.raises(ValidationError):
        ExperimentConfig.from_mapping({"train_path": "a", "eval_paths": {"x": "b"}, "model": "cnn"})


def test_config_other_bounds(small_paths):
    with pytest.raises(ValidationError):
        config(small_paths, repetitions=0)
    with pytest.raises(ValidationError):
        config(small_paths, eval_paths={})


# --- sweep ------------------------------------------------------------------


def test_baseline_only_grid(small_paths):
    t = run_noise_sweep(config(small_paths, fractions=(0.0,), repetitions=1))
    # 2 targets x 1 fraction x 2 domains x (1 rep + 1 mean)
    assert len(t.rows) == 8
    assert {r.fraction for r in t.rows} == {0.0}
    for r in t.rows:
        assert 0.0 <= r.accuracy <= 1.0


def test_row_count_formula(small_paths):
    cfg = config(small_paths)
    t = run_noise_sweep(cfg)
    n_cells = len(cfg.fractions) * cfg.repetitions * 2 * 2
    n_mean = len(cfg.fractions) * 2 * 2
    assert len(t.rows) == n_cells + n_mean
    assert t.equal_mass == pytest.approx(3 / 9)


def test_same_config_byte_identical(small_paths):
    cfg = config(small_paths)
    assert csv_text(run_noise_sweep(cfg)) == csv_text(run_noise_sweep(cfg))


def test_parallel_matches_serial(small_paths):
    serial = csv_text(run_noise_sweep(config(small_paths)))
    parallel = csv_text(run_noise_sweep(config(small_paths, workers=4)))
    assert serial == parallel


@pytest.mark.parametrize("model", ["linear_svm", "naive_bayes"])
def test_fraction_zero_anchor(small_paths, model):
    t = run_noise_sweep(config(small_paths, model=model))
    for domain in ("id", "ood"):
        assert t.mean(domain, "rationale", 0.0) == t.mean(domain, "non_rationale", 0.0)
    # A single-target run hits the same baseline.
    only = run_noise_sweep(config(small_paths, model=model, target="rationale"))
    assert only.mean("id", "rationale", 0.0) == t.mean("id", "non_rationale", 0.0)


def test_mean_rows_are_arithmetic_means(small_paths):
    t = run_noise_sweep(config(small_paths))
    reps = [r.accuracy for r in t.rows
            if r.domain == "ood" and r.target == "rationale" and r.fraction == 1.0 and r.repetition != "mean"]
    assert len(reps) == 2
    assert t.mean("ood", "rationale", 1.0) == pytest.approx(sum(reps) / 2, abs=1e-15)


def test_eval_sets_never_corrupted(small_paths):
    _, id_test, ood = generate_planted_corpus(SMALL)
    t = noise_sweep(*generate_planted_corpus(SMALL)[:1], {"id": id_test, "ood": ood},
                    fractions=(1.0,), repetitions=1, epochs=2)
    assert t.rows
    assert generate_planted_corpus(SMALL)[1] == id_test


def test_balance_eval(tmp_path):
    docs = [Document(f"a{i}", "pos" if i < 30 else "neg", ("x", f"t{i % 3}"), (True, False)) for i in range(40)]
    dump_jsonl(Corpus(tuple(docs)), tmp_path / "train.jsonl")
    cfg = ExperimentConfig(train_path=str(tmp_path / "train.jsonl"),
                           eval_paths={"id": str(tmp_path / "train.jsonl")},
                           fractions=(0.0,), repetitions=1, balance_eval=True, epochs=2)
    assert len(run_noise_sweep(cfg).rows) == 4


def test_missing_file_raises_oserror(tmp_path):
    cfg = ExperimentConfig(train_path=str(tmp_path / "none.jsonl"), eval_paths={"x": "y"})
    with pytest.raises(OSError):
        run_noise_sweep(cfg)


# --- scm wrapper ------------------------------------------------------------


def test_run_scm_sweep_unit_causal():
    text = run_scm_sweep("causal_x1", CausalParams(), [0.0, 1.0])
    lines = text.splitlines()
    assert lines[1].split(",")[2:4] == ["1", "0"]
    assert lines[2].split(",")[2:4] == ["0.6", "0.2"]
    # Monte Carlo columns stay empty without MC options.
    assert lines[1].split(",")[5:] == ["", "", "", ""]


def test_run_scm_sweep_empty_grid():
    with pytest.raises(ValidationError):
        run_scm_sweep("causal_x1", CausalParams(), [])


# --- CSV --------------------------------------------------------------------


def test_emit_empty_table_header_only():
    assert csv_text(ResultTable()) == ",".join(CSV_HEADER) + "\n"


def test_emit_accuracy_four_decimals():
    t = ResultTable([ResultRow("linear_svm", "imdb", "rationale", 0.1, "mean", 0.878)])
    assert csv_text(t).splitlines()[1] == "linear_svm,imdb,rationale,0.1,mean,0.8780"


def test_csv_round_trip(small_paths, tmp_path):
    t = run_noise_sweep(config(small_paths, fractions=(0.0, 1.0), repetitions=1))
    p = tmp_path / "out.csv"
    emit_csv(t, p)
    back = read_csv(p)
    assert len(back.rows) == len(t.rows)
    for a, b in zip(t.rows, back.rows):
        assert (a.model, a.domain, a.target, a.fraction, a.repetition) == \
               (b.model, b.domain, b.target, b.fraction, b.repetition)
        assert b.accuracy == pytest.approx(a.accuracy, abs=5e-5)
    assert csv_text(back) == p.read_text()


def test_read_csv_rejects_wrong_header():
    with pytest.raises(ValidationError):
        read_csv(io.StringIO("a,b\n1,2\n"))


# --- planted corpus ---------------------------------------------------------


def agreement(c: Corpus, prefix: str) -> tuple[int, int]:
    hits = total = 0
    for d in c.docs:
        polarity = d.label  # labels are ("neg", "pos")
        for t in d.tokens:
            if t.startswith(prefix):
                total += 1
                hits += t.split("_")[1] == polarity
    return hits, total


def test_planted_spec_bounds():
    for kw in [dict(causal_strength=0.5), dict(causal_strength=1.1), dict(confound_strength=0.4),
               dict(n_train=0), dict(n_causal_tokens=20, n_spurious_tokens=20)]:
        with pytest.raises(ValidationError):
            PlantedCorpusSpec(**kw)


def test_planted_structure():
    train, id_test, ood = generate_planted_corpus(SMALL)
    assert (len(train), len(id_test), len(ood)) == (120, 60, 60)
    for c in (train, id_test, ood):
        for d in c.docs:
            assert len(d.tokens) == SMALL.doc_length
            assert [t.startswith("causal_") for t in d.tokens] == list(d.rationale_mask)
            assert sum(t.startswith("spur_") for t in d.tokens) == SMALL.n_spurious_tokens
    assert generate_planted_corpus(SMALL) == (train, id_test, ood)


def test_planted_perfect_strengths():
    spec = PlantedCorpusSpec(n_train=200, n_id_test=10, n_ood_test=400, causal_strength=1.0,
                             confound_strength=1.0, seed=2)
    train, _, ood = generate_planted_corpus(spec)
    assert agreement(train, "causal_")[0] == agreement(train, "causal_")[1]
    assert agreement(train, "spur_")[0] == agreement(train, "spur_")[1]
    assert agreement(ood, "causal_")[0] == agreement(ood, "causal_")[1]
    hits, total = agreement(ood, "spur_")
    assert abs(hits / total - 0.5) < 0.05


@pytest.mark.slow
def test_planted_agreement_rates_within_4se():
    spec = PlantedCorpusSpec(n_train=10_000, n_id_test=10_000, n_ood_test=10_000,
                             n_causal_tokens=1, n_spurious_tokens=1, n_filler_tokens=5, doc_length=3,
                             causal_strength=0.8, confound_strength=0.7, seed=123)
    train, id_test, ood = generate_planted_corpus(spec)
    expected = [(train, "causal_", 0.8), (train, "spur_", 0.7), (id_test, "causal_", 0.8),
                (id_test, "spur_", 0.7), (ood, "causal_", 0.8), (ood, "spur_", 0.5)]
    for c, prefix, p in expected:
        hits, total = agreement(c, prefix)
        se = np.sqrt(p * (1 - p) / total)
        assert abs(hits / total - p) <= 4 * se, (prefix, hits / total, p)
    pos = sum(d.label == "pos" for d in train.docs) / len(train)
    assert abs(pos - 0.5) <= 4 * np.sqrt(0.25 / len(train))


def test_planted_uninformative_confound():
    spec = PlantedCorpusSpec(n_train=2000, n_id_test=10, n_ood_test=10, confound_strength=0.5, seed=8)
    hits, total = agreement(generate_planted_corpus(spec)[0], "spur_")
    assert abs(hits / total - 0.5) <= 4 * np.sqrt(0.25 / total)
