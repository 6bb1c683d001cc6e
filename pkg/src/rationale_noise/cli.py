"""Command-line entry point.

Subcommands: ``scm-sweep``, ``noise-sweep``, ``synth-gen``, ``equal-mass`` and
``dump-model``. Each accepts ``--config FILE`` (YAML or JSON) whose keys mirror
the flag names with underscores; flags given on the command line override the
file. Exit status: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path
from typing import Any, Sequence

import yaml

from rationale_noise.corpus import build_vocabulary, dump_jsonl, equal_mass_fraction, load_jsonl
from rationale_noise.errors import ValidationError
from rationale_noise.experiment import (
    ExperimentConfig,
    PlantedCorpusSpec,
    emit_csv,
    generate_planted_corpus,
    run_noise_sweep,
    run_scm_sweep,
)
from rationale_noise.noiser import NoiseSpec, corrupt_corpus
from rationale_noise.scm import AnticausalParams, CausalParams, McOptions, Setting
from rationale_noise.textmodel import (
    LinearHyper,
    class_order,
    fit_tfidf,
    signed_labels,
    train_linear,
    transform,
    write_linear_dump,
)

log = logging.getLogger("rationale_noise")

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2

_SCM_FIELDS = list(dict.fromkeys(
    [f.name for f in fields(CausalParams)] + [f.name for f in fields(AnticausalParams)]
))


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _key_value(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected NAME=PATH, got {text!r}")
    k, v = text.split("=", 1)
    return k, v


def _load_config(path: str | None) -> tuple[dict[str, Any], Path | None]:
    if path is None:
        return {}, None
    p = Path(path)
    with p.open(encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: config must be a mapping")
    return data, p.parent


def _overrides(args: argparse.Namespace, names: Sequence[str]) -> dict[str, Any]:
    return {n: getattr(args, n) for n in names if getattr(args, n, None) is not None}


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------


def cmd_scm_sweep(args: argparse.Namespace) -> int:
    cfg, _ = _load_config(args.config)
    cfg.update(_overrides(args, ["setting", "eps", "mc_n", "mc_seed", "workers"]))
    params_in = dict(cfg.pop("params", {}) or {})
    params_in.update(_overrides(args, _SCM_FIELDS))
    unknown = set(cfg) - {"setting", "eps", "mc_n", "mc_seed", "workers"}
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    setting = Setting(cfg.get("setting", Setting.CAUSAL_X1.value))
    cls = CausalParams if setting is Setting.CAUSAL_X1 else AnticausalParams
    allowed = {f.name for f in fields(cls)}
    bad = set(params_in) - allowed
    if bad:
        raise ValidationError(f"parameters {sorted(bad)} do not apply to {setting.value}")
    params = cls(**{k: float(v) for k, v in params_in.items()})
    eps = cfg.get("eps")
    if eps is None:
        raise ValidationError("an eps grid is required (--eps 0,0.5,1)")
    mc = None
    if cfg.get("mc_n") is not None:
        mc = McOptions(n=int(cfg["mc_n"]), seed=int(cfg.get("mc_seed", 0)))
    text = run_scm_sweep(setting, params, [float(e) for e in eps], mc, workers=int(cfg.get("workers", 1)))
    _write(text, args.out)
    return EXIT_OK


_SWEEP_KEYS = ["train_path", "target", "fractions", "repetitions", "model", "vocab_cap",
               "base_seed", "C", "epochs", "alpha", "balance_eval", "workers"]


def cmd_noise_sweep(args: argparse.Namespace) -> int:
    data, base_dir = _load_config(args.config)
    if base_dir is not None:
        # Relative paths in a config file are taken relative to the file.
        for key in ("train_path",):
            if key in data:
                data[key] = str(base_dir / data[key])
        if "eval_paths" in data:
            data["eval_paths"] = {k: str(base_dir / v) for k, v in dict(data["eval_paths"]).items()}
    data.update(_overrides(args, _SWEEP_KEYS))
    if args.eval_paths:
        data["eval_paths"] = dict(args.eval_paths)
    cfg = ExperimentConfig.from_mapping(data)
    table = run_noise_sweep(cfg)
    if table.equal_mass is not None:
        log.info("equal-mass non-rationale fraction: %.4f", table.equal_mass)
    if args.out is None or args.out == "-":
        emit_csv(table, sys.stdout)
    else:
        emit_csv(table, args.out)
    return EXIT_OK


def cmd_synth_gen(args: argparse.Namespace) -> int:
    data, _ = _load_config(args.config)
    names = [f.name for f in fields(PlantedCorpusSpec) if f.name != "labels"]
    data.update(_overrides(args, names))
    unknown = set(data) - set(names) - {"labels"}
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    if "labels" in data:
        data["labels"] = tuple(data["labels"])
    spec = PlantedCorpusSpec(**data)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, corpus in zip(("train", "id_test", "ood_test"), generate_planted_corpus(spec)):
        dump_jsonl(corpus, out / f"{name}.jsonl")
    log.info("wrote train/id_test/ood_test to %s", out)
    return EXIT_OK


def cmd_equal_mass(args: argparse.Namespace) -> int:
    frac = equal_mass_fraction(load_jsonl(args.path))
    print(f"{frac:.6f}")
    return EXIT_OK


def cmd_dump_model(args: argparse.Namespace) -> int:
    train = load_jsonl(args.train_path)
    if args.fraction > 0:
        sample_vocab = build_vocabulary(train, args.vocab_cap)
        train = corrupt_corpus(train, NoiseSpec(args.target, args.fraction, args.seed), sample_vocab)
    vocab = build_vocabulary(train, args.vocab_cap)
    tfidf = fit_tfidf(train, vocab)
    classes = class_order(train.labels)
    model = train_linear(
        [transform(tfidf, d) for d in train.docs],
        signed_labels(train, classes),
        vocab.size,
        LinearHyper(C=args.C, epochs=args.epochs, seed=args.seed),
        classes,
    )
    if args.out is None or args.out == "-":
        write_linear_dump(model, vocab, sys.stdout)
    else:
        write_linear_dump(model, vocab, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rationale-noise", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scm-sweep", help="closed-form (and Monte Carlo) OLS along a noise grid")
    p.add_argument("--config")
    p.add_argument("--setting", choices=[s.value for s in Setting])
    p.add_argument("--eps", type=_float_list, help="comma-separated noise variances, ascending")
    p.add_argument("--mc-n", dest="mc_n", type=int, help="Monte Carlo sample size (omit for analytic only)")
    p.add_argument("--mc-seed", dest="mc_seed", type=int)
    p.add_argument("--workers", type=int)
    for name in _SCM_FIELDS:
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float)
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_scm_sweep)

    p = sub.add_parser("noise-sweep", help="rationale / non-rationale noise injection sweep")
    p.add_argument("--config")
    p.add_argument("--train", dest="train_path")
    p.add_argument("--eval", dest="eval_paths", type=_key_value, action="append",
                   help="NAME=PATH; repeatable, first is the in-sample test set")
    p.add_argument("--target", choices=["rationale", "non_rationale", "both"])
    p.add_argument("--fractions", type=_float_list)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--model", choices=["linear_svm", "naive_bayes"])
    p.add_argument("--vocab-cap", dest="vocab_cap", type=int)
    p.add_argument("--base-seed", dest="base_seed", type=int)
    p.add_argument("--C", dest="C", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--balance-eval", dest="balance_eval", action="store_true", default=None)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_noise_sweep)

    p = sub.add_parser("synth-gen", help="write a planted-spurious corpus (train/id_test/ood_test)")
    p.add_argument("--config")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    for f in fields(PlantedCorpusSpec):
        if f.name == "labels":
            continue
        typ = float if f.name.endswith("strength") else int
        p.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, type=typ)
    p.set_defaults(func=cmd_synth_gen)

    p = sub.add_parser("equal-mass", help="print the equal-mass non-rationale noise fraction")
    p.add_argument("path")
    p.set_defaults(func=cmd_equal_mass)

    p = sub.add_parser("dump-model", help="train a linear SVM and write its weights as flat text")
    p.add_argument("train_path")
    p.add_argument("--target", choices=["rationale", "non_rationale"], default="rationale")
    p.add_argument("--fraction", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--vocab-cap", dest="vocab_cap", type=int)
    p.add_argument("--C", dest="C", type=float, default=1.0)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_dump_model)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (TypeError, ValueError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
