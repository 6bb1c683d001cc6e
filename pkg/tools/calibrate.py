"""Run the calibration sweep once and freeze its numbers as a test fixture.

Usage: python3 tools/calibrate.py [--out tests/fixtures/calibration.json]

The acceptance suite re-runs the same sweep and compares against the frozen
values, so rerun this only when the calibration spec or the training
pipeline changes on purpose.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
from pathlib import Path

from scipy.stats import spearmanr

from rationale_noise.experiment import (
    CALIBRATION_BASE_SEED,
    CALIBRATION_SPEC,
    DEFAULT_FRACTIONS,
    generate_planted_corpus,
    noise_sweep,
)

# Slack subtracted from the observed non-rationale/rationale OOD gap before
# pinning it; leaves room for float-level drift across numpy builds.
GAP_SLACK = 0.10


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "tests/fixtures/calibration.json"))
    args = ap.parse_args()

    train, id_test, ood = generate_planted_corpus(CALIBRATION_SPEC)
    table = noise_sweep(train, {"id": id_test, "ood": ood}, fractions=DEFAULT_FRACTIONS,
                        repetitions=5, base_seed=CALIBRATION_BASE_SEED)
    curves = {f"{dom}/{t}": [acc for _, acc in table.curve(dom, t)]
              for dom in ("id", "ood") for t in ("rationale", "non_rationale")}
    ood_r = curves["ood/rationale"]
    gap = curves["ood/non_rationale"][-1] - ood_r[-1]
    out = {
        "spec": dataclasses.asdict(CALIBRATION_SPEC),
        "base_seed": CALIBRATION_BASE_SEED,
        "repetitions": 5,
        "fractions": list(DEFAULT_FRACTIONS),
        "curves": curves,
        "observed": {
            "id_drop_rationale": curves["id/rationale"][0] - curves["id/rationale"][-1],
            "ood_drop_rationale": ood_r[0] - ood_r[-1],
            "ood_gap_non_minus_rationale": gap,
            "spearman_ood_rationale": float(spearmanr(DEFAULT_FRACTIONS, ood_r).statistic),
        },
        "thresholds": {
            "drop_ratio_min": 2.0,
            "non_rationale_ood_tolerance": 0.03,
            "spearman_max": -0.9,
            "ood_gap_margin": math.floor((gap - GAP_SLACK) * 100) / 100,
        },
    }
    Path(args.out).write_text(json.dumps(out, indent=2) + "\n", encoding="utf-8")
    print(json.dumps(out["observed"], indent=2))
    print("margin", out["thresholds"]["ood_gap_margin"])


if __name__ == "__main__":
    main()
