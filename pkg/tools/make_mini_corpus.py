"""Regenerate the bundled mini corpus (src/codepretrain/data/mini_corpus.jsonl).

The output is deterministic for a fixed seed; tests freeze statistics
computed from the checked-in file, so regenerate only when intentionally
rebuilding the fixture.
"""

import json
from pathlib import Path

import numpy as np

from codepretrain.synth import random_corpus

SEED = 20240501
SIZE = 200
LANGUAGES = ("mini", "java", "python", "go")


def main() -> None:
    rng = np.random.default_rng(SEED)
    records = random_corpus(rng, SIZE, languages=LANGUAGES, bimodal_prob=0.7)
    out = Path(__file__).resolve().parents[1] / "src" / "codepretrain" / "data" / "mini_corpus.jsonl"
    with open(out, "w", encoding="utf-8") as f:
        for rec in records:
            row = {"code": rec.code, "language": rec.language}
            if rec.docstring is not None:
                row["docstring"] = rec.docstring
            f.write(json.dumps(row) + "\n")
    print(f"wrote {SIZE} records to {out}")


if __name__ == "__main__":
    main()
