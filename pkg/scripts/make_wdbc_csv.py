"""Regenerate data/wdbc.csv from scikit-learn's bundled copy of the public
UCI breast-cancer measurements.

The bundled copy drops the original patient identifiers, so sequential ids
are written instead; the toolkit treats ids as opaque strings. Column names
follow the common underscore convention (radius_mean ... fractal_dimension_worst).
Run from the repository root:

    python scripts/make_wdbc_csv.py
"""

import csv
from pathlib import Path

from sklearn.datasets import load_breast_cancer

OUT = Path(__file__).resolve().parents[1] / "data" / "wdbc.csv"

SUFFIX = {"mean": "mean", "error": "se", "worst": "worst"}


def column_name(sklearn_name: str) -> str:
    words = sklearn_name.split()
    if words[0] in ("mean", "worst"):
        kind, stem = words[0], words[1:]
    else:  # "<stem> error"
        kind, stem = words[-1], words[:-1]
    return "_".join(stem) + "_" + SUFFIX[kind]


def main() -> None:
    bunch = load_breast_cancer()
    names = [column_name(n) for n in bunch.feature_names]
    OUT.parent.mkdir(parents=True, exist_ok=True)
    with OUT.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "diagnosis"] + names)
        for i, (row, target) in enumerate(zip(bunch.data, bunch.target), start=1):
            # sklearn target: 0 = malignant, 1 = benign
            diagnosis = "M" if target == 0 else "B"
            writer.writerow([str(i), diagnosis] + [repr(float(v)) for v in row])
    print(f"wrote {OUT} ({len(bunch.data)} records)")


if __name__ == "__main__":
    main()
