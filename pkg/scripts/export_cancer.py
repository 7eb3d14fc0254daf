"""Write the Wisconsin diagnostic breast cancer data to data/cancer.csv.

The label column ``diagnosis`` holds M (malignant) or B (benign).
"""
import argparse
import csv
from pathlib import Path

from sklearn.datasets import load_breast_cancer


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "data" / "cancer.csv"))
    args = ap.parse_args(argv)
    bunch = load_breast_cancer()
    names = [n.replace(" ", "_") for n in bunch.feature_names]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names + ["diagnosis"])
        for row, target in zip(bunch.data, bunch.target):
            # sklearn encodes malignant as 0
            w.writerow([repr(float(v)) for v in row] + ["B" if target == 1 else "M"])
    print(f"wrote {len(bunch.target)} rows to {out}")


if __name__ == "__main__":
    main()
