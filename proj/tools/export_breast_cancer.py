"""Writes tests/data/breast_cancer.csv and its schema from scikit-learn's copy
of the Wisconsin diagnostic breast cancer data (569 rows, 30 features)."""

import csv
import json
import pathlib

from sklearn.datasets import load_breast_cancer

out = pathlib.Path(__file__).resolve().parent.parent / "tests" / "data"
out.mkdir(parents=True, exist_ok=True)
data = load_breast_cancer()
names = [n.replace(" ", "_") for n in data.feature_names]
with open(out / "breast_cancer.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(names + ["diagnosis"])
    for row, label in zip(data.data, data.target):
        w.writerow([repr(float(v)) for v in row] + [data.target_names[label]])
schema = {
    "schema_version": 1,
    "label": "diagnosis",
    "columns": [{"name": n, "kind": "numeric"} for n in names],
}
(out / "breast_cancer.schema.json").write_text(json.dumps(schema, indent=2) + "\n")
